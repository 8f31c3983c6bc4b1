#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "poisonlab/bounds.hpp"
#include "poisonlab/config.hpp"
#include "poisonlab/eval.hpp"
#include "poisonlab/unlearn.hpp"

namespace poisonlab {

// In-memory outcome of one attack -> train -> split -> unlearn -> evaluate
// run; the file artifacts land in the output directory.
struct PipelineResult {
    Dataset poisoned;
    Classifier model_before;
    Classifier snapshot;
    std::vector<EntropyRecord> records;
    SplitResult split;
    UnlearnResult unlearn;
    DefenseReport report;
    double guide_accuracy = 0.0;
    std::string summary;  // the one-line CA/ASR digest
};

/// Runs the whole defense pipeline for one config. When write_artifacts is
/// set, the fixed file layout (dataset.json, entropy_map.csv, split.json,
/// unlearn_history.csv, model_before.json, model_after.json, metrics.json,
/// run.log) is produced under cfg.output_dir.
PipelineResult run_pipeline(const ExperimentConfig& cfg, bool write_artifacts = true);

/// Split stage only: dataset.json, entropy_map.csv, split.json.
PipelineResult run_split_only(const ExperimentConfig& cfg, bool write_artifacts = true);

/// Re-evaluates checkpoints from a previous run against a fresh test set.
DefenseReport run_eval_only(const ExperimentConfig& cfg,
                            const std::filesystem::path& model_before_path,
                            const std::filesystem::path& model_after_path,
                            const std::filesystem::path& metrics_out);

struct BoundsSweepConfig {
    std::vector<double> pr_values = {0.01, 0.05, 0.1, 0.2, 0.5};
    std::vector<double> p_values = {0.8, 0.9, 0.95, 0.99, 1.0};  // p_p, or p_t for clean-label
    long long n = 1000;
    double gamma = 0.2;
    long long trials = 100000;
    std::uint64_t seed = 7;
    bool clean_label = false;
    std::filesystem::path out_csv = "bounds.csv";
};

struct BoundsRow {
    double pr, gamma, alpha_p_or_pt, bound, mc_estimate, mc_stderr;
    long long n;
    bool dominated;  // mc_estimate <= bound + 3 * stderr
};

struct BoundsReport {
    std::vector<BoundsRow> rows;
    bool all_dominated = true;
};

/// Grid sweep of the tail bounds against Monte Carlo, written as CSV
/// (pr, N, gamma, alpha_p_or_pt, bound, mc_estimate, mc_stderr).
BoundsReport run_bounds(const BoundsSweepConfig& cfg, bool write_csv = true);

struct SuiteScenario {
    std::string name;
    ExperimentConfig config;
};

struct SuiteOutcome {
    std::string name;
    std::string family;
    bool ok = false;
    std::string error;
    DefenseReport report;
};

struct SuiteResult {
    std::vector<SuiteOutcome> outcomes;
    bool all_ok = true;
};

std::vector<SuiteScenario> load_manifest(const std::filesystem::path& path);

/// Runs every scenario (failures recorded, run continues) and writes the
/// aggregate CSV with per-scenario rows, per-family means, and an Average row.
SuiteResult run_suite(const std::vector<SuiteScenario>& scenarios,
                      const std::filesystem::path& out_dir);

}  // namespace poisonlab
