#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poisonlab/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitViolation = 4;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config JSON");
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "master seed; re-derives all block seeds");
    cmd->add_option("--set", opts.overrides, "dotted-path override, e.g. attack.poison_rate=0.1")
        ->take_all();
}

poisonlab::ExperimentConfig build_config(const CommonOpts& opts) {
    std::string text = "{}";
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw std::invalid_argument("cannot read config " + opts.config_path);
        text.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    for (const std::string& assignment : opts.overrides) {
        text = poisonlab::apply_override(text, assignment);
    }
    poisonlab::ExperimentConfig cfg = poisonlab::parse_config(text);
    if (opts.seed) {
        poisonlab::reseed(cfg, *opts.seed);
        cfg.validate();
    }
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"poisonlab: backdoor poisoning, entropy-map splitting, guided unlearning"};
    app.require_subcommand(1);

    CommonOpts pipeline_opts, split_opts, eval_opts, suite_opts;

    CLI::App* cmd_pipeline = app.add_subcommand("pipeline", "run attack -> train -> split -> unlearn -> evaluate");
    add_common(cmd_pipeline, pipeline_opts);

    CLI::App* cmd_split = app.add_subcommand("split-only", "run through the data split and export the entropy map");
    add_common(cmd_split, split_opts);

    CLI::App* cmd_eval = app.add_subcommand("eval-only", "re-evaluate saved before/after checkpoints");
    add_common(cmd_eval, eval_opts);
    std::string model_before, model_after;
    cmd_eval->add_option("--model-before", model_before, "checkpoint path (default: <out>/model_before.json)");
    cmd_eval->add_option("--model-after", model_after, "checkpoint path (default: <out>/model_after.json)");

    CLI::App* cmd_bounds = app.add_subcommand("bounds", "tail-bound grid sweep with Monte Carlo verification");
    poisonlab::BoundsSweepConfig bounds_cfg;
    std::string bounds_out = "bounds.csv";
    bool clean_label = false;
    cmd_bounds->add_option("--pr", bounds_cfg.pr_values, "poison-rate grid")->take_all();
    cmd_bounds->add_option("--p", bounds_cfg.p_values, "detection-probability grid (p_p, or p_t with --clean-label)")->take_all();
    cmd_bounds->add_option("--N", bounds_cfg.n, "sample count");
    cmd_bounds->add_option("--gamma", bounds_cfg.gamma, "slack parameter");
    cmd_bounds->add_option("--trials", bounds_cfg.trials, "Monte Carlo trials per grid point");
    cmd_bounds->add_option("--seed", bounds_cfg.seed, "Monte Carlo seed");
    cmd_bounds->add_option("--out", bounds_out, "output CSV path");
    cmd_bounds->add_flag("--clean-label", clean_label, "sweep the clean-label bound instead");

    CLI::App* cmd_suite = app.add_subcommand("suite", "run a manifest of scenarios and aggregate the metrics");
    std::string manifest_path;
    cmd_suite->add_option("--manifest", manifest_path, "manifest JSON listing scenarios")->required();
    add_common(cmd_suite, suite_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_pipeline->parsed()) {
            poisonlab::ExperimentConfig cfg;
            try {
                cfg = build_config(pipeline_opts);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfig;
            }
            poisonlab::PipelineResult result = poisonlab::run_pipeline(cfg, true);
            std::cout << result.summary << '\n';
            return kExitOk;
        }
        if (cmd_split->parsed()) {
            poisonlab::ExperimentConfig cfg;
            try {
                cfg = build_config(split_opts);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfig;
            }
            poisonlab::PipelineResult result = poisonlab::run_split_only(cfg, true);
            std::cout << "split: " << result.split.clean_indices.size() << " clean, "
                      << result.split.triggered_indices.size() << " triggered, "
                      << result.split.mixed_indices.size() << " mixed\n";
            return kExitOk;
        }
        if (cmd_eval->parsed()) {
            poisonlab::ExperimentConfig cfg;
            try {
                cfg = build_config(eval_opts);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfig;
            }
            const std::filesystem::path dir = cfg.output_dir;
            const std::filesystem::path before =
                model_before.empty() ? dir / "model_before.json" : std::filesystem::path(model_before);
            const std::filesystem::path after =
                model_after.empty() ? dir / "model_after.json" : std::filesystem::path(model_after);
            poisonlab::DefenseReport report =
                poisonlab::run_eval_only(cfg, before, after, dir / "metrics.json");
            std::cout << "CA " << report.ca_before << " -> " << report.ca_after << " | ASR "
                      << report.asr_before << " -> " << report.asr_after << '\n';
            return kExitOk;
        }
        if (cmd_bounds->parsed()) {
            bounds_cfg.clean_label = clean_label;
            bounds_cfg.out_csv = bounds_out;
            poisonlab::BoundsReport report = poisonlab::run_bounds(bounds_cfg, true);
            std::size_t bad = 0;
            for (const poisonlab::BoundsRow& row : report.rows) {
                if (!row.dominated) ++bad;
            }
            std::cout << report.rows.size() << " grid points, " << bad << " dominance violations\n";
            return report.all_dominated ? kExitOk : kExitViolation;
        }
        if (cmd_suite->parsed()) {
            std::vector<poisonlab::SuiteScenario> scenarios;
            try {
                scenarios = poisonlab::load_manifest(manifest_path);
                if (suite_opts.seed) {
                    for (poisonlab::SuiteScenario& s : scenarios) {
                        poisonlab::reseed(s.config, *suite_opts.seed);
                        s.config.validate();
                    }
                }
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfig;
            }
            const std::filesystem::path out =
                suite_opts.out_dir.empty() ? std::filesystem::path("suite_out")
                                           : std::filesystem::path(suite_opts.out_dir);
            poisonlab::SuiteResult result = poisonlab::run_suite(scenarios, out);
            for (const poisonlab::SuiteOutcome& o : result.outcomes) {
                if (o.ok) {
                    std::cout << o.name << ": CA " << o.report.ca_before << " -> "
                              << o.report.ca_after << " | ASR " << o.report.asr_before << " -> "
                              << o.report.asr_after << '\n';
                } else {
                    std::cout << o.name << ": FAILED (" << o.error << ")\n";
                }
            }
            return result.all_ok ? kExitOk : kExitStage;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    }
    return kExitOk;
}
