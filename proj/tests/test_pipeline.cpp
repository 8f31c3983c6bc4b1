#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "poisonlab/pipeline.hpp"

using namespace poisonlab;

namespace {

// scaled-down label-poison scenario for fast end-to-end checks
ExperimentConfig mini_config(const std::filesystem::path& out) {
    ExperimentConfig cfg = default_config();
    cfg.dataset.num_classes = 4;
    cfg.guide.num_classes = 4;
    cfg.dataset.feature_dim = 16;
    cfg.dataset.n_per_class = 100;
    cfg.attack.poison_rate = 0.05;
    cfg.attack.target_class = 0;
    cfg.attack.trigger.patch_coords = {0, 1, 2, 3};
    cfg.attack.trigger.patch_values = {4.0, 4.0, 4.0, 4.0};
    cfg.victim.hidden_dims = {24, 24};
    cfg.victim.train.epochs = 12;
    cfg.victim.snapshot_epoch = 3;
    cfg.unlearn.max_epochs = 6;
    cfg.eval.test_size = 400;
    cfg.output_dir = out;
    cfg.validate();
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("pipeline writes the full artifact layout and is byte-deterministic") {
    const auto dir = std::filesystem::temp_directory_path() / "poisonlab_pipe_test";
    std::filesystem::remove_all(dir);
    const ExperimentConfig cfg = mini_config(dir);

    const PipelineResult r1 = run_pipeline(cfg, true);
    for (const char* name : {"dataset.json", "entropy_map.csv", "split.json",
                             "unlearn_history.csv", "model_before.json", "model_after.json",
                             "metrics.json", "run.log"}) {
        CHECK(std::filesystem::exists(dir / name));
    }

    // schema checks on the emitted json files
    const nlohmann::json split_json = nlohmann::json::parse(slurp(dir / "split.json"));
    CHECK(split_json.contains("sigma1"));
    CHECK(split_json.contains("n_clean"));
    CHECK(split_json.at("confusion").contains("label_poison"));
    CHECK(split_json.at("n_clean").get<int>() ==
          static_cast<int>(r1.split.clean_indices.size()));

    const nlohmann::json metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
    CHECK(metrics.contains("ca_before"));
    CHECK(metrics.contains("asr_after"));

    const std::string metrics_text = slurp(dir / "metrics.json");
    const PipelineResult r2 = run_pipeline(cfg, true);
    CHECK(slurp(dir / "metrics.json") == metrics_text);
    CHECK(r1.report.ca_after == r2.report.ca_after);
    CHECK(r1.report.asr_after == r2.report.asr_after);
    CHECK(r1.model_before == r2.model_before);

    std::filesystem::remove_all(dir);
}

TEST_CASE("mini label-poison run actually defends") {
    const auto dir = std::filesystem::temp_directory_path() / "poisonlab_pipe_defense";
    std::filesystem::remove_all(dir);
    const ExperimentConfig cfg = mini_config(dir);
    const PipelineResult r = run_pipeline(cfg, false);
    CHECK(r.report.ca_before >= 0.9);
    CHECK(r.report.asr_before >= 0.8);
    CHECK(r.report.asr_after <= 0.15);
    CHECK(r.report.ca_after >= r.report.ca_before - 0.05);
}

TEST_CASE("split-only emits the split artifacts") {
    const auto dir = std::filesystem::temp_directory_path() / "poisonlab_split_only";
    std::filesystem::remove_all(dir);
    const ExperimentConfig cfg = mini_config(dir);
    const PipelineResult r = run_split_only(cfg, true);
    CHECK(std::filesystem::exists(dir / "dataset.json"));
    CHECK(std::filesystem::exists(dir / "entropy_map.csv"));
    CHECK(std::filesystem::exists(dir / "split.json"));
    CHECK_FALSE(std::filesystem::exists(dir / "metrics.json"));
    CHECK(r.split.clean_indices.size() + r.split.triggered_indices.size() +
              r.split.mixed_indices.size() == 400);
    std::filesystem::remove_all(dir);
}

TEST_CASE("eval-only reproduces the pipeline metrics from checkpoints") {
    const auto dir = std::filesystem::temp_directory_path() / "poisonlab_eval_only";
    std::filesystem::remove_all(dir);
    const ExperimentConfig cfg = mini_config(dir);
    const PipelineResult r = run_pipeline(cfg, true);
    const DefenseReport again = run_eval_only(cfg, dir / "model_before.json",
                                              dir / "model_after.json", dir / "metrics2.json");
    CHECK(again.ca_before == r.report.ca_before);
    CHECK(again.asr_after == r.report.asr_after);
    std::filesystem::remove_all(dir);
}

TEST_CASE("bounds sweep: single point and dominance flags") {
    BoundsSweepConfig cfg;
    cfg.pr_values = {0.05};
    cfg.p_values = {0.95};
    cfg.trials = 20000;
    cfg.out_csv = std::filesystem::temp_directory_path() / "poisonlab_bounds_test.csv";
    const BoundsReport report = run_bounds(cfg, true);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].dominated);
    CHECK(report.all_dominated);

    std::ifstream in(cfg.out_csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "pr,N,gamma,alpha_p_or_pt,bound,mc_estimate,mc_stderr");
    std::string row;
    std::getline(in, row);
    CHECK_FALSE(row.empty());
    std::filesystem::remove(cfg.out_csv);
}

TEST_CASE("bounds sweep: vacuous rows clamp to one and pass") {
    BoundsSweepConfig cfg;
    cfg.pr_values = {0.05};
    cfg.p_values = {0.5};  // alpha_p = 0.5 > gamma = 0.2 -> vacuous
    cfg.trials = 5000;
    const BoundsReport report = run_bounds(cfg, false);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].bound == 1.0);
    CHECK(report.rows[0].dominated);
}

TEST_CASE("suite: single scenario aggregates to itself") {
    const auto dir = std::filesystem::temp_directory_path() / "poisonlab_suite_test";
    std::filesystem::remove_all(dir);
    SuiteScenario s;
    s.name = "mini";
    s.config = mini_config(dir / "unused");
    const SuiteResult result = run_suite({s}, dir);
    REQUIRE(result.outcomes.size() == 1);
    CHECK(result.all_ok);

    std::ifstream in(dir / "aggregate.csv");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);  // header, scenario, category, Average
    CHECK(lines[0] == "name,category,status,ca_before,asr_before,ca_after,asr_after");
    CHECK(lines[1].rfind("mini,label_poison,ok,", 0) == 0);
    CHECK(lines[2].rfind("category_label_poison,", 0) == 0);
    CHECK(lines[3].rfind("Average,", 0) == 0);

    // the average of one scenario is that scenario
    std::stringstream a(lines[1]), b(lines[3]);
    std::vector<std::string> fa, fb;
    while (std::getline(a, line, ',')) fa.push_back(line);
    while (std::getline(b, line, ',')) fb.push_back(line);
    CHECK(fa[3] == fb[3]);
    CHECK(fa[6] == fb[6]);
    std::filesystem::remove_all(dir);
}

TEST_CASE("suite: failures are recorded and the run continues") {
    const auto dir = std::filesystem::temp_directory_path() / "poisonlab_suite_fail";
    std::filesystem::remove_all(dir);
    SuiteScenario good;
    good.name = "good";
    good.config = mini_config(dir / "unused");
    SuiteScenario bad = good;
    bad.name = "bad";
    bad.config.attack.poison_rate = 0.0001;  // floor(pr*N) == 0 -> attack stage error

    const SuiteResult result = run_suite({bad, good}, dir);
    REQUIRE(result.outcomes.size() == 2);
    CHECK_FALSE(result.all_ok);
    CHECK_FALSE(result.outcomes[0].ok);
    CHECK(result.outcomes[1].ok);
    std::filesystem::remove_all(dir);
}
