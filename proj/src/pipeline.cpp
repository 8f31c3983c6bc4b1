#include "poisonlab/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace poisonlab {

namespace {

class RunLog {
public:
    explicit RunLog(const std::filesystem::path& path) : out_(path) {}

    void line(const std::string& msg) {
        if (!out_) return;
        const auto now = std::chrono::system_clock::now();
        const auto t = std::chrono::system_clock::to_time_t(now);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%F %T", std::gmtime(&t));
        out_ << "[" << stamp << "] " << msg << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
};

struct StageGuard {
    const char* stage;
    template <typename F>
    auto run(F&& f) -> decltype(f()) {
        try {
            return f();
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string(stage) + ": " + e.what());
        }
    }
};

std::vector<bool> guide_trigger_flags(const Dataset& data, const ExperimentConfig& cfg) {
    std::vector<bool> flags(data.samples.size(), false);
    if (!cfg.guide.backdoor) return flags;
    if (!(cfg.guide.backdoor->trigger == cfg.attack.trigger)) return flags;
    if (cfg.attack.family == AttackFamily::CleanImage) return flags;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        flags[i] = carries_trigger(data.samples[i].poison_tag);
    }
    return flags;
}

TriggerSpec eval_trigger(TriggerSpec t) {
    // test-time triggers are planted in full; masking is a poison-time device
    t.rand_patch_mask.reset();
    return t;
}

EvalScenario make_scenario(const ExperimentConfig& cfg, const Dataset& test_set,
                           const Dataset& train_clean) {
    EvalScenario scenario;
    scenario.test_set = &test_set;
    scenario.family = cfg.attack.family;
    scenario.target = cfg.attack.target_class;
    if (cfg.attack.family == AttackFamily::CleanImage) {
        scenario.flip_direction = clean_image_direction(cfg.attack, train_clean.feature_dim);
        scenario.flip_threshold = clean_image_flip_threshold(train_clean, cfg.attack);
    } else {
        scenario.trigger = eval_trigger(cfg.attack.trigger);
    }
    if (cfg.guide.backdoor) {
        scenario.guide_trigger = eval_trigger(cfg.guide.backdoor->trigger);
        scenario.guide_target = cfg.guide.backdoor->target;
    }
    return scenario;
}

void export_guide_logit_rows(const Dataset& data, const GuideModel& guide,
                             const std::vector<bool>& flags,
                             const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "index";
    for (int c = 0; c < guide.num_classes; ++c) out << ",z" << c;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const std::vector<double> z =
            guide_logits(guide, data.samples[i], static_cast<int>(i), flags[i]);
        out << i;
        for (double v : z) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            out << buf;
        }
        out << '\n';
    }
}

std::string one_line_summary(const DefenseReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "CA %.4f -> %.4f | ASR %.4f -> %.4f", r.ca_before, r.ca_after,
                  r.asr_before, r.asr_after);
    std::string s(buf);
    if (r.asr_c_after) {
        std::snprintf(buf, sizeof(buf), " | ASR-C %.4f -> %.4f", *r.asr_c_before, *r.asr_c_after);
        s += buf;
    }
    return s;
}

struct PipelineStages {
    Dataset clean;
    Dataset poisoned;
    Classifier model_before;
    Classifier snapshot;
    std::vector<bool> flags;
    std::vector<EntropyRecord> records;
    SplitResult split_result;
    double guide_accuracy = 0.0;
};

PipelineStages run_through_split(const ExperimentConfig& cfg) {
    cfg.validate();
    PipelineStages st;
    st.clean = StageGuard{"dataset"}.run([&] {
        return generate_synthetic(cfg.dataset.num_classes, cfg.dataset.feature_dim,
                                  cfg.dataset.n_per_class, cfg.dataset.cluster_sep,
                                  cfg.dataset.seed);
    });
    st.poisoned = StageGuard{"attack"}.run([&] { return apply_attack(st.clean, cfg.attack); });

    std::vector<int> dims;
    dims.push_back(cfg.dataset.feature_dim);
    for (int h : cfg.victim.hidden_dims) dims.push_back(h);
    dims.push_back(cfg.dataset.num_classes);

    TrainResult trained = StageGuard{"victim-train"}.run([&] {
        Classifier init = init_classifier(dims, cfg.victim.train.seed);
        return train(init, st.poisoned, cfg.victim.train, cfg.victim.snapshot_epoch);
    });
    st.model_before = std::move(trained.model);
    st.snapshot = std::move(*trained.snapshot);

    st.flags = guide_trigger_flags(st.poisoned, cfg);
    st.guide_accuracy = measure_guide_accuracy(cfg.guide, st.poisoned);
    st.records = StageGuard{"entropy-map"}.run(
        [&] { return build_entropy_map(st.poisoned, cfg.guide, st.snapshot, st.flags); });
    st.split_result = StageGuard{"split"}.run([&] { return split(st.records, cfg.split); });
    return st;
}

}  // namespace

PipelineResult run_split_only(const ExperimentConfig& cfg, bool write_artifacts) {
    PipelineStages st = run_through_split(cfg);
    PipelineResult result;
    if (write_artifacts) {
        std::filesystem::create_directories(cfg.output_dir);
        RunLog log(cfg.output_dir / "run.log");
        log.line("split-only run");
        save_dataset(st.poisoned, cfg.output_dir / "dataset.json");
        export_entropy_map(st.records, st.poisoned, st.split_result,
                           cfg.output_dir / "entropy_map.csv");
        save_split_summary(st.split_result, summarize_split(st.records, st.poisoned, st.split_result),
                           cfg.output_dir / "split.json");
        if (cfg.export_guide_logits)
            export_guide_logit_rows(st.poisoned, cfg.guide, st.flags,
                                    cfg.output_dir / "guide_logits.csv");
        log.line("done");
    }
    result.poisoned = std::move(st.poisoned);
    result.model_before = std::move(st.model_before);
    result.snapshot = std::move(st.snapshot);
    result.records = std::move(st.records);
    result.split = std::move(st.split_result);
    result.guide_accuracy = st.guide_accuracy;
    result.summary = "split-only";
    return result;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, bool write_artifacts) {
    PipelineStages st = run_through_split(cfg);

    UnlearnResult unlearned = StageGuard{"unlearn"}.run([&] {
        return run_unlearning(st.model_before, st.split_result, st.poisoned, cfg.guide,
                              st.flags, cfg.unlearn);
    });

    const int test_per_class =
        std::max(10, cfg.eval.test_size / cfg.dataset.num_classes);
    Dataset test_set = StageGuard{"eval"}.run([&] {
        return generate_synthetic_split(cfg.dataset.num_classes, cfg.dataset.feature_dim,
                                        test_per_class, cfg.dataset.cluster_sep,
                                        cfg.dataset.seed, cfg.eval.seed);
    });
    EvalScenario scenario = make_scenario(cfg, test_set, st.clean);
    DefenseReport report = StageGuard{"eval"}.run(
        [&] { return evaluate_defense(st.model_before, unlearned.model, scenario); });

    PipelineResult result;
    result.report = report;
    result.summary = one_line_summary(report);

    if (write_artifacts) {
        std::filesystem::create_directories(cfg.output_dir);
        RunLog log(cfg.output_dir / "run.log");
        log.line("pipeline start");
        log.line("guide accuracy " + std::to_string(st.guide_accuracy));
        save_dataset(st.poisoned, cfg.output_dir / "dataset.json");
        export_entropy_map(st.records, st.poisoned, st.split_result,
                           cfg.output_dir / "entropy_map.csv");
        save_split_summary(st.split_result, summarize_split(st.records, st.poisoned, st.split_result),
                           cfg.output_dir / "split.json");
        save_unlearn_history(unlearned.history, cfg.output_dir / "unlearn_history.csv");
        save_classifier(st.model_before, cfg.output_dir / "model_before.json");
        save_classifier(unlearned.model, cfg.output_dir / "model_after.json");
        save_metrics(report, cfg.output_dir / "metrics.json");
        if (cfg.export_guide_logits)
            export_guide_logit_rows(st.poisoned, cfg.guide, st.flags,
                                    cfg.output_dir / "guide_logits.csv");
        if (unlearned.dp_empty) log.line("notice: D_p empty; fine-tuned on D_c only");
        if (unlearned.early_stopped) log.line("early stop: holdout accuracy fell below floor");
        log.line("summary: " + result.summary);
    }

    result.poisoned = std::move(st.poisoned);
    result.model_before = std::move(st.model_before);
    result.snapshot = std::move(st.snapshot);
    result.records = std::move(st.records);
    result.split = std::move(st.split_result);
    result.unlearn = std::move(unlearned);
    result.guide_accuracy = st.guide_accuracy;
    return result;
}

DefenseReport run_eval_only(const ExperimentConfig& cfg,
                            const std::filesystem::path& model_before_path,
                            const std::filesystem::path& model_after_path,
                            const std::filesystem::path& metrics_out) {
    cfg.validate();
    const Classifier before = load_classifier(model_before_path);
    const Classifier after = load_classifier(model_after_path);
    const int test_per_class = std::max(10, cfg.eval.test_size / cfg.dataset.num_classes);
    Dataset test_set = generate_synthetic_split(cfg.dataset.num_classes, cfg.dataset.feature_dim,
                                                test_per_class, cfg.dataset.cluster_sep,
                                                cfg.dataset.seed, cfg.eval.seed);
    Dataset train_clean = generate_synthetic(cfg.dataset.num_classes, cfg.dataset.feature_dim,
                                             cfg.dataset.n_per_class, cfg.dataset.cluster_sep,
                                             cfg.dataset.seed);
    EvalScenario scenario = make_scenario(cfg, test_set, train_clean);
    DefenseReport report = evaluate_defense(before, after, scenario);
    save_metrics(report, metrics_out);
    return report;
}

BoundsReport run_bounds(const BoundsSweepConfig& cfg, bool write_csv) {
    BoundsReport report;
    for (double pr : cfg.pr_values) {
        for (double p : cfg.p_values) {
            BoundsRow row{};
            row.pr = pr;
            row.n = cfg.n;
            row.gamma = cfg.gamma;
            BoundParams params;
            params.pr = pr;
            params.n = cfg.n;
            params.gamma = cfg.gamma;
            if (cfg.clean_label) {
                params.p_t = p;
                row.alpha_p_or_pt = p;
                row.bound = clean_label_bound(params);
            } else {
                params.alpha_p = 1.0 - p;
                row.alpha_p_or_pt = params.alpha_p;
                row.bound = label_poison_bound(params);
            }
            const McEstimate mc = mc_tail_estimate(
                pr, cfg.n, p, cfg.gamma, cfg.trials,
                mix_seed(cfg.seed, static_cast<std::uint64_t>(report.rows.size())));
            row.mc_estimate = mc.estimate;
            row.mc_stderr = mc.std_error;
            row.dominated = mc.estimate <= row.bound + 3.0 * mc.std_error;
            report.all_dominated = report.all_dominated && row.dominated;
            report.rows.push_back(row);
        }
    }
    if (write_csv) {
        std::ofstream out(cfg.out_csv);
        if (!out) throw std::runtime_error("cannot write " + cfg.out_csv.string());
        out << "pr,N,gamma,alpha_p_or_pt,bound,mc_estimate,mc_stderr\n";
        char buf[256];
        for (const BoundsRow& row : report.rows) {
            std::snprintf(buf, sizeof(buf), "%.17g,%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          row.pr, row.n, row.gamma, row.alpha_p_or_pt, row.bound,
                          row.mc_estimate, row.mc_stderr);
            out << buf;
        }
    }
    return report;
}

std::vector<SuiteScenario> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read manifest " + path.string());
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<SuiteScenario> scenarios;
    for (const auto& entry : j.at("scenarios")) {
        SuiteScenario s;
        s.name = entry.at("name").get<std::string>();
        if (entry.contains("config_path")) {
            std::filesystem::path p = entry.at("config_path").get<std::string>();
            if (p.is_relative()) p = path.parent_path() / p;
            s.config = load_config(p);
        } else {
            s.config = parse_config(entry.at("config").dump());
        }
        scenarios.push_back(std::move(s));
    }
    if (scenarios.empty()) throw std::runtime_error("manifest lists no scenarios");
    return scenarios;
}

SuiteResult run_suite(const std::vector<SuiteScenario>& scenarios,
                      const std::filesystem::path& out_dir) {
    SuiteResult result;
    std::filesystem::create_directories(out_dir);
    for (const SuiteScenario& scenario : scenarios) {
        SuiteOutcome outcome;
        outcome.name = scenario.name;
        outcome.family = to_string(scenario.config.attack.family);
        try {
            ExperimentConfig cfg = scenario.config;
            cfg.output_dir = out_dir / scenario.name;
            PipelineResult r = run_pipeline(cfg, true);
            outcome.report = r.report;
            outcome.ok = true;
        } catch (const std::exception& e) {
            outcome.ok = false;
            outcome.error = e.what();
            result.all_ok = false;
        }
        result.outcomes.push_back(std::move(outcome));
    }

    std::ofstream out(out_dir / "aggregate.csv");
    if (!out) throw std::runtime_error("cannot write aggregate.csv");
    out << "name,category,status,ca_before,asr_before,ca_after,asr_after\n";
    char buf[320];
    auto metric_row = [&](const std::string& name, const std::string& category,
                          const std::string& status, const DefenseReport& r) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.6f,%.6f,%.6f,%.6f\n", name.c_str(),
                      category.c_str(), status.c_str(), r.ca_before, r.asr_before,
                      r.ca_after, r.asr_after);
        out << buf;
    };

    std::map<std::string, std::vector<const DefenseReport*>> by_family;
    std::vector<const DefenseReport*> all;
    for (const SuiteOutcome& o : result.outcomes) {
        if (!o.ok) {
            out << o.name << "," << o.family << ",error," << ",,,\n";
            continue;
        }
        metric_row(o.name, o.family, "ok", o.report);
        by_family[o.family].push_back(&o.report);
        all.push_back(&o.report);
    }
    auto mean_report = [](const std::vector<const DefenseReport*>& rs) {
        DefenseReport m;
        for (const DefenseReport* r : rs) {
            m.ca_before += r->ca_before;
            m.asr_before += r->asr_before;
            m.ca_after += r->ca_after;
            m.asr_after += r->asr_after;
        }
        const double n = static_cast<double>(rs.size());
        m.ca_before /= n;
        m.asr_before /= n;
        m.ca_after /= n;
        m.asr_after /= n;
        return m;
    };
    for (const auto& [family, rs] : by_family) {
        metric_row("category_" + family, family, "aggregate", mean_report(rs));
    }
    if (!all.empty()) metric_row("Average", "", "aggregate", mean_report(all));
    return result;
}

}  // namespace poisonlab
