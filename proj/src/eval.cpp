#include "poisonlab/eval.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "poisonlab/kernels.hpp"
#include "poisonlab/rng.hpp"

namespace poisonlab {

double clean_accuracy(const Classifier& model, const Dataset& test_set) {
    if (test_set.samples.empty()) throw std::invalid_argument("clean_accuracy: empty test set");
    std::size_t hits = 0;
    for (const Sample& s : test_set.samples) {
        if (predict(model, s.features) == s.ground_truth) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test_set.samples.size());
}

double attack_success_rate(const Classifier& model, const Dataset& test_set,
                           const TriggerSpec& trigger, int target) {
    // fixed stream so that a masked trigger still evaluates deterministically
    Rng rng(0x41535231);
    std::size_t hits = 0, total = 0;
    for (const Sample& s : test_set.samples) {
        if (s.ground_truth == target) continue;
        ++total;
        const std::vector<double> triggered = plant_trigger(s.features, trigger, rng);
        if (predict(model, triggered) == target) ++hits;
    }
    if (total == 0) throw std::invalid_argument("attack_success_rate: all samples are the target class");
    return static_cast<double>(hits) / static_cast<double>(total);
}

double clean_image_asr(const Classifier& model, const Dataset& test_set,
                       std::span<const double> flip_direction, double threshold,
                       int target) {
    if (flip_direction.size() != static_cast<std::size_t>(test_set.feature_dim))
        throw std::invalid_argument("clean_image_asr: flip_direction length mismatch");
    std::size_t hits = 0, total = 0;
    for (const Sample& s : test_set.samples) {
        if (s.ground_truth == target) continue;
        const double proj = kernels::dot(s.features.data(), flip_direction.data(),
                                         flip_direction.size());
        if (proj <= threshold) continue;
        ++total;
        if (predict(model, s.features) == target) ++hits;
    }
    if (total == 0) throw std::runtime_error("clean_image_asr: no test samples satisfy the flip rule");
    return static_cast<double>(hits) / static_cast<double>(total);
}

namespace {

double scenario_asr(const Classifier& model, const EvalScenario& scenario) {
    if (scenario.family == AttackFamily::CleanImage) {
        return clean_image_asr(model, *scenario.test_set, scenario.flip_direction,
                               scenario.flip_threshold, scenario.target);
    }
    return attack_success_rate(model, *scenario.test_set, scenario.trigger, scenario.target);
}

}  // namespace

DefenseReport evaluate_defense(const Classifier& before, const Classifier& after,
                               const EvalScenario& scenario) {
    if (!scenario.test_set) throw std::invalid_argument("evaluate_defense: missing test set");
    DefenseReport report;
    report.ca_before = clean_accuracy(before, *scenario.test_set);
    report.asr_before = scenario_asr(before, scenario);
    report.ca_after = clean_accuracy(after, *scenario.test_set);
    report.asr_after = scenario_asr(after, scenario);
    report.ca_drop = report.ca_before - report.ca_after;
    report.asr_drop = report.asr_before - report.asr_after;
    if (scenario.guide_trigger) {
        report.asr_c_before = attack_success_rate(before, *scenario.test_set,
                                                  *scenario.guide_trigger, scenario.guide_target);
        report.asr_c_after = attack_success_rate(after, *scenario.test_set,
                                                 *scenario.guide_trigger, scenario.guide_target);
    }
    return report;
}

void save_metrics(const DefenseReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    char buf[128];
    out << "{\n";
    auto field = [&](const char* name, double value, bool last = false) {
        std::snprintf(buf, sizeof(buf), "  \"%s\": %.6f%s\n", name, value, last ? "" : ",");
        out << buf;
    };
    field("ca_before", report.ca_before);
    field("asr_before", report.asr_before);
    field("ca_after", report.ca_after);
    field("asr_after", report.asr_after, !report.asr_c_after.has_value());
    if (report.asr_c_after) field("asr_c_after", *report.asr_c_after, true);
    out << "}\n";
}

}  // namespace poisonlab
