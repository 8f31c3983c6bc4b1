#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "poisonlab/classifier.hpp"
#include "poisonlab/dataset.hpp"

namespace poisonlab {

/// Fraction of samples with predict == ground_truth on an attack-free set.
double clean_accuracy(const Classifier& model, const Dataset& test_set);

/// Plants the trigger on every sample with ground_truth != target and
/// returns the fraction classified as the target. Deterministic given
/// (model, test set, trigger).
double attack_success_rate(const Classifier& model, const Dataset& test_set,
                           const TriggerSpec& trigger, int target);

/// Clean-image analog of the attack success rate: among non-target samples
/// whose projection on flip_direction exceeds the threshold learned at poison
/// time, the fraction classified as the target. Features are untouched.
double clean_image_asr(const Classifier& model, const Dataset& test_set,
                       std::span<const double> flip_direction, double threshold,
                       int target);

// Everything the metrics need to compare a model pair: the test set plus the
// attack's success rule, and optionally the guide's own trigger (ASR-C).
struct EvalScenario {
    const Dataset* test_set = nullptr;
    AttackFamily family = AttackFamily::LabelPoison;
    TriggerSpec trigger;  // trigger families only
    int target = 0;
    std::vector<double> flip_direction;  // CleanImage only
    double flip_threshold = 0.0;
    std::optional<TriggerSpec> guide_trigger;
    int guide_target = 0;
};

struct DefenseReport {
    double ca_before = 0.0;
    double asr_before = 0.0;
    double ca_after = 0.0;
    double asr_after = 0.0;
    double ca_drop = 0.0;
    double asr_drop = 0.0;
    std::optional<double> asr_c_before;
    std::optional<double> asr_c_after;
};

DefenseReport evaluate_defense(const Classifier& before, const Classifier& after,
                               const EvalScenario& scenario);

/// Fixed-format metrics file: 6-decimal fixed values, field order as listed.
void save_metrics(const DefenseReport& report, const std::filesystem::path& path);

}  // namespace poisonlab
