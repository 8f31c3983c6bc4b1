#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "poisonlab/classifier.hpp"
#include "poisonlab/guide.hpp"
#include "poisonlab/split.hpp"

namespace poisonlab {

struct UnlearnConfig {
    double lambda_un = 0.025;
    double lambda_distill = 0.0005;
    double epsilon = 1e-8;
    int max_epochs = 20;
    // Clean-accuracy floor for early stopping. Unset means "starting accuracy
    // on the holdout minus 0.03", measured when the run begins.
    std::optional<double> ca_floor;
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    int batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const;
};

struct UnlearnEpoch {
    int epoch = 0;
    double loss_re = 0.0;
    double loss_un = 0.0;
    double loss_distill = 0.0;
    double loss_total = 0.0;
    double monitor_ca = 0.0;
};

struct UnlearnResult {
    Classifier model;
    std::vector<UnlearnEpoch> history;
    double tau = 0.0;           // the floor actually used
    bool early_stopped = false;
    bool dp_empty = false;      // run degraded to relearn-only
};

/// Mean cross-entropy over the batch against observed labels.
double loss_re(const Classifier& model, const Dataset& data, std::span<const int> batch);

/// Mean of log(p_label + epsilon); minimizing it (positive weight in the
/// total) suppresses the observed label on triggered samples.
double loss_un(const Classifier& model, const Dataset& data, std::span<const int> batch,
               double epsilon);

/// Mean KL(guide || model) over the batch, using precomputed guide rows
/// indexed by dataset position.
double loss_distill(const Classifier& model, const Dataset& data, std::span<const int> batch,
                    const std::vector<std::vector<double>>& guide_probs);

/// loss_re(clean) + lambda_un * loss_un(trig) + lambda_distill * loss_distill(trig).
/// An empty triggered batch reduces the value to loss_re alone.
double total_loss(const Classifier& model, const Dataset& data,
                  std::span<const int> clean_batch, std::span<const int> trig_batch,
                  const std::vector<std::vector<double>>& guide_probs,
                  const UnlearnConfig& cfg);

/// Guided fine-tune: paired mini-batches from the oversampled clean subset
/// and the triggered subset, SGD on the total loss, early stop when the
/// holdout accuracy drops below the floor (the pre-violation parameters are
/// returned). guide_trigger_present marks samples carrying the guide's own
/// trigger, as during map building.
UnlearnResult run_unlearning(const Classifier& victim, const SplitResult& split,
                             const Dataset& data, const GuideModel& guide,
                             const std::vector<bool>& guide_trigger_present,
                             const UnlearnConfig& cfg);

void save_unlearn_history(std::span<const UnlearnEpoch> history,
                          const std::filesystem::path& path);

}  // namespace poisonlab
