#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "poisonlab/dataset.hpp"
#include "poisonlab/rng.hpp"

namespace poisonlab {

// "Weak but clean" zero-shot oracle. Logits are anchored to the ground-truth
// label with a fixed confidence margin; Gumbel noise weakens it in a
// controlled way, and an optional embedded backdoor redirects samples that
// carry the backdoor's trigger.
struct GuideBackdoor {
    TriggerSpec trigger;
    int target = 0;
    double margin = 2.0;

    bool operator==(const GuideBackdoor&) const = default;
};

struct GuideModel {
    int num_classes = 0;
    double confidence_margin = 2.0;
    double gumbel_scale = 0.0;
    std::optional<GuideBackdoor> backdoor;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Gumbel(0, scale) draw: -scale * ln(-ln U); exactly 0 at scale 0.
double sample_gumbel(Rng& rng, double scale);

/// Logit vector for one sample. Noise is derived from (guide.seed,
/// sample_index) so maps are reproducible. trigger_present says whether the
/// guide's own trigger is on this sample's features; the caller knows.
std::vector<double> guide_logits(const GuideModel& guide, const Sample& sample,
                                 int sample_index, bool trigger_present);

/// Zero-shot accuracy against ground truth, no triggers presented.
double measure_guide_accuracy(const GuideModel& guide, const Dataset& data);

/// Expected calibration error over equal-width confidence bins.
double measure_ece(const GuideModel& guide, const Dataset& data, int num_bins);

}  // namespace poisonlab
