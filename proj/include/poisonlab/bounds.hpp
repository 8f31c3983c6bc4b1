#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "poisonlab/dataset.hpp"
#include "poisonlab/split.hpp"

namespace poisonlab {

// Inputs to the detection-probability calculators. gamma is the fraction of
// poisons allowed to escape the flagged set; alpha_p is the detector's miss
// rate (label-poison case); p_t is the trigger confidence (clean-label case).
struct BoundParams {
    double pr = 0.05;
    long long n = 1000;
    double gamma = 0.2;
    double alpha_p = 0.0;
    double p_t = 1.0;
    double epsilon_cal = 0.0;  // calibration-error bound
    double eta = 0.05;         // confidence parameter for the deviation term
    double delta_c = 1.0;      // explicit constant inside the big-O deviation
};

/// c * sqrt(ln(1/eta) / N).
double delta_term(double eta, long long n, double c);

/// Failure probability exp(-pr*N*(gamma-alpha_p)^2 / (2*(1-alpha_p))),
/// clamped to [0,1]; vacuous (1) when gamma <= alpha_p.
double label_poison_bound(const BoundParams& p);

/// Same bound with alpha_p replaced by epsilon_cal + delta and the
/// denominator using (1 - epsilon_cal).
double label_poison_bound_calibrated(const BoundParams& p);

/// exp(-pr*N*(gamma-(1-p_t))^2 / (2*p_t)), vacuous (1) when gamma <= 1-p_t.
double clean_label_bound(const BoundParams& p);

/// p_c from (1-pr)*p_c + pr*p_p = pr, clamped to [0,1].
double threshold_identity_pc(double pr, double p_p);

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Simulates T ~ Binomial(floor(pr*N), p_p) and returns the empirical
/// frequency of {T <= (1-gamma)*pr*N} with its binomial standard error.
McEstimate mc_tail_estimate(double pr, long long n, double p_p, double gamma,
                            long long trials, std::uint64_t seed);

enum class DetectionAxis {
    GuideTop,      // top floor(pr*N) by s_clip, counting LabelPoison tags
    VictimBottom,  // bottom floor(pr*N) by s_model, counting CleanLabelPoison tags
};

/// Fraction of the flagged top/bottom-k records whose tag matches the axis.
double empirical_detection_rate(std::span<const EntropyRecord> records,
                                std::span<const PoisonTag> tags, double pr,
                                DetectionAxis axis);

}  // namespace poisonlab
