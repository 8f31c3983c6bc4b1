#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisonlab/rng.hpp"

namespace poisonlab {

enum class PoisonTag { Clean, LabelPoison, CleanLabelPoison, CleanImagePoison };

std::string to_string(PoisonTag tag);
PoisonTag poison_tag_from_string(const std::string& s);

/// True for tags whose features carry a planted trigger.
inline bool carries_trigger(PoisonTag tag) {
    return tag == PoisonTag::LabelPoison || tag == PoisonTag::CleanLabelPoison;
}

struct Sample {
    std::vector<double> features;
    int observed_label = 0;
    int ground_truth = 0;
    PoisonTag poison_tag = PoisonTag::Clean;
};

struct Dataset {
    std::vector<Sample> samples;
    int num_classes = 0;
    int feature_dim = 0;

    std::size_t size() const { return samples.size(); }
    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

enum class TriggerKind { Patch, Blend, Sinusoid };

std::string to_string(TriggerKind kind);
TriggerKind trigger_kind_from_string(const std::string& s);

struct TriggerSpec {
    TriggerKind kind = TriggerKind::Patch;
    // Patch
    std::vector<int> patch_coords;
    std::vector<double> patch_values;
    // Blend
    std::vector<double> pattern;
    double alpha = 1.0;
    // Sinusoid
    double amplitude = 0.0;
    double frequency = 1.0;
    // Modifiers: blocks of the trigger independently dropped, and opacity blending
    std::optional<double> rand_patch_mask;
    double opacity = 1.0;

    bool operator==(const TriggerSpec&) const = default;

    void validate(int feature_dim) const;
};

enum class AttackFamily { LabelPoison, CleanLabel, CleanImage };

std::string to_string(AttackFamily family);
AttackFamily attack_family_from_string(const std::string& s);

struct AttackConfig {
    AttackFamily family = AttackFamily::LabelPoison;
    int target_class = 0;
    double poison_rate = 0.05;
    TriggerSpec trigger;  // unused for CleanImage
    // CleanImage flip rule: labels of high-projection samples flip to the target
    std::vector<double> flip_direction;
    double flip_quantile = 0.95;
    std::uint64_t seed = 0;

    void validate(int num_classes, int feature_dim) const;
};

/// Gaussian clusters with unit variance around cluster_sep * mu_c, where each
/// mu_c is a seed-derived unit vector. Samples are ordered class-major.
Dataset generate_synthetic(int num_classes, int feature_dim, int n_per_class,
                           double cluster_sep, std::uint64_t seed);

/// Same generator with the cluster geometry and the noise seeded separately,
/// so fresh i.i.d. test sets can share a training set's class centers.
Dataset generate_synthetic_split(int num_classes, int feature_dim, int n_per_class,
                                 double cluster_sep, std::uint64_t class_seed,
                                 std::uint64_t noise_seed);

/// Returns a fresh triggered copy of the features; the input is untouched.
std::vector<double> plant_trigger(std::span<const double> features,
                                  const TriggerSpec& spec, Rng& rng);

/// Applies the configured backdoor family; all unselected samples stay
/// bitwise unchanged. Throws when the eligible pool is too small or the
/// requested poison count is zero.
Dataset apply_attack(const Dataset& clean, const AttackConfig& cfg);

/// Projection threshold defining the CleanImage flip rule. Computed from the
/// eligible (ground_truth != target) samples; apply_attack uses the same rule,
/// so the threshold is reproducible from a clean dataset after the fact.
double clean_image_flip_threshold(const Dataset& data, const AttackConfig& cfg);

/// The flip direction actually used: cfg.flip_direction, or the seed-derived
/// unit vector when the config leaves it empty.
std::vector<double> clean_image_direction(const AttackConfig& cfg, int feature_dim);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace poisonlab
