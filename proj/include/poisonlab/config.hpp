#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "poisonlab/classifier.hpp"
#include "poisonlab/dataset.hpp"
#include "poisonlab/guide.hpp"
#include "poisonlab/split.hpp"
#include "poisonlab/unlearn.hpp"

namespace poisonlab {

struct DatasetConfig {
    int num_classes = 10;
    int feature_dim = 32;
    int n_per_class = 500;
    double cluster_sep = 5.0;
    std::uint64_t seed = 1;
};

struct VictimConfig {
    std::vector<int> hidden_dims = {64, 64};
    TrainConfig train = {0.01, 5e-4, 64, 30, 3};
    int snapshot_epoch = 5;
};

struct EvalConfig {
    int test_size = 5000;
    std::uint64_t seed = 6;
};

// One experiment, fully determined by its seeds. Defaults reproduce the
// standard label-poison scenario.
struct ExperimentConfig {
    DatasetConfig dataset;
    AttackConfig attack;
    VictimConfig victim;
    GuideModel guide;
    SplitConfig split;
    UnlearnConfig unlearn;
    EvalConfig eval;
    std::filesystem::path output_dir = "out";
    bool export_guide_logits = false;

    void validate() const;
};

/// Config with every field at its documented default.
ExperimentConfig default_config();

/// Parses a config JSON; omitted fields keep their defaults.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one dotted-path override, e.g. "attack.poison_rate=0.1". The value
/// is parsed as JSON when possible, else taken as a string.
std::string apply_override(std::string json_text, const std::string& assignment);

/// Re-derives all block seeds from one master seed.
void reseed(ExperimentConfig& cfg, std::uint64_t master_seed);

}  // namespace poisonlab
