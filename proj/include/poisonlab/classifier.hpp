#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "poisonlab/dataset.hpp"

namespace poisonlab {

/// One dense layer, weights row-major [out x in].
struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    bool operator==(const Layer&) const = default;
};

// Small MLP with ReLU hidden activations and identity output. All math in
// doubles so gradient checks can run at tight tolerances.
struct Classifier {
    std::vector<int> layer_dims;
    std::vector<Layer> layers;

    int input_dim() const { return layer_dims.front(); }
    int num_classes() const { return layer_dims.back(); }
    bool operator==(const Classifier&) const = default;
};

struct TrainConfig {
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    int batch_size = 64;
    int epochs = 30;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    Classifier model;
    std::optional<Classifier> snapshot;  // parameters right after snapshot_epoch
    std::vector<double> epoch_losses;    // mean cross-entropy per epoch
};

/// He-initialized weights (stddev sqrt(2/fan_in)), zero biases.
Classifier init_classifier(const std::vector<int>& layer_dims, std::uint64_t seed);

std::vector<double> forward(const Classifier& model, std::span<const double> features);

/// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);

/// argmax of the logits; ties broken toward the lowest index.
int predict(const Classifier& model, std::span<const double> features);

/// Mini-batch SGD on mean cross-entropy over observed labels, with decoupled
/// weight decay (w *= 1 - lr*wd before each gradient step). Shuffling is
/// reseeded per epoch from cfg.seed. snapshot_epoch, when set, captures the
/// parameters right after that many epochs.
TrainResult train(const Classifier& model, const Dataset& data, const TrainConfig& cfg,
                  std::optional<int> snapshot_epoch = std::nullopt);

void save_classifier(const Classifier& model, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace poisonlab
