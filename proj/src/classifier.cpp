#include "poisonlab/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "poisonlab/kernels.hpp"
#include "poisonlab/objective.hpp"
#include "poisonlab/rng.hpp"

namespace poisonlab {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("train: weight_decay must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
}

Classifier init_classifier(const std::vector<int>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw std::invalid_argument("init_classifier: need at least 2 layer dims");
    for (int d : layer_dims) {
        if (d < 1) throw std::invalid_argument("init_classifier: dims must be positive");
    }
    Classifier model;
    model.layer_dims = layer_dims;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        Layer layer;
        layer.in = layer_dims[l];
        layer.out = layer_dims[l + 1];
        layer.weights.resize(static_cast<std::size_t>(layer.in) * layer.out);
        layer.bias.assign(static_cast<std::size_t>(layer.out), 0.0);
        const double stddev = std::sqrt(2.0 / static_cast<double>(layer.in));
        Rng rng(mix_seed(seed, 3000 + l));
        for (double& w : layer.weights) w = stddev * rng.gaussian();
        model.layers.push_back(std::move(layer));
    }
    return model;
}

std::vector<double> forward(const Classifier& model, std::span<const double> features) {
    if (features.size() != static_cast<std::size_t>(model.input_dim()))
        throw std::invalid_argument("forward: feature length mismatch");
    std::vector<double> cur(features.begin(), features.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        next.resize(static_cast<std::size_t>(layer.out));
        kernels::matvec_bias(layer.weights.data(), cur.data(), layer.bias.data(),
                             next.data(), static_cast<std::size_t>(layer.out),
                             static_cast<std::size_t>(layer.in));
        if (l + 1 < model.layers.size()) {
            for (double& x : next) x = std::max(x, 0.0);
        }
        cur.swap(next);
    }
    return cur;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

int predict(const Classifier& model, std::span<const double> features) {
    const std::vector<double> logits = forward(model, features);
    int best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

TrainResult train(const Classifier& model, const Dataset& data, const TrainConfig& cfg,
                  std::optional<int> snapshot_epoch) {
    cfg.validate();
    data.validate();
    if (data.feature_dim != model.input_dim() || data.num_classes != model.num_classes())
        throw std::invalid_argument("train: dataset dims do not match model");

    TrainResult result;
    result.model = model;
    const LossTerm ce{LossKind::CrossEntropy, 1.0, 0.0};

    std::vector<int> order(data.samples.size());
    std::iota(order.begin(), order.end(), 0);

    if (snapshot_epoch && *snapshot_epoch == 0) result.snapshot = result.model;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 4000 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::span<const int> batch(order.data() + start, stop - start);
            ObjectiveResult r = loss_and_grads(result.model, data, batch, {&ce, 1});
            if (!std::isfinite(r.loss))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            sgd_step(result.model, r.grads, cfg.learning_rate, cfg.weight_decay);
            epoch_loss += r.loss;
            ++batches;
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
        if (snapshot_epoch && epoch + 1 == *snapshot_epoch) result.snapshot = result.model;
    }
    if (snapshot_epoch && !result.snapshot)
        throw std::invalid_argument("train: snapshot epoch beyond training run");
    return result;
}

void save_classifier(const Classifier& model, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["layer_dims"] = model.layer_dims;
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const Layer& layer : model.layers) {
        nlohmann::ordered_json lj;
        lj["weights"] = layer.weights;  // row-major [out x in]
        lj["bias"] = layer.bias;
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Classifier load_classifier(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    nlohmann::json j = nlohmann::json::parse(in);
    Classifier model;
    model.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    if (model.layer_dims.size() < 2) throw std::runtime_error("checkpoint: bad layer_dims");
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != model.layer_dims.size())
        throw std::runtime_error("checkpoint: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Layer layer;
        layer.in = model.layer_dims[l];
        layer.out = model.layer_dims[l + 1];
        layer.weights = layers[l].at("weights").get<std::vector<double>>();
        layer.bias = layers[l].at("bias").get<std::vector<double>>();
        if (layer.weights.size() != static_cast<std::size_t>(layer.in) * layer.out ||
            layer.bias.size() != static_cast<std::size_t>(layer.out))
            throw std::runtime_error("checkpoint: parameter shape mismatch");
        model.layers.push_back(std::move(layer));
    }
    return model;
}

}  // namespace poisonlab
