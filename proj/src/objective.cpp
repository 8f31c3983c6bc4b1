#include "poisonlab/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "poisonlab/kernels.hpp"

namespace poisonlab {

namespace {

constexpr double kQFloor = 1e-12;  // floor inside the KL log

struct Workspace {
    std::vector<std::vector<double>> acts;  // acts[0] = input copy, acts[L] = logits
    std::vector<double> probs;
    std::vector<std::vector<double>> delta;

    void resize(const Classifier& model) {
        const std::size_t n_layers = model.layers.size();
        acts.resize(n_layers + 1);
        delta.resize(n_layers + 1);
        for (std::size_t l = 0; l <= n_layers; ++l) {
            acts[l].resize(static_cast<std::size_t>(model.layer_dims[l]));
            delta[l].resize(static_cast<std::size_t>(model.layer_dims[l]));
        }
        probs.resize(static_cast<std::size_t>(model.num_classes()));
    }
};

void forward_cached(const Classifier& model, const Sample& sample, Workspace& ws) {
    ws.acts[0].assign(sample.features.begin(), sample.features.end());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        kernels::matvec_bias(layer.weights.data(), ws.acts[l].data(), layer.bias.data(),
                             ws.acts[l + 1].data(), static_cast<std::size_t>(layer.out),
                             static_cast<std::size_t>(layer.in));
        if (l + 1 < model.layers.size()) {
            for (double& x : ws.acts[l + 1]) x = std::max(x, 0.0);
        }
    }
}

void stable_softmax(const std::vector<double>& logits, std::vector<double>& probs) {
    double m = logits[0];
    for (double x : logits) m = std::max(m, x);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - m);
        sum += probs[i];
    }
    for (double& x : probs) x /= sum;
}

}  // namespace

Gradients Gradients::zeros_like(const Classifier& model) {
    Gradients g;
    for (const Layer& layer : model.layers) {
        Layer zero;
        zero.in = layer.in;
        zero.out = layer.out;
        zero.weights.assign(layer.weights.size(), 0.0);
        zero.bias.assign(layer.bias.size(), 0.0);
        g.layers.push_back(std::move(zero));
    }
    return g;
}

void Gradients::add_scaled(const Gradients& other, double factor) {
    if (layers.size() != other.layers.size()) throw std::invalid_argument("gradient shape mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        kernels::axpy(factor, other.layers[l].weights.data(), layers[l].weights.data(),
                      layers[l].weights.size());
        kernels::axpy(factor, other.layers[l].bias.data(), layers[l].bias.data(),
                      layers[l].bias.size());
    }
}

namespace {

double run_objective(const Classifier& model, const Dataset& data,
                     std::span<const int> indices, std::span<const LossTerm> terms,
                     const std::vector<std::vector<double>>* targets,
                     Gradients* grads_out) {
    if (indices.empty()) throw std::invalid_argument("objective: empty batch");
    if (terms.empty()) throw std::invalid_argument("objective: no loss terms");
    const int num_classes = model.num_classes();
    for (const LossTerm& t : terms) {
        if (t.kind != LossKind::CrossEntropy && t.kind != LossKind::LabelLogLikelihood &&
            t.kind != LossKind::KlFromTarget)
            throw std::invalid_argument("objective: unknown loss term");
        if (t.kind == LossKind::KlFromTarget && targets == nullptr)
            throw std::invalid_argument("objective: KL term requires target distributions");
    }

    Workspace ws;
    ws.resize(model);
    const std::size_t n_layers = model.layers.size();
    const double inv_batch = 1.0 / static_cast<double>(indices.size());

    double total = 0.0;
    std::vector<double>& out_delta = ws.delta[n_layers];

    for (int idx : indices) {
        const Sample& sample = data.samples.at(static_cast<std::size_t>(idx));
        if (sample.observed_label < 0 || sample.observed_label >= num_classes)
            throw std::invalid_argument("objective: label out of range");
        forward_cached(model, sample, ws);
        stable_softmax(ws.acts[n_layers], ws.probs);
        const std::size_t label = static_cast<std::size_t>(sample.observed_label);

        std::fill(out_delta.begin(), out_delta.end(), 0.0);
        for (const LossTerm& term : terms) {
            switch (term.kind) {
                case LossKind::CrossEntropy: {
                    // value -log p_y; d/dz = p - onehot
                    const double m = *std::max_element(ws.acts[n_layers].begin(), ws.acts[n_layers].end());
                    double lse = 0.0;
                    for (double z : ws.acts[n_layers]) lse += std::exp(z - m);
                    const double log_p = ws.acts[n_layers][label] - m - std::log(lse);
                    total += term.weight * inv_batch * (-log_p);
                    if (grads_out) {
                        const double f = term.weight * inv_batch;
                        for (int j = 0; j < num_classes; ++j)
                            out_delta[static_cast<std::size_t>(j)] += f * ws.probs[static_cast<std::size_t>(j)];
                        out_delta[label] -= f;
                    }
                    break;
                }
                case LossKind::LabelLogLikelihood: {
                    const double p_y = ws.probs[label];
                    total += term.weight * inv_batch * std::log(p_y + term.epsilon);
                    if (grads_out) {
                        // d log(p_y + eps)/dz_j = p_y (1[j==y] - p_j) / (p_y + eps)
                        const double f = term.weight * inv_batch * p_y / (p_y + term.epsilon);
                        for (int j = 0; j < num_classes; ++j)
                            out_delta[static_cast<std::size_t>(j)] -= f * ws.probs[static_cast<std::size_t>(j)];
                        out_delta[label] += f;
                    }
                    break;
                }
                case LossKind::KlFromTarget: {
                    const std::vector<double>& p = targets->at(static_cast<std::size_t>(idx));
                    if (p.size() != static_cast<std::size_t>(num_classes))
                        throw std::invalid_argument("objective: target row has wrong length");
                    double kl = 0.0;
                    double active_mass = 0.0;  // target mass on un-floored outputs
                    for (int j = 0; j < num_classes; ++j) {
                        const double pj = p[static_cast<std::size_t>(j)];
                        const double qj = ws.probs[static_cast<std::size_t>(j)];
                        if (pj > 0.0) kl += pj * (std::log(pj) - std::log(std::max(qj, kQFloor)));
                        if (qj >= kQFloor) active_mass += pj;
                    }
                    total += term.weight * inv_batch * kl;
                    if (grads_out) {
                        // exact gradient of the floored value; Q - P when no floor is active
                        const double f = term.weight * inv_batch;
                        for (int j = 0; j < num_classes; ++j) {
                            const double pj = p[static_cast<std::size_t>(j)];
                            const double qj = ws.probs[static_cast<std::size_t>(j)];
                            out_delta[static_cast<std::size_t>(j)] +=
                                f * (qj * active_mass - (qj >= kQFloor ? pj : 0.0));
                        }
                    }
                    break;
                }
            }
        }

        if (!grads_out) continue;

        for (std::size_t l = n_layers; l-- > 0;) {
            const Layer& layer = model.layers[l];
            Layer& g = grads_out->layers[l];
            const std::vector<double>& delta = ws.delta[l + 1];
            kernels::outer_accumulate(g.weights.data(), 1.0, delta.data(), ws.acts[l].data(),
                                      static_cast<std::size_t>(layer.out),
                                      static_cast<std::size_t>(layer.in));
            kernels::axpy(1.0, delta.data(), g.bias.data(), g.bias.size());
            if (l > 0) {
                kernels::matvec_transpose(layer.weights.data(), delta.data(), ws.delta[l].data(),
                                          static_cast<std::size_t>(layer.out),
                                          static_cast<std::size_t>(layer.in));
                // ReLU mask: activation zero means the unit was clamped
                for (std::size_t j = 0; j < ws.delta[l].size(); ++j) {
                    if (ws.acts[l][j] <= 0.0) ws.delta[l][j] = 0.0;
                }
            }
        }
    }
    return total;
}

}  // namespace

ObjectiveResult loss_and_grads(const Classifier& model, const Dataset& data,
                               std::span<const int> indices,
                               std::span<const LossTerm> terms,
                               const std::vector<std::vector<double>>* targets) {
    ObjectiveResult result;
    result.grads = Gradients::zeros_like(model);
    result.loss = run_objective(model, data, indices, terms, targets, &result.grads);
    return result;
}

double loss_value(const Classifier& model, const Dataset& data,
                  std::span<const int> indices, std::span<const LossTerm> terms,
                  const std::vector<std::vector<double>>* targets) {
    return run_objective(model, data, indices, terms, targets, nullptr);
}

void sgd_step(Classifier& model, const Gradients& grads, double learning_rate,
              double weight_decay) {
    const double shrink = 1.0 - learning_rate * weight_decay;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        Layer& layer = model.layers[l];
        const Layer& g = grads.layers[l];
        if (weight_decay > 0.0) {
            kernels::scale(layer.weights.data(), shrink, layer.weights.size());
            kernels::scale(layer.bias.data(), shrink, layer.bias.size());
        }
        kernels::axpy(-learning_rate, g.weights.data(), layer.weights.data(), layer.weights.size());
        kernels::axpy(-learning_rate, g.bias.data(), layer.bias.data(), layer.bias.size());
    }
}

}  // namespace poisonlab
