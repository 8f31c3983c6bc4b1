#pragma once

#include <span>
#include <vector>

#include "poisonlab/classifier.hpp"
#include "poisonlab/dataset.hpp"

namespace poisonlab {

// Composite-objective backprop engine shared by victim training and the
// unlearning fine-tune. Every term is a batch mean, so weights stay
// meaningful across batch sizes.
enum class LossKind {
    CrossEntropy,        // -log p(label), minimized to fit the label
    LabelLogLikelihood,  // +log(p(label) + eps); a positive weight suppresses the label
    KlFromTarget,        // KL(target || softmax(logits)) against per-sample target rows
};

struct LossTerm {
    LossKind kind = LossKind::CrossEntropy;
    double weight = 1.0;
    double epsilon = 0.0;  // LabelLogLikelihood guard
};

struct Gradients {
    std::vector<Layer> layers;

    static Gradients zeros_like(const Classifier& model);
    void add_scaled(const Gradients& other, double factor);
};

struct ObjectiveResult {
    double loss = 0.0;
    Gradients grads;
};

/// Loss and analytic gradients of the weighted term sum over one batch.
/// `targets`, indexed by dataset position, is required iff a KlFromTarget
/// term is present (rows are probability vectors, e.g. softmaxed guide logits).
ObjectiveResult loss_and_grads(const Classifier& model, const Dataset& data,
                               std::span<const int> indices,
                               std::span<const LossTerm> terms,
                               const std::vector<std::vector<double>>* targets = nullptr);

/// Loss value only (same semantics, no gradient work).
double loss_value(const Classifier& model, const Dataset& data,
                  std::span<const int> indices, std::span<const LossTerm> terms,
                  const std::vector<std::vector<double>>* targets = nullptr);

/// In-place SGD step with decoupled weight decay applied before the step.
void sgd_step(Classifier& model, const Gradients& grads, double learning_rate,
              double weight_decay);

}  // namespace poisonlab
