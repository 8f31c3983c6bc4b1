#include "poisonlab/unlearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "poisonlab/objective.hpp"

namespace poisonlab {

void UnlearnConfig::validate() const {
    if (lambda_un < 0.0 || lambda_distill < 0.0)
        throw std::invalid_argument("unlearn: lambda weights must be >= 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("unlearn: epsilon must be positive");
    if (max_epochs < 1) throw std::invalid_argument("unlearn: max_epochs must be >= 1");
    if (ca_floor && !(*ca_floor > 0.0 && *ca_floor <= 1.0))
        throw std::invalid_argument("unlearn: ca_floor must be in (0,1]");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("unlearn: learning_rate must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("unlearn: weight_decay must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("unlearn: batch_size must be >= 1");
}

double loss_re(const Classifier& model, const Dataset& data, std::span<const int> batch) {
    const LossTerm term{LossKind::CrossEntropy, 1.0, 0.0};
    return loss_value(model, data, batch, {&term, 1});
}

double loss_un(const Classifier& model, const Dataset& data, std::span<const int> batch,
               double epsilon) {
    const LossTerm term{LossKind::LabelLogLikelihood, 1.0, epsilon};
    return loss_value(model, data, batch, {&term, 1});
}

double loss_distill(const Classifier& model, const Dataset& data, std::span<const int> batch,
                    const std::vector<std::vector<double>>& guide_probs) {
    const LossTerm term{LossKind::KlFromTarget, 1.0, 0.0};
    return loss_value(model, data, batch, {&term, 1}, &guide_probs);
}

double total_loss(const Classifier& model, const Dataset& data,
                  std::span<const int> clean_batch, std::span<const int> trig_batch,
                  const std::vector<std::vector<double>>& guide_probs,
                  const UnlearnConfig& cfg) {
    double total = loss_re(model, data, clean_batch);
    if (!trig_batch.empty()) {
        total += cfg.lambda_un * loss_un(model, data, trig_batch, cfg.epsilon);
        total += cfg.lambda_distill * loss_distill(model, data, trig_batch, guide_probs);
    }
    return total;
}

namespace {

double holdout_accuracy(const Classifier& model, const Dataset& data,
                        std::span<const int> holdout) {
    std::size_t hits = 0;
    for (int idx : holdout) {
        const Sample& s = data.samples.at(static_cast<std::size_t>(idx));
        if (predict(model, s.features) == s.observed_label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(holdout.size());
}

}  // namespace

UnlearnResult run_unlearning(const Classifier& victim, const SplitResult& split,
                             const Dataset& data, const GuideModel& guide,
                             const std::vector<bool>& guide_trigger_present,
                             const UnlearnConfig& cfg) {
    cfg.validate();
    if (split.clean_indices.empty())
        throw std::runtime_error("unlearn: D_c is empty; defense cannot proceed");
    if (!guide_trigger_present.empty() && guide_trigger_present.size() != data.samples.size())
        throw std::invalid_argument("unlearn: flag vector length mismatch");

    // Fixed 10% holdout of D_c for accuracy monitoring, never trained on.
    std::vector<int> clean_pool(split.clean_indices.begin(), split.clean_indices.end());
    Rng holdout_rng(mix_seed(cfg.seed, 6000));
    holdout_rng.shuffle(clean_pool);
    const std::size_t holdout_size =
        std::max<std::size_t>(1, clean_pool.size() / 10);
    if (holdout_size >= clean_pool.size())
        throw std::runtime_error("unlearn: D_c too small to hold out a monitoring split");
    std::vector<int> holdout(clean_pool.begin(), clean_pool.begin() + static_cast<long>(holdout_size));
    std::vector<int> train_clean(clean_pool.begin() + static_cast<long>(holdout_size), clean_pool.end());

    Rng oversample_rng(mix_seed(cfg.seed, 6001));
    OversampleResult oversampled = oversample_clean(train_clean, data, oversample_rng);

    // Guide rows for distillation, queried once per sample.
    std::vector<std::vector<double>> guide_probs(data.samples.size());
    for (int idx : split.triggered_indices) {
        const std::size_t i = static_cast<std::size_t>(idx);
        const bool flag = guide_trigger_present.empty() ? false : guide_trigger_present[i];
        guide_probs[i] = softmax(guide_logits(guide, data.samples[i], idx, flag));
    }

    UnlearnResult result;
    result.model = victim;
    result.dp_empty = split.triggered_indices.empty();
    result.tau = cfg.ca_floor ? *cfg.ca_floor
                              : std::max(0.0, holdout_accuracy(victim, data, holdout) - 0.03);

    const LossTerm re_term{LossKind::CrossEntropy, 1.0, 0.0};
    const std::vector<LossTerm> trig_terms{
        {LossKind::LabelLogLikelihood, cfg.lambda_un, cfg.epsilon},
        {LossKind::KlFromTarget, cfg.lambda_distill, 0.0}};

    std::vector<int> trig_order(split.triggered_indices.begin(), split.triggered_indices.end());

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const Classifier before_epoch = result.model;
        Rng epoch_rng(mix_seed(cfg.seed, 6100 + static_cast<std::uint64_t>(epoch)));
        epoch_rng.shuffle(oversampled.indices);
        if (!trig_order.empty()) epoch_rng.shuffle(trig_order);

        double sum_re = 0.0, sum_un = 0.0, sum_distill = 0.0;
        std::size_t batches = 0;
        std::size_t trig_pos = 0;
        const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

        for (std::size_t start = 0; start < oversampled.indices.size(); start += bs) {
            const std::size_t stop = std::min(oversampled.indices.size(), start + bs);
            std::span<const int> clean_batch(oversampled.indices.data() + start, stop - start);

            ObjectiveResult step = loss_and_grads(result.model, data, clean_batch, {&re_term, 1});
            sum_re += step.loss;

            if (!trig_order.empty()) {
                std::vector<int> trig_batch(clean_batch.size());
                for (std::size_t k = 0; k < trig_batch.size(); ++k) {
                    trig_batch[k] = trig_order[trig_pos];
                    trig_pos = (trig_pos + 1) % trig_order.size();
                }
                ObjectiveResult trig = loss_and_grads(result.model, data, trig_batch,
                                                      trig_terms, &guide_probs);
                step.grads.add_scaled(trig.grads, 1.0);
                // history tracks the unweighted per-term means
                sum_un += loss_un(result.model, data, trig_batch, cfg.epsilon);
                sum_distill += loss_distill(result.model, data, trig_batch, guide_probs);
            }
            if (!std::isfinite(step.loss))
                throw std::runtime_error("unlearn: non-finite loss at epoch " + std::to_string(epoch));
            sgd_step(result.model, step.grads, cfg.learning_rate, cfg.weight_decay);
            ++batches;
        }

        UnlearnEpoch row;
        row.epoch = epoch + 1;
        row.loss_re = sum_re / static_cast<double>(batches);
        row.loss_un = trig_order.empty() ? 0.0 : sum_un / static_cast<double>(batches);
        row.loss_distill = trig_order.empty() ? 0.0 : sum_distill / static_cast<double>(batches);
        row.loss_total = row.loss_re + cfg.lambda_un * row.loss_un +
                         cfg.lambda_distill * row.loss_distill;
        row.monitor_ca = holdout_accuracy(result.model, data, holdout);
        result.history.push_back(row);

        if (row.monitor_ca < result.tau) {
            result.model = before_epoch;
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

void save_unlearn_history(std::span<const UnlearnEpoch> history,
                          const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,loss_re,loss_un,loss_distill,loss_total,monitor_ca\n";
    char buf[256];
    for (const UnlearnEpoch& row : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.epoch,
                      row.loss_re, row.loss_un, row.loss_distill, row.loss_total,
                      row.monitor_ca);
        out << buf;
    }
}

}  // namespace poisonlab
