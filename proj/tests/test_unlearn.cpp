#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gradient_check.hpp"
#include "poisonlab/unlearn.hpp"

using namespace poisonlab;

namespace {

Dataset small_dataset(std::uint64_t seed = 3) { return generate_synthetic(10, 8, 20, 3.0, seed); }

Classifier uniform_model(int d, int c) {
    Classifier m = init_classifier({d, c}, 0);
    std::fill(m.layers[0].weights.begin(), m.layers[0].weights.end(), 0.0);
    return m;
}

GuideModel noiseless_guide(int c) {
    GuideModel g;
    g.num_classes = c;
    g.confidence_margin = 2.0;
    return g;
}

}  // namespace

TEST_CASE("loss_re: confident model scores ~0, uniform model scores ln C") {
    Dataset data = small_dataset();
    const std::vector<int> batch = {0, 1, 2};

    Classifier uniform = uniform_model(8, 10);
    CHECK(loss_re(uniform, data, batch) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

    // bias pinned to the observed label makes every prediction near-certain
    Classifier confident = uniform;
    for (int idx : batch) {
        // all three have the same label only if we force it
        data.samples[static_cast<std::size_t>(idx)].observed_label = 4;
    }
    confident.layers[0].bias[4] = 500.0;
    CHECK(loss_re(confident, data, batch) < 1e-12);
}

TEST_CASE("loss_re is the mean of the single-sample losses") {
    const Dataset data = small_dataset();
    const Classifier m = init_classifier({8, 6, 10}, 5);
    const std::vector<int> ab = {3, 17};
    const std::vector<int> a = {3};
    const std::vector<int> b = {17};
    CHECK(loss_re(m, data, ab) ==
          doctest::Approx((loss_re(m, data, a) + loss_re(m, data, b)) / 2.0).epsilon(1e-12));
}

TEST_CASE("loss_un boundary values") {
    Dataset data = small_dataset();
    const std::vector<int> batch = {0};
    const double eps = 1e-8;

    Classifier confident = uniform_model(8, 10);
    confident.layers[0].bias[data.samples[0].observed_label] = 500.0;
    CHECK(loss_un(confident, data, batch, eps) ==
          doctest::Approx(std::log(1.0 + eps)).epsilon(1e-6));

    // probability crushed to ~0: the epsilon keeps the value finite
    Classifier wrong = uniform_model(8, 10);
    wrong.layers[0].bias[(data.samples[0].observed_label + 1) % 10] = 900.0;
    CHECK(loss_un(wrong, data, batch, eps) == doctest::Approx(std::log(eps)).epsilon(1e-6));
    CHECK(std::isfinite(loss_un(wrong, data, batch, eps)));

    Classifier uniform = uniform_model(8, 10);
    CHECK(loss_un(uniform, data, batch, eps) ==
          doctest::Approx(std::log(0.1 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("loss_distill: identity gives zero, frozen value, nonnegative") {
    Dataset data = small_dataset();
    const std::vector<int> batch = {0};
    Classifier m = uniform_model(8, 10);

    std::vector<std::vector<double>> targets(data.samples.size());
    targets[0] = softmax(forward(m, data.samples[0].features));
    CHECK(loss_distill(m, data, batch, targets) == doctest::Approx(0.0).epsilon(1e-12));

    // P uniform over 2 classes against Q = [0.9, 0.1]
    Dataset two = generate_synthetic(2, 4, 10, 3.0, 7);
    Classifier q = init_classifier({4, 2}, 0);
    std::fill(q.layers[0].weights.begin(), q.layers[0].weights.end(), 0.0);
    q.layers[0].bias = {std::log(0.9), std::log(0.1)};
    std::vector<std::vector<double>> uniform_targets(two.samples.size(),
                                                     std::vector<double>{0.5, 0.5});
    CHECK(loss_distill(q, two, std::vector<int>{0}, uniform_targets) ==
          doctest::Approx(0.51082562376599068).epsilon(1e-12));

    // Gibbs: KL >= 0 for random pairs
    Rng rng(11);
    Classifier rand_model = init_classifier({8, 6, 10}, 13);
    std::vector<std::vector<double>> rand_targets(data.samples.size());
    for (int round = 0; round < 1000; ++round) {
        const int idx = static_cast<int>(rng.uniform_int(data.samples.size()));
        std::vector<double> z(10);
        for (double& v : z) v = 3.0 * rng.gaussian();
        rand_targets[static_cast<std::size_t>(idx)] = softmax(z);
        const std::vector<int> one = {idx};
        CHECK(loss_distill(rand_model, data, one, rand_targets) >= -1e-15);
    }
}

TEST_CASE("total_loss: reduction and recombination") {
    const Dataset data = small_dataset();
    const Classifier m = init_classifier({8, 6, 10}, 5);
    const GuideModel guide = noiseless_guide(10);
    std::vector<std::vector<double>> guide_probs(data.samples.size());
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        guide_probs[i] = softmax(guide_logits(guide, data.samples[i], static_cast<int>(i), false));
    }
    const std::vector<int> clean_batch = {0, 1, 2, 3};
    const std::vector<int> trig_batch = {10, 11};

    UnlearnConfig cfg;
    cfg.lambda_un = 0.0;
    cfg.lambda_distill = 0.0;
    CHECK(total_loss(m, data, clean_batch, trig_batch, guide_probs, cfg) ==
          doctest::Approx(loss_re(m, data, clean_batch)).epsilon(1e-15));

    cfg.lambda_un = 0.025;
    cfg.lambda_distill = 0.0005;
    const double combined = total_loss(m, data, clean_batch, trig_batch, guide_probs, cfg);
    const double by_hand = loss_re(m, data, clean_batch) +
                           cfg.lambda_un * loss_un(m, data, trig_batch, cfg.epsilon) +
                           cfg.lambda_distill * loss_distill(m, data, trig_batch, guide_probs);
    CHECK(combined == doctest::Approx(by_hand).epsilon(1e-12));

    // degraded run: empty D_p falls back to the relearn term
    CHECK(total_loss(m, data, clean_batch, {}, guide_probs, cfg) ==
          doctest::Approx(loss_re(m, data, clean_batch)).epsilon(1e-15));
}

TEST_CASE("total objective passes the finite-difference check") {
    const Dataset data = small_dataset();
    const Classifier m = init_classifier({8, 6, 10}, 21);
    const GuideModel guide = noiseless_guide(10);
    std::vector<std::vector<double>> guide_probs(data.samples.size());
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        guide_probs[i] = softmax(guide_logits(guide, data.samples[i], static_cast<int>(i), false));
    }
    const std::vector<int> batch = {0, 5, 10, 15};
    const std::vector<LossTerm> terms{{LossKind::CrossEntropy, 1.0, 0.0},
                                      {LossKind::LabelLogLikelihood, 0.025, 1e-8},
                                      {LossKind::KlFromTarget, 0.0005, 0.0}};
    const auto rep = testing::finite_difference_check(m, data, batch, terms, &guide_probs);
    CHECK(rep.max_rel_err <= 1e-4);
}

namespace {

SplitResult fabricated_split(std::size_t n, const std::vector<int>& triggered) {
    SplitResult s;
    s.sigma1 = 0.2;
    s.sigma2 = 0.1;
    std::vector<bool> is_trig(n, false);
    for (int idx : triggered) is_trig[static_cast<std::size_t>(idx)] = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_trig[i]) s.triggered_indices.push_back(static_cast<int>(i));
        else s.clean_indices.push_back(static_cast<int>(i));
    }
    return s;
}

}  // namespace

TEST_CASE("empty D_p degrades to plain fine-tuning, bitwise") {
    const Dataset data = generate_synthetic(4, 8, 30, 4.0, 9);
    const Classifier victim = init_classifier({8, 6, 4}, 3);
    const GuideModel guide = noiseless_guide(4);
    const SplitResult s = fabricated_split(data.samples.size(), {});

    UnlearnConfig with_terms;
    with_terms.max_epochs = 3;
    with_terms.seed = 77;
    UnlearnConfig relearn_only = with_terms;
    relearn_only.lambda_un = 0.0;
    relearn_only.lambda_distill = 0.0;

    const UnlearnResult a = run_unlearning(victim, s, data, guide, {}, with_terms);
    const UnlearnResult b = run_unlearning(victim, s, data, guide, {}, relearn_only);
    CHECK(a.model == b.model);
    CHECK(a.dp_empty);
}

TEST_CASE("ca floor 1.0 stops at the first violating epoch") {
    const Dataset data = generate_synthetic(4, 8, 30, 1.0, 9);  // hard task: accuracy < 1
    const Classifier victim = init_classifier({8, 6, 4}, 3);
    const GuideModel guide = noiseless_guide(4);
    const SplitResult s = fabricated_split(data.samples.size(), {0, 1, 2});

    UnlearnConfig cfg;
    cfg.ca_floor = 1.0;
    cfg.max_epochs = 10;
    cfg.seed = 5;
    const UnlearnResult r = run_unlearning(victim, s, data, guide, {}, cfg);
    REQUIRE(r.early_stopped);
    CHECK(r.history.size() < 10);
    // returned parameters predate the violating epoch: one epoch from them
    // reproduces the recorded violation
    CHECK(r.history.back().monitor_ca < 1.0);
}

TEST_CASE("early stop returns the pre-violation parameters") {
    const Dataset data = generate_synthetic(4, 8, 40, 2.0, 13);
    const Classifier victim = init_classifier({8, 6, 4}, 3);
    const GuideModel guide = noiseless_guide(4);
    const SplitResult s = fabricated_split(data.samples.size(), {0, 1});

    UnlearnConfig one_epoch;
    one_epoch.max_epochs = 1;
    one_epoch.seed = 31;
    UnlearnConfig stopped = one_epoch;
    stopped.max_epochs = 8;
    stopped.ca_floor = 1.0;  // violated immediately on this imperfect task

    const UnlearnResult full = run_unlearning(victim, s, data, guide, {}, one_epoch);
    const UnlearnResult cut = run_unlearning(victim, s, data, guide, {}, stopped);
    if (cut.early_stopped && cut.history.size() == 1) {
        CHECK(cut.model == victim);  // stopped during epoch 1 -> pre-epoch parameters
    }
    CHECK(full.history.size() == 1);
}

TEST_CASE("empty D_c is an error") {
    const Dataset data = generate_synthetic(4, 8, 30, 3.0, 9);
    const Classifier victim = init_classifier({8, 6, 4}, 3);
    const GuideModel guide = noiseless_guide(4);
    SplitResult s;
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        s.triggered_indices.push_back(static_cast<int>(i));
    UnlearnConfig cfg;
    CHECK_THROWS(run_unlearning(victim, s, data, guide, {}, cfg));
    CHECK_THROWS_AS([&] {
        UnlearnConfig bad;
        bad.max_epochs = 0;
        bad.validate();
    }(), std::invalid_argument);
}

TEST_CASE("history rows carry the configured epochs and finite losses") {
    const Dataset data = generate_synthetic(4, 8, 40, 4.0, 15);
    const Classifier victim = init_classifier({8, 6, 4}, 3);
    const GuideModel guide = noiseless_guide(4);
    const SplitResult s = fabricated_split(data.samples.size(), {0, 1, 2, 3, 4});
    UnlearnConfig cfg;
    cfg.max_epochs = 4;
    cfg.ca_floor = 0.01;
    cfg.seed = 9;
    const UnlearnResult r = run_unlearning(victim, s, data, guide, {}, cfg);
    REQUIRE(r.history.size() == 4);
    for (const UnlearnEpoch& row : r.history) {
        CHECK(std::isfinite(row.loss_re));
        CHECK(std::isfinite(row.loss_un));
        CHECK(std::isfinite(row.loss_distill));
        CHECK(row.loss_total ==
              doctest::Approx(row.loss_re + cfg.lambda_un * row.loss_un +
                              cfg.lambda_distill * row.loss_distill)
                  .epsilon(1e-9));
    }
}
