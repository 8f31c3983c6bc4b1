#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gradient_check.hpp"
#include "poisonlab/objective.hpp"

using namespace poisonlab;

namespace {

// tiny dataset with hand-set features for objective checks
Dataset toy_dataset(int num_classes, int feature_dim, int n, std::uint64_t seed) {
    Dataset data;
    data.num_classes = num_classes;
    data.feature_dim = feature_dim;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.features.resize(feature_dim);
        for (double& x : s.features) x = rng.gaussian();
        s.ground_truth = static_cast<int>(rng.uniform_int(num_classes));
        s.observed_label = s.ground_truth;
        data.samples.push_back(std::move(s));
    }
    // ensure every class appears
    for (int c = 0; c < num_classes; ++c) {
        data.samples[static_cast<std::size_t>(c)].ground_truth = c;
        data.samples[static_cast<std::size_t>(c)].observed_label = c;
    }
    return data;
}

}  // namespace

TEST_CASE("cross-entropy delta at uniform output is (uniform - onehot)") {
    // zero parameters give uniform softmax; the output-layer bias gradient
    // then equals the mean of (p - onehot) over the batch
    Classifier m = init_classifier({4, 3}, 0);
    std::fill(m.layers[0].weights.begin(), m.layers[0].weights.end(), 0.0);
    Dataset data = toy_dataset(3, 4, 3, 1);
    data.samples[0].observed_label = 2;

    const LossTerm ce{LossKind::CrossEntropy, 1.0, 0.0};
    const std::vector<int> batch = {0};
    const ObjectiveResult r = loss_and_grads(m, data, batch, {&ce, 1});
    const double third = 1.0 / 3.0;
    CHECK(r.grads.layers[0].bias[0] == doctest::Approx(third).epsilon(1e-12));
    CHECK(r.grads.layers[0].bias[1] == doctest::Approx(third).epsilon(1e-12));
    CHECK(r.grads.layers[0].bias[2] == doctest::Approx(third - 1.0).epsilon(1e-12));
    CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences on a random net") {
    const Dataset data = toy_dataset(5, 6, 12, 3);
    const Classifier m = init_classifier({6, 8, 5}, 17);
    std::vector<int> batch(12);
    std::iota(batch.begin(), batch.end(), 0);

    std::vector<std::vector<double>> targets(12);
    Rng rng(9);
    for (auto& row : targets) {
        std::vector<double> z(5);
        for (double& v : z) v = rng.gaussian();
        row = softmax(z);
    }

    SUBCASE("cross entropy") {
        const LossTerm t{LossKind::CrossEntropy, 1.0, 0.0};
        const auto rep = testing::finite_difference_check(m, data, batch, {&t, 1});
        CHECK(rep.max_rel_err <= 1e-4);
    }
    SUBCASE("label log likelihood") {
        const LossTerm t{LossKind::LabelLogLikelihood, 1.0, 1e-8};
        const auto rep = testing::finite_difference_check(m, data, batch, {&t, 1});
        CHECK(rep.max_rel_err <= 1e-4);
    }
    SUBCASE("kl from target") {
        const LossTerm t{LossKind::KlFromTarget, 1.0, 0.0};
        const auto rep = testing::finite_difference_check(m, data, batch, {&t, 1}, &targets);
        CHECK(rep.max_rel_err <= 1e-4);
    }
    SUBCASE("weighted composite") {
        const std::vector<LossTerm> terms{{LossKind::CrossEntropy, 1.0, 0.0},
                                          {LossKind::LabelLogLikelihood, 0.025, 1e-8},
                                          {LossKind::KlFromTarget, 0.0005, 0.0}};
        const auto rep = testing::finite_difference_check(m, data, batch, terms, &targets);
        CHECK(rep.max_rel_err <= 1e-4);
    }
}

TEST_CASE("duplicating every sample leaves the mean-loss gradient unchanged") {
    const Dataset data = toy_dataset(3, 4, 6, 5);
    const Classifier m = init_classifier({4, 5, 3}, 2);
    const LossTerm ce{LossKind::CrossEntropy, 1.0, 0.0};

    std::vector<int> batch = {0, 1, 2};
    std::vector<int> doubled = {0, 1, 2, 0, 1, 2};
    const ObjectiveResult a = loss_and_grads(m, data, batch, {&ce, 1});
    const ObjectiveResult b = loss_and_grads(m, data, doubled, {&ce, 1});
    CHECK(std::abs(a.loss - b.loss) < 1e-12);
    for (std::size_t l = 0; l < a.grads.layers.size(); ++l) {
        for (std::size_t k = 0; k < a.grads.layers[l].weights.size(); ++k) {
            CHECK(std::abs(a.grads.layers[l].weights[k] - b.grads.layers[l].weights[k]) < 1e-12);
        }
    }
}

TEST_CASE("composite gradient is the weighted sum of its parts") {
    const Dataset data = toy_dataset(4, 5, 8, 7);
    const Classifier m = init_classifier({5, 6, 4}, 3);
    std::vector<int> batch = {0, 1, 2, 3};
    std::vector<std::vector<double>> targets(8, softmax(std::vector<double>{1.0, 0.0, 0.5, -0.5}));

    const double lam_un = 0.025, lam_distill = 0.0005;
    const std::vector<LossTerm> combined{{LossKind::CrossEntropy, 1.0, 0.0},
                                         {LossKind::LabelLogLikelihood, lam_un, 1e-8},
                                         {LossKind::KlFromTarget, lam_distill, 0.0}};
    const LossTerm t_ce{LossKind::CrossEntropy, 1.0, 0.0};
    const LossTerm t_un{LossKind::LabelLogLikelihood, 1.0, 1e-8};
    const LossTerm t_kl{LossKind::KlFromTarget, 1.0, 0.0};

    const ObjectiveResult whole = loss_and_grads(m, data, batch, combined, &targets);
    const ObjectiveResult g_ce = loss_and_grads(m, data, batch, {&t_ce, 1});
    const ObjectiveResult g_un = loss_and_grads(m, data, batch, {&t_un, 1});
    const ObjectiveResult g_kl = loss_and_grads(m, data, batch, {&t_kl, 1}, &targets);

    CHECK(whole.loss ==
          doctest::Approx(g_ce.loss + lam_un * g_un.loss + lam_distill * g_kl.loss).epsilon(1e-10));
    for (std::size_t l = 0; l < whole.grads.layers.size(); ++l) {
        for (std::size_t k = 0; k < whole.grads.layers[l].weights.size(); ++k) {
            const double expected = g_ce.grads.layers[l].weights[k] +
                                    lam_un * g_un.grads.layers[l].weights[k] +
                                    lam_distill * g_kl.grads.layers[l].weights[k];
            CHECK(std::abs(whole.grads.layers[l].weights[k] - expected) < 1e-10);
        }
    }
}

TEST_CASE("empty batch and missing targets are rejected") {
    const Dataset data = toy_dataset(3, 4, 4, 1);
    const Classifier m = init_classifier({4, 3}, 0);
    const LossTerm ce{LossKind::CrossEntropy, 1.0, 0.0};
    const LossTerm kl{LossKind::KlFromTarget, 1.0, 0.0};
    std::vector<int> empty;
    std::vector<int> batch = {0};
    CHECK_THROWS_AS(loss_and_grads(m, data, empty, {&ce, 1}), std::invalid_argument);
    CHECK_THROWS_AS(loss_and_grads(m, data, batch, {&kl, 1}), std::invalid_argument);
}

TEST_CASE("decoupled weight decay shrinks before the step") {
    Classifier m = init_classifier({2, 2}, 0);
    m.layers[0].weights = {1.0, 1.0, 1.0, 1.0};
    m.layers[0].bias = {2.0, 2.0};
    Gradients g = Gradients::zeros_like(m);
    g.layers[0].weights = {10.0, 0.0, 0.0, 0.0};
    sgd_step(m, g, 0.1, 0.5);
    // shrink 1 - 0.1*0.5 = 0.95, then -= lr * grad
    CHECK(m.layers[0].weights[0] == doctest::Approx(0.95 - 1.0).epsilon(1e-12));
    CHECK(m.layers[0].weights[1] == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(m.layers[0].bias[0] == doctest::Approx(1.9).epsilon(1e-12));
}
