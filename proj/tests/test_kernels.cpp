#include <doctest.h>

#include <cmath>
#include <vector>

#include "poisonlab/kernels.hpp"
#include "poisonlab/rng.hpp"

using namespace poisonlab;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.gaussian();
    return v;
}

double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("dot matches a naive loop across odd sizes") {
    Rng rng(11);
    for (std::size_t n : {1u, 3u, 4u, 7u, 16u, 33u, 64u, 129u}) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);
        const double expected = naive_dot(a, b);
        CHECK(kernels::dot(a.data(), b.data(), n) ==
              doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("scalar and avx2 backends agree") {
    if (!kernels::avx2_supported()) return;
    const kernels::Backend original = kernels::active_backend();
    Rng rng(17);
    for (std::size_t n : {1u, 2u, 5u, 31u, 32u, 67u, 200u}) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);
        auto y1 = random_vec(rng, n);
        auto y2 = y1;

        kernels::force_backend(kernels::Backend::Scalar);
        const double d1 = kernels::dot(a.data(), b.data(), n);
        kernels::axpy(0.37, a.data(), y1.data(), n);

        kernels::force_backend(kernels::Backend::Avx2);
        const double d2 = kernels::dot(a.data(), b.data(), n);
        kernels::axpy(0.37, a.data(), y2.data(), n);

        CHECK(d1 == doctest::Approx(d2).epsilon(1e-13));
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-13));
        }
    }
    kernels::force_backend(original);
}

TEST_CASE("matvec against hand-rolled loops, both backends") {
    Rng rng(23);
    const kernels::Backend original = kernels::active_backend();
    std::vector<kernels::Backend> backends{kernels::Backend::Scalar};
    if (kernels::avx2_supported()) backends.push_back(kernels::Backend::Avx2);

    const std::size_t rows = 13, cols = 37;
    const auto w = random_vec(rng, rows * cols);
    const auto x = random_vec(rng, cols);
    const auto b = random_vec(rng, rows);
    const auto v = random_vec(rng, rows);

    std::vector<double> y_ref(rows, 0.0), yt_ref(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = b[r];
        for (std::size_t c = 0; c < cols; ++c) s += w[r * cols + c] * x[c];
        y_ref[r] = s;
    }
    for (std::size_t c = 0; c < cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += w[r * cols + c] * v[r];
        yt_ref[c] = s;
    }

    for (kernels::Backend backend : backends) {
        kernels::force_backend(backend);
        std::vector<double> y(rows), yt(cols);
        kernels::matvec_bias(w.data(), x.data(), b.data(), y.data(), rows, cols);
        kernels::matvec_transpose(w.data(), v.data(), yt.data(), rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            CHECK(y[r] == doctest::Approx(y_ref[r]).epsilon(1e-12));
        for (std::size_t c = 0; c < cols; ++c)
            CHECK(yt[c] == doctest::Approx(yt_ref[c]).epsilon(1e-12));

        std::vector<double> a(rows * cols, 0.5);
        kernels::outer_accumulate(a.data(), 2.0, v.data(), x.data(), rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                CHECK(a[r * cols + c] ==
                      doctest::Approx(0.5 + 2.0 * v[r] * x[c]).epsilon(1e-12));
            }
        }
    }
    kernels::force_backend(original);
}

TEST_CASE("rng distributions have the right moments") {
    Rng rng(101);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));

    // uniform_int is unbiased over a non-power-of-two range
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) counts[rng.uniform_int(7)]++;
    for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
}

TEST_CASE("mix_seed separates streams") {
    CHECK(mix_seed(1, 0) != mix_seed(1, 1));
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));
    Rng a(mix_seed(5, 9)), b(mix_seed(5, 9));
    CHECK(a.next_u64() == b.next_u64());
}
