#include "poisonlab/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace poisonlab::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0;
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
    }
    if (i < n) acc0 += a[i] * b[i];
    return acc0 + acc1;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double* x, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

const detail::KernelTable* g_table = nullptr;
Backend g_backend = Backend::Scalar;

void install(Backend b) {
    if (b == Backend::Avx2) {
        if (!avx2_supported()) throw std::runtime_error("AVX2 backend not available on this CPU/build");
        g_table = &detail::avx2_table();
    } else {
        g_table = &detail::scalar_table();
    }
    g_backend = b;
}

void ensure_init() {
    if (g_table) return;
    Backend pick = avx2_supported() ? Backend::Avx2 : Backend::Scalar;
    if (const char* env = std::getenv("POISONLAB_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) pick = Backend::Scalar;
        else if (std::strcmp(env, "avx2") == 0) pick = Backend::Avx2;
    }
    install(pick);
}

}  // namespace

namespace detail {
const KernelTable& scalar_table() {
    static const KernelTable t{dot_scalar, axpy_scalar, scale_scalar};
    return t;
}
}  // namespace detail

#if !defined(POISONLAB_BUILD_AVX2)
bool avx2_supported() { return false; }
namespace detail {
const KernelTable& avx2_table() { throw std::runtime_error("built without AVX2 support"); }
}  // namespace detail
#endif

Backend active_backend() {
    ensure_init();
    return g_backend;
}

void force_backend(Backend b) { install(b); }

std::string backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

double dot(const double* a, const double* b, std::size_t n) {
    ensure_init();
    return g_table->dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    ensure_init();
    g_table->axpy(alpha, x, y, n);
}

void scale(double* x, double s, std::size_t n) {
    ensure_init();
    g_table->scale(x, s, n);
}

void matvec_bias(const double* w, const double* x, const double* b, double* y,
                 std::size_t rows, std::size_t cols) {
    ensure_init();
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = g_table->dot(w + r * cols, x, cols) + (b ? b[r] : 0.0);
    }
}

void matvec_transpose(const double* w, const double* v, double* y,
                      std::size_t rows, std::size_t cols) {
    ensure_init();
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        g_table->axpy(v[r], w + r * cols, y, cols);
    }
}

void outer_accumulate(double* a, double alpha, const double* u, const double* v,
                      std::size_t rows, std::size_t cols) {
    ensure_init();
    for (std::size_t r = 0; r < rows; ++r) {
        g_table->axpy(alpha * u[r], v, a + r * cols, cols);
    }
}

}  // namespace poisonlab::kernels
