#pragma once

#include <cstddef>
#include <string>

// Dense arithmetic kernels used by the classifier's forward/backward passes.
// Scalar reference implementations always exist; AVX2 variants are selected
// at runtime when the CPU supports them. The two paths are equivalence-tested
// against each other (FMA reassociation keeps them from being bitwise equal).
namespace poisonlab::kernels {

enum class Backend { Scalar, Avx2 };

/// Backend chosen at startup (honors POISONLAB_KERNELS=scalar|avx2).
Backend active_backend();

/// Force a backend, mainly for equivalence tests. Throws if unsupported.
void force_backend(Backend b);

bool avx2_supported();

std::string backend_name(Backend b);

double dot(const double* a, const double* b, std::size_t n);

/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

void scale(double* x, double s, std::size_t n);

/// y = W x + b with W row-major (rows x cols), x of length cols.
void matvec_bias(const double* w, const double* x, const double* b, double* y,
                 std::size_t rows, std::size_t cols);

/// y = W^T v with W row-major (rows x cols), v of length rows, y of length cols.
void matvec_transpose(const double* w, const double* v, double* y,
                      std::size_t rows, std::size_t cols);

/// A += alpha * u v^T with A row-major (rows x cols).
void outer_accumulate(double* a, double alpha, const double* u, const double* v,
                      std::size_t rows, std::size_t cols);

namespace detail {
struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double*, double, std::size_t);
};
const KernelTable& scalar_table();
const KernelTable& avx2_table();  // valid only when avx2_supported()
}  // namespace detail

}  // namespace poisonlab::kernels
