#pragma once

// Dense double-precision inner loops used by the autograd core and by the
// diagnostics. Each kernel has a scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The active table is chosen once at first use from the
// CPU feature bits; EBM_KERNELS=scalar forces the reference path.

#include <cstddef>
#include <string_view>

namespace mebm::kernels {

// All matrices are row-major and densely packed.
struct KernelTable {
    std::string_view name;

    // C[M×N] (+)= A[M×K] · B[K×N]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c, bool accumulate);
    // C[M×N] (+)= A[K×M]ᵀ · B[K×N]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c, bool accumulate);
    // C[M×N] (+)= A[M×K] · B[N×K]ᵀ
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c, bool accumulate);

    // y[i] += alpha * x[i]
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    double (*dot)(std::size_t n, const double* x, const double* y);

    // out[i] = x[i] > 0 ? x[i] : slope * x[i]
    void (*leaky_relu)(std::size_t n, double slope, const double* x, double* out);
    // gx[i] += x[i] >= 0 ? g[i] : slope * g[i]
    void (*leaky_relu_grad)(std::size_t n, double slope, const double* x, const double* g,
                            double* gx);

    // out[i×nb + j] = ‖a_i − b_j‖² for a[na×d], b[nb×d]
    void (*sq_dists)(std::size_t na, std::size_t nb, std::size_t d, const double* a,
                     const double* b, double* out);
};

const KernelTable& scalar_table();
// nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

// The table selected for this process.
const KernelTable& active();

}  // namespace mebm::kernels
