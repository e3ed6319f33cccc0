#include "mebm/kernels.hpp"

#include <cstring>

namespace mebm::kernels {
namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double api = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void leaky_relu(std::size_t n, double slope, const double* x, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad(std::size_t n, double slope, const double* x, const double* g, double* gx) {
    for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] >= 0.0 ? g[i] : slope * g[i];
}

void sq_dists(std::size_t na, std::size_t nb, std::size_t d, const double* a, const double* b,
              double* out) {
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < d; ++p) {
                const double diff = a[i * d + p] - b[j * d + p];
                s += diff * diff;
            }
            out[i * nb + j] = s;
        }
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{
        "scalar", gemm_nn, gemm_tn, gemm_nt, axpy, dot, leaky_relu, leaky_relu_grad, sq_dists,
    };
    return table;
}

}  // namespace mebm::kernels
