// Compiled with -mavx2 -mfma; only reached after the runtime CPU check passes.

#include "mebm/kernels.hpp"

#include <immintrin.h>

#include <cstring>
#include <vector>

namespace mebm::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// crow[0..n) += s * brow[0..n)
inline void row_axpy(std::size_t n, double s, const double* brow, double* crow) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        __m256d c1 = _mm256_loadu_pd(crow + j + 4);
        __m256d c2 = _mm256_loadu_pd(crow + j + 8);
        __m256d c3 = _mm256_loadu_pd(crow + j + 12);
        c0 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(brow + j), c0);
        c1 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(brow + j + 4), c1);
        c2 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(brow + j + 8), c2);
        c3 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(brow + j + 12), c3);
        _mm256_storeu_pd(crow + j, c0);
        _mm256_storeu_pd(crow + j + 4, c1);
        _mm256_storeu_pd(crow + j + 8, c2);
        _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= n; j += 4) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        c0 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(brow + j), c0);
        _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < n; ++j) crow[j] += s * brow[j];
}

double dot(std::size_t n, const double* x, const double* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) row_axpy(n, a[i * k + p], b + p * n, crow);
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) row_axpy(n, arow[i], brow, c + i * n);
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double s = dot(k, a + i * k, b + j * k);
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) { row_axpy(n, alpha, x, y); }

void leaky_relu(std::size_t n, double slope, const double* x, double* out) {
    const __m256d vs = _mm256_set1_pd(slope);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d neg = _mm256_cmp_pd(v, zero, _CMP_LT_OQ);
        _mm256_storeu_pd(out + i, _mm256_blendv_pd(v, _mm256_mul_pd(v, vs), neg));
    }
    for (; i < n; ++i) out[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad(std::size_t n, double slope, const double* x, const double* g, double* gx) {
    const __m256d vs = _mm256_set1_pd(slope);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d gv = _mm256_loadu_pd(g + i);
        const __m256d neg = _mm256_cmp_pd(v, zero, _CMP_LT_OQ);
        const __m256d d = _mm256_blendv_pd(gv, _mm256_mul_pd(gv, vs), neg);
        _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), d));
    }
    for (; i < n; ++i) gx[i] += x[i] >= 0.0 ? g[i] : slope * g[i];
}

void sq_dists(std::size_t na, std::size_t nb, std::size_t d, const double* a, const double* b,
              double* out) {
    // b transposed to d×nb so the j loop is contiguous.
    std::vector<double> bt(d * nb);
    for (std::size_t j = 0; j < nb; ++j)
        for (std::size_t p = 0; p < d; ++p) bt[p * nb + j] = b[j * d + p];
    for (std::size_t i = 0; i < na; ++i) {
        const double* arow = a + i * d;
        double* orow = out + i * nb;
        std::size_t j = 0;
        for (; j + 4 <= nb; j += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t p = 0; p < d; ++p) {
                const __m256d diff =
                    _mm256_sub_pd(_mm256_set1_pd(arow[p]), _mm256_loadu_pd(bt.data() + p * nb + j));
                acc = _mm256_fmadd_pd(diff, diff, acc);
            }
            _mm256_storeu_pd(orow + j, acc);
        }
        for (; j < nb; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < d; ++p) {
                const double diff = arow[p] - b[j * d + p];
                s += diff * diff;
            }
            orow[j] = s;
        }
    }
}

}  // namespace

const KernelTable& avx2_kernels() {
    static const KernelTable table{
        "avx2", gemm_nn, gemm_tn, gemm_nt, axpy, dot, leaky_relu, leaky_relu_grad, sq_dists,
    };
    return table;
}

}  // namespace mebm::kernels
