#include "arcrec/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

namespace arcrec::kernels {

namespace {

std::atomic<int> g_workers{1};

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelThreshold = 1 << 16;

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline void gemm_row(std::size_t k, std::size_t n, const double* arow, const double* b,
                     double* crow) {
    for (std::size_t t = 0; t < k; ++t) {
        const double av = arow[t];
        if (av == 0.0) continue;
        const double* brow = b + t * n;
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

inline void spmm_row(const CsrMatrix& s, const double* x, std::size_t cols, double* y,
                     std::size_t i) {
    double* yrow = y + i * cols;
    std::fill(yrow, yrow + cols, 0.0);
    for (std::size_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e) {
        const double w = s.val[e];
        const double* xrow = x + static_cast<std::size_t>(s.col[e]) * cols;
#pragma omp simd
        for (std::size_t c = 0; c < cols; ++c) yrow[c] += w * xrow[c];
    }
}

// One target against every reference; scratch holds refs.size() * (dim + 2 * hidden).
void pair_mlp_target(const double* table, std::size_t dim, std::size_t target,
                     std::span<const std::size_t> refs, const MlpView& alpha,
                     const MlpView& beta, double* out_a, double* out_b,
                     std::vector<double>& scratch) {
    const std::size_t m = refs.size();
    const std::size_t hidden = alpha.hidden;
    scratch.assign(m * (dim + 2 * hidden), 0.0);
    double* x = scratch.data();
    double* za = x + m * dim;
    double* zb = za + m * hidden;
    const double* ht = table + target * dim;
    for (std::size_t r = 0; r < m; ++r) {
        const double* hr = table + refs[r] * dim;
        double* xr = x + r * dim;
#pragma omp simd
        for (std::size_t c = 0; c < dim; ++c) xr[c] = ht[c] * hr[c];
    }
    for (std::size_t r = 0; r < m; ++r) {
        std::copy(alpha.b1, alpha.b1 + hidden, za + r * hidden);
        std::copy(beta.b1, beta.b1 + hidden, zb + r * hidden);
        gemm_row(dim, hidden, x + r * dim, alpha.w1, za + r * hidden);
        gemm_row(dim, hidden, x + r * dim, beta.w1, zb + r * hidden);
        double oa = alpha.b2;
        double ob = beta.b2;
        for (std::size_t h = 0; h < hidden; ++h) {
            oa += sigmoid(za[r * hidden + h]) * alpha.w2[h];
            ob += sigmoid(zb[r * hidden + h]) * beta.w2[h];
        }
        out_a[r] = oa;
        out_b[r] = ob;
    }
}

}  // namespace

void set_workers(int n) { g_workers.store(std::max(1, n)); }
int workers() { return g_workers.load(); }

void gemm_accumulate_serial(std::size_t m, std::size_t k, std::size_t n, const double* a,
                            const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) gemm_row(k, n, a + i * k, b, c + i * n);
}

void gemm_accumulate_parallel(std::size_t m, std::size_t k, std::size_t n, const double* a,
                              const double* b, double* c) {
#pragma omp parallel for schedule(static) num_threads(workers())
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i)
        gemm_row(k, n, a + i * k, b, c + i * n);
}

void gemm_accumulate(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                     double* c) {
    if (workers() > 1 && m * k * n >= kParallelThreshold && m > 1)
        gemm_accumulate_parallel(m, k, n, a, b, c);
    else
        gemm_accumulate_serial(m, k, n, a, b, c);
}

void gemm_tn_accumulate(std::size_t m, std::size_t k, std::size_t n, const double* a,
                        const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = arow[t];
            if (av == 0.0) continue;
            double* crow = c + t * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void spmm_serial(const CsrMatrix& s, const double* x, std::size_t cols, double* y) {
    for (std::size_t i = 0; i < s.n; ++i) spmm_row(s, x, cols, y, i);
}

void spmm_parallel(const CsrMatrix& s, const double* x, std::size_t cols, double* y) {
#pragma omp parallel for schedule(dynamic, 64) num_threads(workers())
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(s.n); ++i)
        spmm_row(s, x, cols, y, static_cast<std::size_t>(i));
}

void spmm(const CsrMatrix& s, const double* x, std::size_t cols, double* y) {
    if (workers() > 1 && s.nnz() * cols >= kParallelThreshold)
        spmm_parallel(s, x, cols, y);
    else
        spmm_serial(s, x, cols, y);
}

void pair_mlp_serial(const double* table, std::size_t dim, std::span<const std::size_t> targets,
                     std::span<const std::size_t> refs, const MlpView& alpha, const MlpView& beta,
                     double* out_a, double* out_b) {
    std::vector<double> scratch;
    const std::size_t m = refs.size();
    for (std::size_t t = 0; t < targets.size(); ++t)
        pair_mlp_target(table, dim, targets[t], refs, alpha, beta, out_a + t * m, out_b + t * m,
                        scratch);
}

void pair_mlp_parallel(const double* table, std::size_t dim, std::span<const std::size_t> targets,
                       std::span<const std::size_t> refs, const MlpView& alpha, const MlpView& beta,
                       double* out_a, double* out_b) {
    const std::size_t m = refs.size();
#pragma omp parallel num_threads(workers())
    {
        std::vector<double> scratch;
#pragma omp for schedule(dynamic, 4)
        for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(targets.size()); ++t)
            pair_mlp_target(table, dim, targets[t], refs, alpha, beta, out_a + t * m,
                            out_b + t * m, scratch);
    }
}

void pair_mlp(const double* table, std::size_t dim, std::span<const std::size_t> targets,
              std::span<const std::size_t> refs, const MlpView& alpha, const MlpView& beta,
              double* out_a, double* out_b) {
    if (workers() > 1 && targets.size() > 1)
        pair_mlp_parallel(table, dim, targets, refs, alpha, beta, out_a, out_b);
    else
        pair_mlp_serial(table, dim, targets, refs, alpha, beta, out_a, out_b);
}

}  // namespace arcrec::kernels
