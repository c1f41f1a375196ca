#pragma once

// Dense and sparse compute kernels. Each kernel has a serial reference
// implementation and an OpenMP implementation; the unsuffixed entry point
// dispatches on the configured worker count and problem size. Tests check
// the parallel versions against the serial ones, bench/ times them.

#include "arcrec/sparse.hpp"

#include <cstddef>
#include <span>

namespace arcrec::kernels {

/// Worker threads used by the dispatching entry points (>= 1).
void set_workers(int n);
int workers();

/// c(m x n) += a(m x k) * b(k x n), all row-major.
void gemm_accumulate_serial(std::size_t m, std::size_t k, std::size_t n, const double* a,
                            const double* b, double* c);
void gemm_accumulate_parallel(std::size_t m, std::size_t k, std::size_t n, const double* a,
                              const double* b, double* c);
void gemm_accumulate(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                     double* c);

/// c(k x n) += a(m x k)^T * b(m x n).
void gemm_tn_accumulate(std::size_t m, std::size_t k, std::size_t n, const double* a,
                        const double* b, double* c);

/// y(n x cols) = s * x(n x cols).
void spmm_serial(const CsrMatrix& s, const double* x, std::size_t cols, double* y);
void spmm_parallel(const CsrMatrix& s, const double* x, std::size_t cols, double* y);
void spmm(const CsrMatrix& s, const double* x, std::size_t cols, double* y);

/// Read-only view of a one-hidden-layer scalar MLP:
/// out = sigmoid(x * w1 + b1) . w2 + b2, w1 stored (in x hidden).
struct MlpView {
    const double* w1;
    const double* b1;
    const double* w2;
    double b2;
    std::size_t in;
    std::size_t hidden;
};

/// For every target t and reference r, evaluates both MLPs on the Hadamard
/// product table[targets[t]] (.) table[refs[r]] and writes
/// out_a[t * refs.size() + r], out_b[t * refs.size() + r].
void pair_mlp_serial(const double* table, std::size_t dim, std::span<const std::size_t> targets,
                     std::span<const std::size_t> refs, const MlpView& alpha, const MlpView& beta,
                     double* out_a, double* out_b);
void pair_mlp_parallel(const double* table, std::size_t dim, std::span<const std::size_t> targets,
                       std::span<const std::size_t> refs, const MlpView& alpha, const MlpView& beta,
                       double* out_a, double* out_b);
void pair_mlp(const double* table, std::size_t dim, std::span<const std::size_t> targets,
              std::span<const std::size_t> refs, const MlpView& alpha, const MlpView& beta,
              double* out_a, double* out_b);

}  // namespace arcrec::kernels
