#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace arcrec {

/// Compressed sparse row matrix. Column indices within a row are sorted.
struct CsrMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    std::size_t nnz() const { return col.size(); }
    std::size_t rows() const { return n; }

    CsrMatrix transposed() const;
};

/// A linear operator together with its adjoint, so reverse-mode passes can
/// apply the transpose without recomputing it.
struct SparseOperator {
    CsrMatrix forward;
    CsrMatrix adjoint;

    static SparseOperator from(CsrMatrix m) {
        SparseOperator op;
        op.adjoint = m.transposed();
        op.forward = std::move(m);
        return op;
    }
};

}  // namespace arcrec
