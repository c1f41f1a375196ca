#pragma once

// Linear message passing over one attributed network:
//
//   h_i^(l+1) = h_i^(l) / |N_i| + sum_{j in N_i} s_ij h_j^(l) / (sqrt|N_i| sqrt|N_j|)
//
// followed by a fixed-weight combination of the depths 0..L with weights
// proportional to 1 / (l + 1). Isolated nodes pass through unchanged.

#include "arcrec/graphs.hpp"
#include "arcrec/matrix.hpp"
#include "arcrec/sparse.hpp"
#include "arcrec/tape.hpp"

#include <iosfwd>
#include <vector>

namespace arcrec {

/// Normalized combination weights for depths 0..depth; they sum to 1.
std::vector<double> layer_weights(int depth);

/// One round of message passing as a sparse operator (self channel on the
/// diagonal).
SparseOperator propagation_operator(const GraphLayer& layer);

/// h^(0..depth) with h^(0) = base.
std::vector<Matrix> propagate(const SparseOperator& op, const Matrix& base, int depth);

Matrix combine_layers(const std::vector<Matrix>& depths);

/// combine_layers(propagate(op, base, depth)).
Matrix propagate_combined(const SparseOperator& op, const Matrix& base, int depth);

/// Adjoint of propagate_combined: maps d(loss)/d(h) to d(loss)/d(base).
Matrix propagate_combined_adjoint(const SparseOperator& op, const Matrix& grad_combined, int depth);

/// Differentiable version recorded on a tape.
ad::Var propagate_on_tape(const SparseOperator& op, ad::Var base, int depth);

/// Mean of the neighbors' rows; all rows' mean when the neighbor set is empty.
Matrix cold_embedding(const std::vector<std::size_t>& neighbors, const Matrix& table);

/// CSV snapshot "layer,product_id,v_0,...,v_{d-1}".
void write_embedding_snapshot(std::ostream& out, const std::vector<std::string>& layer_names,
                              const std::vector<Matrix>& tables, const std::vector<std::string>& product_ids);

}  // namespace arcrec
