#include "arcrec/propagation.hpp"

#include "arcrec/data.hpp"
#include "arcrec/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>

namespace arcrec {

std::vector<double> layer_weights(int depth) {
    if (depth < 0) throw ConfigError("propagation depth must be >= 0");
    if (depth > 20) throw ConfigError("propagation depth must be <= 20");
    // Integer numerators M / (l + 1) with M = lcm(1..depth+1), so each weight
    // is a single correctly rounded division.
    std::uint64_t lcm = 1;
    for (std::uint64_t l = 1; l <= static_cast<std::uint64_t>(depth) + 1; ++l) lcm = std::lcm(lcm, l);
    std::vector<double> w(static_cast<std::size_t>(depth) + 1);
    std::uint64_t total = 0;
    for (std::size_t l = 0; l < w.size(); ++l) total += lcm / (l + 1);
    for (std::size_t l = 0; l < w.size(); ++l)
        w[l] = static_cast<double>(lcm / (l + 1)) / static_cast<double>(total);
    return w;
}

SparseOperator propagation_operator(const GraphLayer& layer) {
    CsrMatrix m;
    m.n = layer.num_nodes();
    m.row_ptr.assign(1, 0);
    for (std::size_t i = 0; i < m.n; ++i) {
        const double di = layer.degree[i];
        const auto& nb = layer.neighbors[i];
        bool self_written = false;
        auto write_self = [&] {
            m.col.push_back(static_cast<std::uint32_t>(i));
            m.val.push_back(di > 0.0 ? 1.0 / di : 1.0);
            self_written = true;
        };
        for (std::size_t t = 0; t < nb.size(); ++t) {
            const std::size_t j = nb[t];
            if (!self_written && j > i) write_self();
            m.col.push_back(static_cast<std::uint32_t>(j));
            m.val.push_back(layer.weights[i][t] / (std::sqrt(di) * std::sqrt(layer.degree[j])));
        }
        if (!self_written) write_self();
        m.row_ptr.push_back(m.col.size());
    }
    return SparseOperator::from(std::move(m));
}

std::vector<Matrix> propagate(const SparseOperator& op, const Matrix& base, int depth) {
    if (depth < 0) throw ConfigError("propagation depth must be >= 0");
    if (base.rows() != op.forward.n) throw NumericError("embedding table does not match graph size");
    std::vector<Matrix> h;
    h.reserve(static_cast<std::size_t>(depth) + 1);
    h.push_back(base);
    for (int l = 0; l < depth; ++l) {
        Matrix next(base.rows(), base.cols());
        kernels::spmm(op.forward, h.back().data(), base.cols(), next.data());
        h.push_back(std::move(next));
    }
    return h;
}

Matrix combine_layers(const std::vector<Matrix>& depths) {
    if (depths.empty()) throw NumericError("no layers to combine");
    const auto w = layer_weights(static_cast<int>(depths.size()) - 1);
    Matrix out(depths.front().rows(), depths.front().cols());
    for (std::size_t l = 0; l < depths.size(); ++l) out += depths[l] * w[l];
    return out;
}

Matrix propagate_combined(const SparseOperator& op, const Matrix& base, int depth) {
    return combine_layers(propagate(op, base, depth));
}

Matrix propagate_combined_adjoint(const SparseOperator& op, const Matrix& grad_combined, int depth) {
    // d/d(base) of sum_l w_l A^l base is sum_l w_l (A^T)^l applied to the
    // incoming gradient; evaluated Horner-style from the deepest layer.
    const auto w = layer_weights(depth);
    Matrix acc = grad_combined * w.back();
    for (int l = depth - 1; l >= 0; --l) {
        Matrix next(acc.rows(), acc.cols());
        kernels::spmm(op.adjoint, acc.data(), acc.cols(), next.data());
        acc = std::move(next);
        acc += grad_combined * w[static_cast<std::size_t>(l)];
    }
    return acc;
}

ad::Var propagate_on_tape(const SparseOperator& op, ad::Var base, int depth) {
    const auto w = layer_weights(depth);
    ad::Var h = base;
    ad::Var out = ad::scale(base, w[0]);
    for (int l = 1; l <= depth; ++l) {
        h = ad::spmm(op, h);
        out = ad::add(out, ad::scale(h, w[static_cast<std::size_t>(l)]));
    }
    return out;
}

Matrix cold_embedding(const std::vector<std::size_t>& neighbors, const Matrix& table) {
    Matrix out(1, table.cols());
    if (neighbors.empty()) {
        for (std::size_t r = 0; r < table.rows(); ++r)
            for (std::size_t c = 0; c < table.cols(); ++c) out[c] += table(r, c);
        out *= 1.0 / static_cast<double>(table.rows());
        return out;
    }
    for (std::size_t r : neighbors)
        for (std::size_t c = 0; c < table.cols(); ++c) out[c] += table(r, c);
    out *= 1.0 / static_cast<double>(neighbors.size());
    return out;
}

void write_embedding_snapshot(std::ostream& out, const std::vector<std::string>& layer_names,
                              const std::vector<Matrix>& tables, const std::vector<std::string>& product_ids) {
    const std::size_t d = tables.empty() ? 0 : tables.front().cols();
    out << "layer,product_id";
    for (std::size_t c = 0; c < d; ++c) out << ",v_" << c;
    out << '\n';
    for (std::size_t k = 0; k < tables.size(); ++k)
        for (std::size_t i = 0; i < tables[k].rows(); ++i) {
            out << layer_names[k] << ',' << product_ids[i];
            for (std::size_t c = 0; c < d; ++c) out << ',' << format_double(tables[k](i, c));
            out << '\n';
        }
}

}  // namespace arcrec
