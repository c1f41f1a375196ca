#pragma once

// Reverse-mode differentiation over matrix-valued primitives.
//
// A Tape records each primitive as a node holding its value and a closure
// that pushes the node's gradient to its inputs. Inputs are always recorded
// before their consumers, so reverse index order is a valid topological
// order. A tape is single-use: backward() may run once.

#include "arcrec/matrix.hpp"
#include "arcrec/sparse.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace arcrec::ad {

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    Matrix grad() const;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Differentiable input.
    Var leaf(Matrix value);
    /// Non-differentiable input.
    Var constant(Matrix value);

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    /// Gradient of the backward() output w.r.t. node id; zero matrix when the
    /// node did not influence the output.
    Matrix grad(std::size_t id) const;

    /// Seeds d(out)/d(out) = 1 and replays the tape in reverse.
    void backward(Var out);

    bool consumed() const { return consumed_; }
    std::size_t size() const { return nodes_.size(); }

    using Pullback = std::function<void(Tape&, std::size_t self)>;

    /// Records a primitive. Throws NumericError when the value is non-finite.
    Var record(Matrix value, std::span<const std::size_t> inputs, Pullback pullback,
               const char* op);

    /// Gradient buffer of node id, allocated on first use.
    Matrix& grad_buffer(std::size_t id);
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const Matrix& output_grad(std::size_t id) const { return nodes_[id].grad; }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Pullback pullback;
        bool requires_grad = false;
        bool visited = false;
    };

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var matmul(Var a, Var b);
Var hadamard(Var a, Var b);
/// Elementwise a / b.
Var div(Var a, Var b);
Var transpose(Var a);
/// Repeats a 1 x n row m times.
Var broadcast_rows(Var row, std::size_t m);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var gather_rows(Var table, std::span<const std::size_t> rows);
/// Column means: 1 x n.
Var mean_rows(Var a);
/// Inner product of two same-shape matrices: 1 x 1.
Var dot(Var a, Var b);
Var sum(Var a);
/// Euclidean (Frobenius) norm: 1 x 1.
Var norm(Var a);
/// Softmax over all entries, keeping the shape.
Var softmax(Var a);
Var sigmoid(Var a);
Var log(Var a);
/// log(sigmoid(a)), stable for large |a|.
Var log_sigmoid(Var a);
/// op.forward * a; backward applies op.adjoint. op must outlive the tape.
Var spmm(const SparseOperator& op, Var a);

}  // namespace arcrec::ad
