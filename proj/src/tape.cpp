#include "arcrec/tape.hpp"

#include "arcrec/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace arcrec::ad {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(-|x|)) based form of log sigmoid.
double stable_log_sigmoid(double x) {
    return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x)));
}

Tape& same_tape(Var a, Var b) {
    if (a.tape == nullptr || a.tape != b.tape) throw NumericError("operands live on different tapes");
    return *a.tape;
}

Tape& tape_of(std::span<const Var> parts) {
    if (parts.empty()) throw NumericError("empty operand list");
    for (const Var& v : parts)
        if (v.tape != parts.front().tape) throw NumericError("operands live on different tapes");
    return *parts.front().tape;
}

// Adds g into the gradient buffer of node id when it needs one.
void push(Tape& t, std::size_t id, const Matrix& g) {
    if (t.requires_grad(id)) t.grad_buffer(id) += g;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }
Matrix Var::grad() const { return tape->grad(id); }

Var Tape::leaf(Matrix value) {
    if (!value.all_finite()) throw NumericError("non-finite leaf value");
    nodes_.push_back(Node{std::move(value), {}, {}, true, false});
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
    if (!value.all_finite()) throw NumericError("non-finite constant value");
    nodes_.push_back(Node{std::move(value), {}, {}, false, false});
    return Var{this, nodes_.size() - 1};
}

Matrix Tape::grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

Matrix& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

Var Tape::record(Matrix value, std::span<const std::size_t> inputs, Pullback pullback,
                 const char* op) {
    if (consumed_) throw NumericError(std::string("cannot record ") + op + " on a consumed tape");
    if (!value.all_finite()) throw NumericError(std::string("non-finite intermediate in ") + op);
    bool needs = false;
    for (std::size_t in : inputs) needs = needs || nodes_.at(in).requires_grad;
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(pullback) : Pullback{}, needs, false});
    return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var out) {
    if (out.tape != this) throw NumericError("backward on a foreign variable");
    if (consumed_) throw NumericError("tape already consumed");
    const Matrix& v = nodes_.at(out.id).value;
    if (v.rows() != 1 || v.cols() != 1) throw NumericError("backward needs a scalar output, got " + shape_string(v));
    consumed_ = true;
    if (!nodes_[out.id].requires_grad) return;
    grad_buffer(out.id)(0, 0) = 1.0;
    for (std::size_t id = out.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        n.visited = true;
        if (!n.pullback || n.grad.empty()) continue;
        n.pullback(*this, id);
    }
    for (const Node& n : nodes_)
        if (!n.grad.empty() && !n.grad.all_finite()) throw NumericError("non-finite gradient");
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    const std::size_t in[] = {a.id, b.id};
    return t.record(a.value() + b.value(), in,
                    [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                        const Matrix g = tp.output_grad(self);
                        push(tp, ia, g);
                        push(tp, ib, g);
                    },
                    "add");
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    const std::size_t in[] = {a.id, b.id};
    return t.record(a.value() - b.value(), in,
                    [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                        const Matrix g = tp.output_grad(self);
                        push(tp, ia, g);
                        push(tp, ib, g * -1.0);
                    },
                    "sub");
}

Var scale(Var a, double s) {
    const std::size_t in[] = {a.id};
    return a.tape->record(a.value() * s, in,
                          [ia = a.id, s](Tape& tp, std::size_t self) {
                              push(tp, ia, tp.output_grad(self) * s);
                          },
                          "scale");
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const std::size_t in[] = {a.id, b.id};
    return t.record(arcrec::matmul(a.value(), b.value()), in,
                    [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                        const Matrix g = tp.output_grad(self);
                        const Matrix& av = tp.value(ia);
                        const Matrix& bv = tp.value(ib);
                        if (tp.requires_grad(ia)) {
                            // dA = G * B^T
                            const Matrix bt = bv.transposed();
                            kernels::gemm_accumulate(g.rows(), g.cols(), bt.cols(), g.data(),
                                                     bt.data(), tp.grad_buffer(ia).data());
                        }
                        if (tp.requires_grad(ib)) {
                            // dB = A^T * G
                            kernels::gemm_tn_accumulate(av.rows(), av.cols(), g.cols(), av.data(),
                                                        g.data(), tp.grad_buffer(ib).data());
                        }
                    },
                    "matmul");
}

Var hadamard(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "hadamard");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    const std::size_t in[] = {a.id, b.id};
    return t.record(std::move(out), in,
                    [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                        const Matrix& g = tp.output_grad(self);
                        if (tp.requires_grad(ia)) {
                            Matrix& ga = tp.grad_buffer(ia);
                            const Matrix& bv = tp.value(ib);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                        }
                        if (tp.requires_grad(ib)) {
                            Matrix& gb = tp.grad_buffer(ib);
                            const Matrix& av = tp.value(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                        }
                    },
                    "hadamard");
}

Var div(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "div");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (b.value()[i] == 0.0) throw NumericError("division by zero");
        out[i] /= b.value()[i];
    }
    const std::size_t in[] = {a.id, b.id};
    return t.record(std::move(out), in,
                    [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                        const Matrix& g = tp.output_grad(self);
                        const Matrix& av = tp.value(ia);
                        const Matrix& bv = tp.value(ib);
                        if (tp.requires_grad(ia)) {
                            Matrix& ga = tp.grad_buffer(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
                        }
                        if (tp.requires_grad(ib)) {
                            Matrix& gb = tp.grad_buffer(ib);
                            for (std::size_t i = 0; i < g.size(); ++i)
                                gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
                        }
                    },
                    "div");
}

Var transpose(Var a) {
    const std::size_t in[] = {a.id};
    return a.tape->record(a.value().transposed(), in,
                          [ia = a.id](Tape& tp, std::size_t self) {
                              push(tp, ia, tp.output_grad(self).transposed());
                          },
                          "transpose");
}

Var broadcast_rows(Var row, std::size_t m) {
    const Matrix& r = row.value();
    if (r.rows() != 1) throw NumericError("broadcast_rows needs a 1 x n row, got " + shape_string(r));
    Matrix out(m, r.cols());
    for (std::size_t i = 0; i < m; ++i) std::copy(r.data(), r.data() + r.cols(), out.row_span(i).data());
    const std::size_t in[] = {row.id};
    return row.tape->record(std::move(out), in,
                            [ia = row.id](Tape& tp, std::size_t self) {
                                const Matrix& g = tp.output_grad(self);
                                Matrix& gr = tp.grad_buffer(ia);
                                for (std::size_t i = 0; i < g.rows(); ++i)
                                    for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(i, c);
                            },
                            "broadcast_rows");
}

Var concat_cols(std::span<const Var> parts) {
    Tape& t = tape_of(parts);
    const std::size_t rows = parts.front().value().rows();
    std::size_t cols = 0;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        if (p.value().rows() != rows) throw NumericError("concat_cols row mismatch");
        cols += p.value().cols();
        ids.push_back(p.id);
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Matrix& v = p.value();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(v.row_span(r).begin(), v.row_span(r).end(), out.row_span(r).begin() + off);
        off += v.cols();
    }
    return t.record(std::move(out), ids,
                    [ids](Tape& tp, std::size_t self) {
                        const Matrix& g = tp.output_grad(self);
                        std::size_t off = 0;
                        for (std::size_t id : ids) {
                            const std::size_t w = tp.value(id).cols();
                            if (tp.requires_grad(id)) {
                                Matrix& gi = tp.grad_buffer(id);
                                for (std::size_t r = 0; r < g.rows(); ++r)
                                    for (std::size_t c = 0; c < w; ++c) gi(r, c) += g(r, off + c);
                            }
                            off += w;
                        }
                    },
                    "concat_cols");
}

Var concat_rows(std::span<const Var> parts) {
    Tape& t = tape_of(parts);
    const std::size_t cols = parts.front().value().cols();
    std::size_t rows = 0;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        if (p.value().cols() != cols) throw NumericError("concat_rows column mismatch");
        rows += p.value().rows();
        ids.push_back(p.id);
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (const Var& p : parts) {
        std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
        off += p.value().size();
    }
    return t.record(std::move(out), ids,
                    [ids](Tape& tp, std::size_t self) {
                        const Matrix& g = tp.output_grad(self);
                        std::size_t off = 0;
                        for (std::size_t id : ids) {
                            const std::size_t n = tp.value(id).size();
                            if (tp.requires_grad(id)) {
                                Matrix& gi = tp.grad_buffer(id);
                                for (std::size_t i = 0; i < n; ++i) gi[i] += g[off + i];
                            }
                            off += n;
                        }
                    },
                    "concat_rows");
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
    const Matrix& v = a.value();
    if (rows * cols != v.size()) throw NumericError("reshape size mismatch");
    const std::size_t in[] = {a.id};
    return a.tape->record(Matrix(rows, cols, v.values()), in,
                          [ia = a.id](Tape& tp, std::size_t self) {
                              const Matrix& g = tp.output_grad(self);
                              Matrix& ga = tp.grad_buffer(ia);
                              for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                          },
                          "reshape");
}

Var gather_rows(Var table, std::span<const std::size_t> rows) {
    const Matrix& v = table.value();
    Matrix out(rows.size(), v.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= v.rows()) throw NumericError("gather_rows index out of range");
        std::copy(v.row_span(rows[r]).begin(), v.row_span(rows[r]).end(), out.row_span(r).begin());
    }
    const std::size_t in[] = {table.id};
    return table.tape->record(std::move(out), in,
                              [ia = table.id, idx = std::vector<std::size_t>(rows.begin(), rows.end())](
                                  Tape& tp, std::size_t self) {
                                  const Matrix& g = tp.output_grad(self);
                                  Matrix& gt = tp.grad_buffer(ia);
                                  for (std::size_t r = 0; r < idx.size(); ++r) {
                                      auto dst = gt.row_span(idx[r]);
                                      auto src = g.row_span(r);
                                      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                                  }
                              },
                              "gather_rows");
}

Var mean_rows(Var a) {
    const Matrix& v = a.value();
    if (v.rows() == 0) throw NumericError("mean_rows of empty matrix");
    Matrix out(1, v.cols());
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t c = 0; c < v.cols(); ++c) out[c] += v(r, c);
    out *= 1.0 / static_cast<double>(v.rows());
    const std::size_t in[] = {a.id};
    return a.tape->record(std::move(out), in,
                          [ia = a.id](Tape& tp, std::size_t self) {
                              const Matrix& g = tp.output_grad(self);
                              Matrix& ga = tp.grad_buffer(ia);
                              const double inv = 1.0 / static_cast<double>(ga.rows());
                              for (std::size_t r = 0; r < ga.rows(); ++r)
                                  for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[c] * inv;
                          },
                          "mean_rows");
}

Var dot(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value()[i] * b.value()[i];
    const std::size_t in[] = {a.id, b.id};
    return t.record(Matrix::scalar(s), in,
                    [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                        const double g = tp.output_grad(self)[0];
                        if (tp.requires_grad(ia)) tp.grad_buffer(ia) += tp.value(ib) * g;
                        if (tp.requires_grad(ib)) tp.grad_buffer(ib) += tp.value(ia) * g;
                    },
                    "dot");
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const std::size_t in[] = {a.id};
    return a.tape->record(Matrix::scalar(s), in,
                          [ia = a.id](Tape& tp, std::size_t self) {
                              const double g = tp.output_grad(self)[0];
                              Matrix& ga = tp.grad_buffer(ia);
                              for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
                          },
                          "sum");
}

Var norm(Var a) {
    const double n = std::sqrt(a.value().squared_norm());
    const std::size_t in[] = {a.id};
    return a.tape->record(Matrix::scalar(n), in,
                          [ia = a.id](Tape& tp, std::size_t self) {
                              const double g = tp.output_grad(self)[0];
                              const double n = tp.value(self)[0];
                              if (n == 0.0) throw NumericError("gradient of norm at zero");
                              tp.grad_buffer(ia) += tp.value(ia) * (g / n);
                          },
                          "norm");
}

Var softmax(Var a) {
    const Matrix& v = a.value();
    if (v.empty()) throw NumericError("softmax of empty input");
    const double mx = *std::max_element(v.values().begin(), v.values().end());
    Matrix out = v;
    double z = 0.0;
    for (double& x : out.values()) {
        x = std::exp(x - mx);
        z += x;
    }
    out *= 1.0 / z;
    const std::size_t in[] = {a.id};
    return a.tape->record(std::move(out), in,
                          [ia = a.id](Tape& tp, std::size_t self) {
                              const Matrix& g = tp.output_grad(self);
                              const Matrix& s = tp.value(self);
                              double gs = 0.0;
                              for (std::size_t i = 0; i < s.size(); ++i) gs += g[i] * s[i];
                              Matrix& ga = tp.grad_buffer(ia);
                              for (std::size_t i = 0; i < s.size(); ++i) ga[i] += s[i] * (g[i] - gs);
                          },
                          "softmax");
}

Var sigmoid(Var a) {
    Matrix out = a.value();
    for (double& x : out.values()) x = stable_sigmoid(x);
    const std::size_t in[] = {a.id};
    return a.tape->record(std::move(out), in,
                          [ia = a.id](Tape& tp, std::size_t self) {
                              const Matrix& g = tp.output_grad(self);
                              const Matrix& s = tp.value(self);
                              Matrix& ga = tp.grad_buffer(ia);
                              for (std::size_t i = 0; i < s.size(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
                          },
                          "sigmoid");
}

Var log(Var a) {
    Matrix out = a.value();
    for (double& x : out.values()) {
        if (x <= 0.0) throw NumericError("log of non-positive value");
        x = std::log(x);
    }
    const std::size_t in[] = {a.id};
    return a.tape->record(std::move(out), in,
                          [ia = a.id](Tape& tp, std::size_t self) {
                              const Matrix& g = tp.output_grad(self);
                              const Matrix& x = tp.value(ia);
                              Matrix& ga = tp.grad_buffer(ia);
                              for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] / x[i];
                          },
                          "log");
}

Var log_sigmoid(Var a) {
    Matrix out = a.value();
    for (double& x : out.values()) x = stable_log_sigmoid(x);
    const std::size_t in[] = {a.id};
    return a.tape->record(std::move(out), in,
                          [ia = a.id](Tape& tp, std::size_t self) {
                              const Matrix& g = tp.output_grad(self);
                              const Matrix& x = tp.value(ia);
                              Matrix& ga = tp.grad_buffer(ia);
                              // d/dx log sigmoid(x) = sigmoid(-x)
                              for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * stable_sigmoid(-x[i]);
                          },
                          "log_sigmoid");
}

Var spmm(const SparseOperator& op, Var a) {
    const Matrix& v = a.value();
    if (op.forward.n != v.rows()) throw NumericError("spmm shape mismatch");
    Matrix out(v.rows(), v.cols());
    kernels::spmm(op.forward, v.data(), v.cols(), out.data());
    const std::size_t in[] = {a.id};
    return a.tape->record(std::move(out), in,
                          [ia = a.id, adj = &op.adjoint](Tape& tp, std::size_t self) {
                              const Matrix& g = tp.output_grad(self);
                              Matrix back(g.rows(), g.cols());
                              kernels::spmm(*adj, g.data(), g.cols(), back.data());
                              tp.grad_buffer(ia) += back;
                          },
                          "spmm");
}

}  // namespace arcrec::ad
