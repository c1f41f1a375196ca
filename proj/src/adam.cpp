#include "arcrec/adam.hpp"

#include <cmath>

namespace arcrec {

void Adam::step(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    if (params.size() != grads.size()) throw NumericError("adam: parameter/gradient count mismatch");
    if (m_.empty()) {
        for (const Matrix* p : params) {
            m_.emplace_back(p->rows(), p->cols());
            v_.emplace_back(p->rows(), p->cols());
        }
    }
    if (m_.size() != params.size()) throw NumericError("adam: parameter count changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(*params[i], *grads[i], "adam gradient");
        require_same_shape(*params[i], m_[i], "adam state");
        if (!grads[i]->all_finite()) throw NumericError("adam: non-finite gradient");
    }

    ++steps_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double lr = options_.learning_rate;
    const double eps = options_.epsilon;

    for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i]->data();
        const double* g = grads[i]->data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        const std::size_t n = params[i]->size();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace arcrec
