#pragma once

#include "arcrec/matrix.hpp"
#include "arcrec/tape.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace testing {

inline arcrec::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    arcrec::Matrix m(r, c);
    for (double& v : m.values()) v = nd(rng);
    return m;
}

/// True when analytic and numeric derivatives agree to relative tolerance
/// `rel`, with an absolute floor for entries near zero.
inline bool close(double analytic, double numeric, double rel = 1e-4, double floor = 1e-8) {
    return std::abs(analytic - numeric) <= rel * std::max(std::abs(analytic), std::abs(numeric)) + floor;
}

/// Central-difference check of a scalar function of several matrices built
/// on a tape. `build` receives leaf vars and returns a 1 x 1 output.
/// Returns the number of mismatching partials.
inline int check_gradient(std::vector<arcrec::Matrix> inputs,
                          const std::function<arcrec::ad::Var(arcrec::ad::Tape&, std::vector<arcrec::ad::Var>&)>& build,
                          double h = 1e-5, double rel = 1e-4) {
    using namespace arcrec;
    std::vector<Matrix> analytic;
    {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m));
        const ad::Var out = build(tape, leaves);
        tape.backward(out);
        for (const auto& l : leaves) analytic.push_back(l.grad());
    }
    auto eval = [&](const std::vector<Matrix>& xs) {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        for (const Matrix& m : xs) leaves.push_back(tape.leaf(m));
        return build(tape, leaves).value().scalar_value();
    };
    int bad = 0;
    for (std::size_t p = 0; p < inputs.size(); ++p)
        for (std::size_t e = 0; e < inputs[p].size(); ++e) {
            const double keep = inputs[p][e];
            inputs[p][e] = keep + h;
            const double up = eval(inputs);
            inputs[p][e] = keep - h;
            const double down = eval(inputs);
            inputs[p][e] = keep;
            if (!close(analytic[p][e], (up - down) / (2 * h), rel)) ++bad;
        }
    return bad;
}

}  // namespace testing
