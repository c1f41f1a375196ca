#pragma once

#include "arcrec/matrix.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace arcrec {

struct AdamOptions {
    double learning_rate = 0.003;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed list of parameter matrices.
class Adam {
public:
    Adam() = default;
    explicit Adam(AdamOptions options) : options_(options) {}

    /// Applies one update. params and grads must keep the same shapes on
    /// every call; the moment buffers are sized on the first call.
    void step(std::span<Matrix* const> params, std::span<const Matrix* const> grads);

    std::uint64_t steps() const { return steps_; }
    const AdamOptions& options() const { return options_; }
    void set_learning_rate(double lr) { options_.learning_rate = lr; }

    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }

private:
    AdamOptions options_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::uint64_t steps_ = 0;
};

}  // namespace arcrec
