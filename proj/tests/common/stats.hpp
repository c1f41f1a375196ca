#pragma once

#include <cmath>
#include <span>

namespace testing {

/// Upper tail P(X > x) of a chi-square variable with k degrees of freedom
/// (regularized upper incomplete gamma, series below a+1, continued fraction above).
inline double chi2_upper_tail(double x, double k) {
    const double a = k / 2.0, z = x / 2.0;
    if (z <= 0) return 1.0;
    const double lg = std::lgamma(a);
    if (z < a + 1) {
        double sum = 1.0 / a, term = sum;
        for (int n = 1; n < 1000; ++n) {
            term *= z / (a + n);
            sum += term;
            if (term < sum * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-z + a * std::log(z) - lg);
    }
    double b = z + 1 - a, c = 1e300, d = 1 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1) < 1e-15) break;
    }
    return std::exp(-z + a * std::log(z) - lg) * h;
}

/// Pearson statistic and p-value of observed counts against expected
/// probabilities; cells with expected count < 5 are pooled.
struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    double p = 1.0;
};

inline ChiSquare chi_square(std::span<const double> counts, std::span<const double> probs) {
    double total = 0.0;
    for (double c : counts) total += c;
    ChiSquare r;
    double pooled_obs = 0.0, pooled_exp = 0.0;
    int cells = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = probs[i] * total;
        if (e < 5.0) {
            pooled_obs += counts[i];
            pooled_exp += e;
            continue;
        }
        r.statistic += (counts[i] - e) * (counts[i] - e) / e;
        ++cells;
    }
    if (pooled_exp > 0.0) {
        r.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        ++cells;
    }
    r.dof = cells - 1;
    r.p = chi2_upper_tail(r.statistic, r.dof);
    return r;
}

}  // namespace testing
