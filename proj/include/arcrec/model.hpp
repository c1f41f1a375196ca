#pragma once

// Reference-dependent utility.
//
// For consumer u with reference products R (past purchases) and a target i:
//
//   r_ui = sum_{j in R} gamma_ij sum_k I_uk ( MLP_a(h_i^k . h_j^k)
//                                           + MLP_b(h_i^k . h_j^k) (p_j - p_i) )
//
// gamma_i. is a softmax over R of <h_i^*, h_j^*> (h^* concatenates the K
// attribute embeddings) and I_u. is the softmax-normalized attribute-level
// willingness-to-pay (AWTP) score derived from the spread of the consumer's
// purchases around their center point.

#include "arcrec/graphs.hpp"
#include "arcrec/kernels.hpp"
#include "arcrec/matrix.hpp"
#include "arcrec/sparse.hpp"
#include "arcrec/tape.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace arcrec {

/// One hidden layer of sigmoid units and a linear scalar output.
struct PreferenceNet {
    Matrix w1;  // in x hidden
    Matrix b1;  // 1 x hidden
    Matrix w2;  // hidden x 1
    Matrix b2;  // 1 x 1

    static PreferenceNet random(std::size_t in, std::size_t hidden, std::mt19937_64& rng);

    double forward(std::span<const double> x) const;
    kernels::MlpView view() const;
    std::size_t in_dim() const { return w1.rows(); }
};

struct AblationConfig {
    /// false: h^k = e^k ("w/o Net").
    bool use_arn_propagation = true;
    /// false: every layer uses the raw reference network ("REF" variant).
    bool decompose_by_attribute = true;
    /// false: I_uk = 1/K ("w/o AWTP").
    bool use_awtp = true;
};

struct ModelConfig {
    std::size_t dim = 64;
    int depth = 2;
    std::size_t reference_cap = 50;
    double init_std = 0.1;
    /// Let gradients flow through the AWTP weights instead of detaching them.
    bool awtp_gradient = false;
    AblationConfig ablation;
};

/// Trainable state: one base embedding table per attributed network plus the
/// interest (alpha) and price (beta) preference networks.
struct ModelParams {
    std::vector<Matrix> embeddings;
    PreferenceNet alpha;
    PreferenceNet beta;

    /// Stable ordering of every trainable matrix.
    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;
    double squared_norm() const;
};

/// Prices as they enter the model. The utility uses `utility` (optionally
/// standardized); AWTP ratios use `raw`, which keeps them shift-free.
struct PriceSpace {
    std::vector<double> raw;
    std::vector<double> utility;
    bool standardized = false;
    double mean = 0.0;
    double stddev = 1.0;

    static PriceSpace make(std::vector<double> raw, bool standardize);
    /// Same transform applied to a new raw price vector.
    PriceSpace with_raw(std::vector<double> new_raw) const;
    double to_utility(double raw_price) const {
        return standardized ? (raw_price - mean) / stddev : raw_price;
    }
};

struct ConsumerCenter {
    std::vector<Matrix> embedding;  // per layer, 1 x d
    double price = 0.0;
};

struct AwtpRow {
    std::vector<double> raw;
    std::vector<double> normalized;
};

/// Floors of the AWTP ratio terms.
inline constexpr double kAwtpEpsilon = 1e-8;

/// Attention of target row h_target (1 x Kd) over reference rows (m x Kd).
std::vector<double> attention_weights(std::span<const double> target, const Matrix& references);

/// MLP_a(h_i . h_j) + MLP_b(h_i . h_j) (p_j - p_i).
double pair_utility(const PreferenceNet& alpha, const PreferenceNet& beta, std::span<const double> h_i,
                    std::span<const double> h_j, double p_i, double p_j);

ConsumerCenter consumer_center(std::span<const std::size_t> refs, const std::vector<Matrix>& tables,
                               std::span<const double> prices);

/// prices are indexed by product.
AwtpRow awtp_scores(std::span<const std::size_t> refs, const std::vector<Matrix>& tables,
                    std::span<const double> prices);

/// Uniform 1/K weights.
std::vector<double> uniform_awtp(std::size_t num_layers);

/// Numerically stable softmax of a vector.
std::vector<double> softmax(std::span<const double> x);

/// Straight evaluation of r_ui. `refs` must not contain `target`.
double utility(const std::vector<Matrix>& tables, const PreferenceNet& alpha, const PreferenceNet& beta,
               std::span<const double> prices, std::span<const std::size_t> refs, std::size_t target,
               std::span<const double> awtp);

/// `refs` with `target` removed (order kept).
std::vector<std::size_t> exclude_target(std::span<const std::size_t> refs, std::size_t target);

/// The last `cap` entries of a time-ordered item list.
std::vector<std::size_t> most_recent(std::span<const std::size_t> items, std::size_t cap);

// ---- differentiable forms -------------------------------------------------

struct TapeNet {
    ad::Var w1, b1, w2, b2;
};

TapeNet net_on_tape(ad::Tape& tape, const PreferenceNet& net);
ad::Var mlp_on_tape(const TapeNet& net, ad::Var x);

/// r_ui on a tape. `layers[k]` holds rows of h^k; `target` and `refs` index
/// those rows; `ref_prices` / `target_price` are the matching utility prices.
/// `awtp` is a 1 x K row (constant or differentiable).
ad::Var utility_on_tape(std::span<const ad::Var> layers, std::size_t target,
                        std::span<const std::size_t> refs, double target_price,
                        std::span<const double> ref_prices, ad::Var awtp, const TapeNet& alpha,
                        const TapeNet& beta);

/// AWTP weights (1 x K) on a tape, same floors as awtp_scores.
/// raw_prices[r] is the raw price of refs[r].
ad::Var awtp_on_tape(std::span<const ad::Var> layers, std::span<const std::size_t> refs,
                     std::span<const double> raw_prices);

// ---- model ----------------------------------------------------------------

class ArcRecModel {
public:
    ArcRecModel(ModelConfig config, const AttributedAdjacency& graphs, std::uint64_t seed);
    /// Restores a model from saved parameters.
    ArcRecModel(ModelConfig config, const AttributedAdjacency& graphs, ModelParams params);

    const ModelConfig& config() const { return config_; }
    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }
    std::size_t num_layers() const { return operators_.size(); }
    std::size_t num_products() const { return num_products_; }
    const std::vector<SparseOperator>& operators() const { return operators_; }

    /// h^k for every layer under the current parameters.
    std::vector<Matrix> tables() const;
    /// Maps d(loss)/d(h^k) to d(loss)/d(e^k).
    std::vector<Matrix> tables_adjoint(const std::vector<Matrix>& grad_tables) const;

private:
    ModelConfig config_;
    std::size_t num_products_ = 0;
    std::vector<SparseOperator> operators_;
    ModelParams params_;
};

/// Cached MLP outputs for every (target, reference) pair of one scoring
/// round. Pair outputs depend on embeddings only, so repricing a product
/// reuses the cache.
class PairCache {
public:
    PairCache(const std::vector<Matrix>& tables, const PreferenceNet& alpha, const PreferenceNet& beta,
              std::vector<std::size_t> targets, std::vector<std::size_t> refs);

    double interest(std::size_t k, std::size_t target, std::size_t ref) const;
    double price_weight(std::size_t k, std::size_t target, std::size_t ref) const;
    bool has_target(std::size_t t) const { return target_pos_[t] != kMissing; }

private:
    static constexpr std::size_t kMissing = static_cast<std::size_t>(-1);
    std::size_t num_refs_ = 0;
    std::vector<std::size_t> target_pos_;
    std::vector<std::size_t> ref_pos_;
    std::vector<std::vector<double>> a_;
    std::vector<std::vector<double>> b_;
};

/// Scores candidates for one consumer from precomputed tables and pair cache.
/// Candidates present in `refs` are scored against refs minus themselves.
std::vector<double> score_candidates(const std::vector<Matrix>& tables, const PairCache& cache,
                                     std::span<const double> prices, std::span<const std::size_t> refs,
                                     std::span<const double> awtp, std::span<const std::size_t> candidates);

}  // namespace arcrec
