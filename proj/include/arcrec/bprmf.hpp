#pragma once

// Matrix-factorization baseline: score(u, i) = <x_u, y_i>, trained with the
// same BPR objective, sampler and optimizer as the main model.

#include "arcrec/protocols.hpp"
#include "arcrec/training.hpp"

#include <functional>

namespace arcrec {

struct BprMfConfig {
    std::size_t dim = 64;
    double init_std = 0.1;
};

class BprMf {
public:
    BprMf(std::size_t num_consumers, std::size_t num_products, BprMfConfig config, std::uint64_t seed);

    double score(std::size_t consumer, std::size_t product) const;
    std::size_t num_consumers() const { return users.rows(); }
    std::size_t num_products() const { return items.rows(); }

    Matrix users;
    Matrix items;
};

/// Loss and gradients (users, items) of one batch including the L2 term.
BatchGradient bprmf_batch_gradient(const BprMf& model, std::span<const Triplet> batch, double l2);

TrainResult train_bprmf(BprMf& model, std::span<const std::vector<std::size_t>> items, const TrainConfig& config,
                        const std::function<ValidationScore(const BprMf&)>& validator = {},
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

class BprMfScorer : public Scorer {
public:
    explicit BprMfScorer(const BprMf& model) : model_(model) {}
    std::unique_ptr<PreparedConsumer> prepare(std::size_t consumer, std::span<const std::size_t> refs,
                                              std::span<const std::size_t> candidates) const override;

private:
    const BprMf& model_;
};

}  // namespace arcrec
