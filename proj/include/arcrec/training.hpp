#pragma once

// Pairwise (BPR) training of the reference-dependent utility with Adam.

#include "arcrec/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace arcrec {

struct TrainConfig {
    std::size_t batch_size = 500;
    double learning_rate = 0.003;
    double l2 = 1e-4;
    int max_epochs = 100;
    /// Epochs without a validation improvement before stopping; 0 disables.
    int patience = 10;
    /// Validate every n-th epoch (and on the last one).
    int validate_every = 1;
    std::uint64_t seed = 1;
};

struct Triplet {
    std::size_t consumer = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
};

/// Draws triplets: consumer uniform over the eligible ones (at least two
/// training items and at least one unpurchased product), positive uniform
/// over the consumer's items, negative uniform over the rest of the catalog.
/// `items[u]` need not be sorted.
class TripletSampler {
public:
    TripletSampler(std::span<const std::vector<std::size_t>> items, std::size_t num_products);

    Triplet draw(std::mt19937_64& rng) const;
    std::vector<Triplet> sample(std::size_t count, std::mt19937_64& rng) const;

    const std::vector<std::size_t>& eligible() const { return eligible_; }
    bool empty() const { return eligible_.empty(); }

private:
    std::size_t num_products_;
    std::vector<std::vector<std::size_t>> sorted_;
    std::vector<std::vector<std::size_t>> items_;
    std::vector<std::size_t> eligible_;
};

/// -log sigmoid(positive - negative).
double bpr_term(double positive, double negative);

/// Sum of bpr_term over pairs plus l2 * squared_norm.
double bpr_loss(std::span<const double> positive, std::span<const double> negative, double squared_norm,
                double l2);

/// What the trainer needs to know about one consumer.
struct TrainingData {
    /// Per consumer, distinct training items in time order.
    std::vector<std::vector<std::size_t>> items;
    PriceSpace prices;
};

struct EpochRecord {
    int epoch = 0;
    /// Mean per-triplet BPR term over the epoch.
    double loss = 0.0;
    std::optional<double> val_hr10;
    std::optional<double> val_ndcg10;
};

struct ValidationScore {
    double hr10 = 0.0;
    double ndcg10 = 0.0;
};

using Validator = std::function<ValidationScore(const ArcRecModel&)>;

struct TrainResult {
    std::vector<EpochRecord> curve;
    int best_epoch = 0;
    std::optional<ValidationScore> best;
};

/// Loss and gradients of one batch, matching bpr_loss on the same triplets.
struct BatchGradient {
    double data_loss = 0.0;
    double loss = 0.0;
    std::vector<Matrix> grads;  // ordered as ModelParams::tensors()
};

/// Reference set of a triplet: the consumer's most recent `cap` items minus
/// the positive.
std::vector<std::size_t> triplet_references(std::span<const std::size_t> items, std::size_t cap,
                                            std::size_t positive);

BatchGradient batch_gradient(const ArcRecModel& model, const TrainingData& data, std::span<const Triplet> batch,
                             double l2);

/// Same quantity built as one tape from the base embeddings; slow, for tests.
BatchGradient batch_gradient_reference(const ArcRecModel& model, const TrainingData& data,
                                       std::span<const Triplet> batch, double l2);

/// Runs BPR training in place. When a validator is given, the parameters of
/// the best validation epoch are restored at the end.
TrainResult train(ArcRecModel& model, const TrainingData& data, const TrainConfig& config,
                  const Validator& validator = {},
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace arcrec
