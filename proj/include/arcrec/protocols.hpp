#pragma once

// Evaluation protocols: leave-last-one-out ranking, rank correlation against
// simulated truth, cold-start products, and the price-treatment experiment.

#include "arcrec/data.hpp"
#include "arcrec/model.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace arcrec {

/// Distinct items of a time-ordered history, ordered by their last purchase.
std::vector<std::size_t> distinct_by_last_purchase(std::span<const std::size_t> history);

struct ConsumerSplit {
    std::size_t consumer = 0;
    std::vector<std::size_t> train;
    std::optional<std::size_t> validation;
    std::size_t test = 0;
};

struct LooSplit {
    std::vector<ConsumerSplit> consumers;
    /// Per log consumer, training items (empty for excluded consumers).
    std::vector<std::vector<std::size_t>> train_items;
    /// Purchases of training items only; source of the graphs.
    TransactionLog train_log;
};

/// Last distinct item -> test, the one before -> validation, the rest ->
/// train. Consumers with fewer than two distinct items are excluded; with
/// exactly two there is no validation item.
LooSplit leave_last_one_out_split(const TransactionLog& log);

/// Scores one consumer's candidates. Price-independent work happens once in
/// Scorer::prepare; score() may then be called under many price vectors.
class PreparedConsumer {
public:
    virtual ~PreparedConsumer() = default;
    /// One score per candidate; raw_prices is indexed by product.
    virtual std::vector<double> score(std::span<const double> raw_prices) const = 0;
};

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual std::unique_ptr<PreparedConsumer> prepare(std::size_t consumer, std::span<const std::size_t> refs,
                                                      std::span<const std::size_t> candidates) const = 0;
    std::vector<double> score(std::size_t consumer, std::span<const std::size_t> refs,
                              std::span<const std::size_t> candidates, std::span<const double> raw_prices) const {
        return prepare(consumer, refs, candidates)->score(raw_prices);
    }
};

/// ArcRec utility over fixed per-layer tables h^k.
class ArcRecScorer : public Scorer {
public:
    ArcRecScorer(std::vector<Matrix> tables, PreferenceNet alpha, PreferenceNet beta, PriceSpace prices,
                 ModelConfig config);
    static ArcRecScorer from_model(const ArcRecModel& model, const PriceSpace& prices);

    std::unique_ptr<PreparedConsumer> prepare(std::size_t consumer, std::span<const std::size_t> refs,
                                              std::span<const std::size_t> candidates) const override;

    /// Normalized AWTP row of a reference set (uniform when AWTP is off).
    std::vector<double> awtp(std::span<const std::size_t> refs, std::span<const double> raw_prices) const;
    /// AWTP-weighted mean MLP_b output over all pairs of the reference set.
    double price_sensitivity(std::span<const std::size_t> refs, std::span<const double> raw_prices) const;

    const std::vector<Matrix>& tables() const { return tables_; }
    const PreferenceNet& alpha() const { return alpha_; }
    const PreferenceNet& beta() const { return beta_; }
    const PriceSpace& prices() const { return prices_; }
    const ModelConfig& config() const { return config_; }

private:
    std::vector<Matrix> tables_;
    PreferenceNet alpha_;
    PreferenceNet beta_;
    PriceSpace prices_;
    ModelConfig config_;
};

/// 1-based rank of candidates[target_pos] under descending scores, ties to
/// the smaller product index.
std::size_t rank_in(std::span<const std::size_t> candidates, std::span<const double> scores, std::size_t target_pos);

struct RankingReport {
    std::map<std::size_t, double> hr;
    std::map<std::size_t, double> ndcg;
    std::size_t consumers = 0;
};

enum class HeldOut { validation, test };

/// Candidates: every product except the consumer's training items.
/// References: the training items.
RankingReport evaluate_ranking(const Scorer& scorer, const LooSplit& split, std::span<const double> raw_prices,
                               std::size_t num_products, HeldOut which, std::span<const std::size_t> ks);

struct CorrelationReport {
    double tau = 0.0;
    double rho = 0.0;
    std::size_t consumers = 0;
};

/// Mean Kendall tau / Spearman rho between the predicted ranking of the
/// full assortment and truth[u], for consumers with references and truth.
CorrelationReport evaluate_correlation(const Scorer& scorer, const std::vector<std::vector<std::size_t>>& refs,
                                       const std::vector<std::vector<std::size_t>>& truth,
                                       std::span<const double> raw_prices, std::size_t num_products);

struct ColdStartSetup {
    std::vector<std::size_t> cold;  // indices in the full catalog
    std::vector<std::optional<std::size_t>> full_to_warm;
    ProductCatalog warm_catalog;
    TransactionLog warm_log;
};

/// Holds out round(fraction * |V|) products chosen uniformly at random.
ColdStartSetup hold_out_products(const ProductCatalog& catalog, const TransactionLog& log, double fraction,
                                 std::uint64_t seed);
/// Setup for an explicit list of held-out products.
ColdStartSetup hold_out_products(const ProductCatalog& catalog, const TransactionLog& log,
                                 std::vector<std::size_t> cold);

/// Tables extended by one mean-pooled row per cold product, in setup.cold order.
std::vector<Matrix> extend_with_cold(const std::vector<Matrix>& warm_tables, const ColdStartSetup& setup,
                                     const ProductCatalog& full_catalog);

struct ColdStartReport {
    RankingReport ranking;
    std::size_t cold_products = 0;
    /// K / #cold per K (capped at 1).
    std::map<std::size_t, double> random_hr;
};

/// Each consumer who bought a cold product is scored on their last cold
/// purchase, ranked among all cold products, with their warm purchases as
/// references. `scorer` must use tables from extend_with_cold.
ColdStartReport evaluate_cold_start(const Scorer& scorer, const ColdStartSetup& setup,
                                    const TransactionLog& full_log, const ProductCatalog& full_catalog,
                                    std::span<const std::size_t> ks);

struct TreatmentConfig {
    std::size_t group_size = 50;
    std::size_t candidates = 30;
    std::size_t repetitions = 30;
    std::vector<double> treatments{-0.10, 0.10};
    /// Consumers at or below this sensitivity quantile form the low group.
    double group_quantile = 0.5;
    /// Rank within the whole assortment instead of the candidate set.
    bool full_assortment = false;
    std::uint64_t seed = 1;
};

struct TreatmentRow {
    std::size_t repetition = 0;
    double treatment = 0.0;
    std::string group;  // "low" or "high"
    double ate = 0.0;
};

struct TreatmentSummary {
    double treatment = 0.0;
    std::string group;
    double mean = 0.0;
    double stddev = 0.0;
};

struct TreatmentReport {
    /// Consumers per group actually used (below the configured size when a
    /// sensitivity pool is short).
    std::size_t group_size = 0;
    std::vector<TreatmentRow> rows;
    std::vector<TreatmentSummary> summary;

    const TreatmentSummary& find(double treatment, const std::string& group) const;
};

/// TE(u, i) = rank of i under p_i (1 + treatment) minus rank under p_i.
/// Consumers without references are not sampled.
TreatmentReport treatment_experiment(const Scorer& scorer, const std::vector<std::vector<std::size_t>>& refs,
                                     std::span<const double> sensitivity, std::span<const double> raw_prices,
                                     const TreatmentConfig& config);

void write_treatment_csv(std::ostream& out, const TreatmentReport& report);

}  // namespace arcrec
