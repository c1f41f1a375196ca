#pragma once

// Synthetic markets with sticker-shock utilities and multinomial-logit choice.
//
//   r_ui = sum_n alpha_{u, value(i, n)} + beta_u (p_ref - p_i) + eps
//
// with p_ref the consumer's reference price: the catalog mean before the
// first purchase, then the mean price of everything bought so far.

#include "arcrec/data.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace arcrec {

struct SimConfig {
    std::uint64_t seed = 1;
    /// Desk-scale sizes; ignored when full_scale draws them from U(1000, 2000).
    std::size_t num_consumers = 300;
    std::size_t num_products = 300;
    bool full_scale = false;
    std::size_t num_attributes = 3;
    int min_levels = 3;
    int max_levels = 15;
    int min_periods = 5;
    int max_periods = 25;
    /// Variance of the Gaussian utility noise.
    double noise_variance = 0.05;
};

struct SimMarket {
    std::vector<int> levels;                           // per attribute
    std::vector<std::vector<int>> product_levels;      // [product][attribute]
    std::vector<double> prices;
    std::vector<std::vector<std::vector<double>>> alpha;  // [consumer][attribute][level]
    std::vector<double> beta;
    std::vector<int> periods;
    double mean_price = 0.0;

    std::size_t num_products() const { return prices.size(); }
    std::size_t num_consumers() const { return beta.size(); }
};

/// Throws ConfigError on non-positive sizes or inverted ranges.
void validate(const SimConfig& config);

SimMarket generate_market(const SimConfig& config);

/// Noise-free utility of product i for consumer u at reference price p_ref.
double sim_utility(const SimMarket& market, std::size_t u, std::size_t i, double reference_price);

/// Multinomial-logit probabilities (max-shifted softmax).
std::vector<double> choice_probabilities(std::span<const double> utilities);

/// Index drawn from a probability vector by inverse CDF.
std::size_t draw_choice(std::span<const double> probabilities, std::mt19937_64& rng);

/// Independent stream for one consumer.
std::mt19937_64 consumer_stream(std::uint64_t seed, std::size_t consumer);

struct ConsumerTrace {
    std::vector<std::size_t> purchases;
    /// Reference price in force at each period, before that period's choice.
    std::vector<double> reference_prices;
    /// Reference price for the held-out evaluation period.
    double final_reference_price = 0.0;
};

/// Runs one consumer's active periods.
ConsumerTrace simulate_consumer(const SimMarket& market, std::size_t u, const SimConfig& config);

struct SimTruth {
    /// [consumer][product], noise-free, for the extra evaluation period.
    std::vector<std::vector<double>> utility;
    std::vector<std::vector<double>> probability;
    /// [consumer] products by descending true utility.
    std::vector<std::vector<std::size_t>> ranking;
};

struct SimResult {
    ProductCatalog catalog;
    TransactionLog log;
    SimTruth truth;
    std::vector<ConsumerTrace> traces;
};

SimResult simulate(const SimMarket& market, const SimConfig& config);

std::vector<std::string> sim_product_ids(std::size_t n);
std::vector<std::string> sim_consumer_ids(std::size_t n);

/// truth.csv: consumer_id,product_id,true_utility,true_prob,true_rank.
void write_truth(std::ostream& out, const SimResult& result);
/// sensitivity.csv: consumer_id,sensitivity (|beta_u|).
void write_sensitivity(std::ostream& out, const SimMarket& market, const SimResult& result);

struct TruthTable {
    /// [consumer in log order][rank] product index; consumers absent from the
    /// file get an empty ranking.
    std::vector<std::vector<std::size_t>> ranking;
};

TruthTable read_truth(std::istream& in, const ProductCatalog& catalog, const TransactionLog& log,
                      const std::string& source = "truth");

/// Per consumer in log order; throws DataError when a consumer is missing.
std::vector<double> read_sensitivity(std::istream& in, const TransactionLog& log,
                                     const std::string& source = "sensitivity");

}  // namespace arcrec
