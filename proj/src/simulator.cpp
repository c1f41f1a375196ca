#include "arcrec/simulator.hpp"

#include "arcrec/csv.hpp"
#include "arcrec/kernels.hpp"
#include "arcrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>

namespace arcrec {

namespace {

constexpr std::int64_t kPeriodSeconds = 86400;

std::vector<std::string> padded_ids(char prefix, std::size_t n) {
    const std::size_t width = std::to_string(n).size();
    std::vector<std::string> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string num = std::to_string(i + 1);
        out[i] = std::string(1, prefix) + std::string(width - num.size(), '0') + num;
    }
    return out;
}

std::vector<double> noise_free_utilities(const SimMarket& market, std::size_t u, double reference_price) {
    std::vector<double> r(market.num_products());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = sim_utility(market, u, i, reference_price);
    return r;
}

}  // namespace

void validate(const SimConfig& c) {
    if (!c.full_scale && (c.num_consumers == 0 || c.num_products == 0))
        throw ConfigError("simulation sizes must be positive");
    if (c.num_attributes == 0) throw ConfigError("simulation needs at least one attribute");
    if (c.min_levels < 1 || c.max_levels < c.min_levels) throw ConfigError("invalid attribute level range");
    if (c.min_periods < 1 || c.max_periods < c.min_periods) throw ConfigError("invalid active period range");
    if (!(c.noise_variance >= 0.0)) throw ConfigError("noise variance must be non-negative");
}

std::vector<std::string> sim_product_ids(std::size_t n) { return padded_ids('p', n); }
std::vector<std::string> sim_consumer_ids(std::size_t n) { return padded_ids('c', n); }

SimMarket generate_market(const SimConfig& config) {
    validate(config);
    std::mt19937_64 rng(config.seed);
    std::size_t num_consumers = config.num_consumers;
    std::size_t num_products = config.num_products;
    if (config.full_scale) {
        std::uniform_int_distribution<std::size_t> size(1000, 2000);
        num_consumers = size(rng);
        num_products = size(rng);
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    SimMarket m;
    std::uniform_int_distribution<int> level_count(config.min_levels, config.max_levels);
    for (std::size_t n = 0; n < config.num_attributes; ++n) m.levels.push_back(level_count(rng));

    m.product_levels.resize(num_products);
    m.prices.resize(num_products);
    for (std::size_t i = 0; i < num_products; ++i) {
        for (int levels : m.levels)
            m.product_levels[i].push_back(std::uniform_int_distribution<int>(0, levels - 1)(rng));
        m.prices[i] = std::exp(normal(rng));
    }
    m.mean_price = std::accumulate(m.prices.begin(), m.prices.end(), 0.0) / static_cast<double>(num_products);

    std::uniform_int_distribution<int> period_count(config.min_periods, config.max_periods);
    m.alpha.resize(num_consumers);
    for (std::size_t u = 0; u < num_consumers; ++u) {
        for (int levels : m.levels) {
            std::vector<double> a(static_cast<std::size_t>(levels));
            for (double& x : a) x = normal(rng);
            m.alpha[u].push_back(std::move(a));
        }
        m.beta.push_back(-std::exp(normal(rng)));
        m.periods.push_back(period_count(rng));
    }
    return m;
}

double sim_utility(const SimMarket& market, std::size_t u, std::size_t i, double reference_price) {
    double r = 0.0;
    const auto& levels = market.product_levels[i];
    for (std::size_t n = 0; n < levels.size(); ++n) r += market.alpha[u][n][static_cast<std::size_t>(levels[n])];
    return r + market.beta[u] * (reference_price - market.prices[i]);
}

std::vector<double> choice_probabilities(std::span<const double> utilities) {
    if (utilities.empty()) throw NumericError("choice over an empty assortment");
    for (double x : utilities)
        if (!std::isfinite(x)) throw NumericError("non-finite utility in choice model");
    const double mx = *std::max_element(utilities.begin(), utilities.end());
    std::vector<double> p(utilities.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(utilities[i] - mx));
    for (double& x : p) x /= z;
    return p;
}

std::size_t draw_choice(std::span<const double> probabilities, std::mt19937_64& rng) {
    const double x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        acc += probabilities[i];
        if (x < acc) return i;
    }
    // Rounding can leave the cumulative sum a hair below 1.
    for (std::size_t i = probabilities.size(); i-- > 0;)
        if (probabilities[i] > 0.0) return i;
    return probabilities.size() - 1;
}

std::mt19937_64 consumer_stream(std::uint64_t seed, std::size_t consumer) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(consumer), static_cast<std::uint32_t>(consumer >> 32),
                      0x51u};
    return std::mt19937_64(seq);
}

ConsumerTrace simulate_consumer(const SimMarket& market, std::size_t u, const SimConfig& config) {
    auto rng = consumer_stream(config.seed, u);
    std::normal_distribution<double> noise(0.0, std::sqrt(config.noise_variance));
    ConsumerTrace trace;
    double reference = market.mean_price;
    double spent = 0.0;
    std::vector<double> r(market.num_products());
    for (int t = 0; t < market.periods[u]; ++t) {
        trace.reference_prices.push_back(reference);
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double eps = config.noise_variance > 0.0 ? noise(rng) : 0.0;
            r[i] = sim_utility(market, u, i, reference) + eps;
        }
        const std::size_t choice = draw_choice(choice_probabilities(r), rng);
        trace.purchases.push_back(choice);
        spent += market.prices[choice];
        reference = spent / static_cast<double>(trace.purchases.size());
    }
    trace.final_reference_price = reference;
    return trace;
}

SimResult simulate(const SimMarket& market, const SimConfig& config) {
    const std::size_t nu = market.num_consumers();
    const std::size_t nv = market.num_products();
    SimResult out;

    std::vector<std::string> attr_names;
    for (std::size_t n = 0; n < market.levels.size(); ++n) attr_names.push_back("attr_" + std::to_string(n + 1));
    const auto pids = sim_product_ids(nv);
    std::vector<ProductCatalog::Entry> entries;
    for (std::size_t i = 0; i < nv; ++i) {
        ProductCatalog::Entry e{pids[i], market.prices[i], {}};
        for (int level : market.product_levels[i]) e.attributes.push_back("v" + std::to_string(level + 1));
        entries.push_back(std::move(e));
    }
    out.catalog = ProductCatalog(attr_names, std::move(entries));

    out.traces.resize(nu);
    out.truth.utility.resize(nu);
    out.truth.probability.resize(nu);
    out.truth.ranking.resize(nu);
    std::vector<std::size_t> all(nv);
    std::iota(all.begin(), all.end(), 0);
#pragma omp parallel for schedule(dynamic, 4) num_threads(kernels::workers())
    for (std::ptrdiff_t su = 0; su < static_cast<std::ptrdiff_t>(nu); ++su) {
        const auto u = static_cast<std::size_t>(su);
        out.traces[u] = simulate_consumer(market, u, config);
        out.truth.utility[u] = noise_free_utilities(market, u, out.traces[u].final_reference_price);
        out.truth.probability[u] = choice_probabilities(out.truth.utility[u]);
        out.truth.ranking[u] = rank_by_score(all, out.truth.utility[u]);
    }

    std::vector<Interaction> records;
    for (std::size_t u = 0; u < nu; ++u)
        for (std::size_t t = 0; t < out.traces[u].purchases.size(); ++t)
            records.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(out.traces[u].purchases[t]),
                               static_cast<std::int64_t>(t + 1) * kPeriodSeconds});
    out.log = TransactionLog(sim_consumer_ids(nu), std::move(records));
    return out;
}

void write_truth(std::ostream& out, const SimResult& result) {
    const auto& ids = result.catalog.ids();
    out << "consumer_id,product_id,true_utility,true_prob,true_rank\n";
    for (std::size_t u = 0; u < result.truth.utility.size(); ++u) {
        const auto rank = positions(result.truth.ranking[u], ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            out << result.log.consumer_ids()[u] << ',' << ids[i] << ',' << format_double(result.truth.utility[u][i])
                << ',' << format_double(result.truth.probability[u][i]) << ',' << rank[i] << '\n';
    }
}

void write_sensitivity(std::ostream& out, const SimMarket& market, const SimResult& result) {
    out << "consumer_id,sensitivity\n";
    for (std::size_t u = 0; u < market.num_consumers(); ++u)
        out << result.log.consumer_ids()[u] << ',' << format_double(-market.beta[u]) << '\n';
}

TruthTable read_truth(std::istream& in, const ProductCatalog& catalog, const TransactionLog& log,
                      const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty file");
    const auto header = csv::split_line(line);
    const std::vector<std::string> expected{"consumer_id", "product_id", "true_utility", "true_prob", "true_rank"};
    if (header != expected) throw DataError(source + ": unexpected header");
    // rank_of[u][i] = 1-based true rank.
    std::vector<std::vector<std::size_t>> rank_of(log.num_consumers());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split_line(line);
        const std::string loc = csv::where(source, lineno);
        if (f.size() != expected.size()) throw DataError(loc + ": expected 5 fields");
        const auto u = log.find_consumer(f[0]);
        if (!u) continue;  // consumer without purchases
        const auto i = catalog.find(f[1]);
        if (!i) throw DataError(loc + ": unknown product_id " + f[1]);
        const std::int64_t rank = csv::parse_int(f[4], loc);
        if (rank < 1 || static_cast<std::size_t>(rank) > catalog.size()) throw DataError(loc + ": rank out of range");
        auto& row = rank_of[*u];
        if (row.empty()) row.assign(catalog.size(), 0);
        row[*i] = static_cast<std::size_t>(rank);
    }
    TruthTable table;
    table.ranking.resize(log.num_consumers());
    for (std::size_t u = 0; u < rank_of.size(); ++u) {
        if (rank_of[u].empty()) continue;
        std::vector<std::size_t> order(catalog.size(), catalog.size());
        for (std::size_t i = 0; i < catalog.size(); ++i) {
            const std::size_t r = rank_of[u][i];
            if (r == 0 || order[r - 1] != catalog.size())
                throw DataError(source + ": ranking of consumer " + log.consumer_ids()[u] + " is not a permutation");
            order[r - 1] = i;
        }
        table.ranking[u] = std::move(order);
    }
    return table;
}

std::vector<double> read_sensitivity(std::istream& in, const TransactionLog& log, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty file");
    const auto header = csv::split_line(line);
    if (header.size() != 2 || header[0] != "consumer_id")
        throw DataError(source + ": expected header consumer_id,sensitivity");
    std::vector<double> out(log.num_consumers(), std::nan(""));
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split_line(line);
        const std::string loc = csv::where(source, lineno);
        if (f.size() != 2) throw DataError(loc + ": expected 2 fields");
        if (const auto u = log.find_consumer(f[0])) out[*u] = std::abs(csv::parse_double(f[1], loc));
    }
    for (std::size_t u = 0; u < out.size(); ++u)
        if (std::isnan(out[u])) throw DataError(source + ": no sensitivity for consumer " + log.consumer_ids()[u]);
    return out;
}

}  // namespace arcrec
