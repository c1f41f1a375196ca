#include "arcrec/matrix.hpp"
#include "arcrec/metrics.hpp"
#include "arcrec/simulator.hpp"

#include "stats.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

using namespace arcrec;

namespace {

SimConfig small_config(std::uint64_t seed = 9) {
    SimConfig c;
    c.seed = seed;
    c.num_consumers = 60;
    c.num_products = 45;
    return c;
}

// One consumer, one attribute with a single level, hand-set parameters.
SimMarket hand_market(std::vector<double> prices, double alpha, double beta, int periods) {
    SimMarket m;
    m.levels = {1};
    m.prices = std::move(prices);
    m.product_levels.assign(m.prices.size(), {0});
    m.alpha = {{{alpha}}};
    m.beta = {beta};
    m.periods = {periods};
    m.mean_price = std::accumulate(m.prices.begin(), m.prices.end(), 0.0) / static_cast<double>(m.prices.size());
    return m;
}

}  // namespace

TEST_CASE("generated market parameters") {
    const SimMarket m = generate_market(small_config());
    CHECK(m.num_consumers() == 60);
    CHECK(m.num_products() == 45);
    REQUIRE(m.levels.size() == 3);
    for (int l : m.levels) {
        CHECK(l >= 3);
        CHECK(l <= 15);
    }
    for (double b : m.beta) CHECK(b < 0.0);
    for (double p : m.prices) CHECK(p > 0.0);
    for (int t : m.periods) {
        CHECK(t >= 5);
        CHECK(t <= 25);
    }
    for (const auto& levels : m.product_levels)
        for (std::size_t n = 0; n < levels.size(); ++n) {
            CHECK(levels[n] >= 0);
            CHECK(levels[n] < m.levels[n]);
        }
    CHECK(m.mean_price == doctest::Approx(std::accumulate(m.prices.begin(), m.prices.end(), 0.0) / 45.0));
}

TEST_CASE("full-scale sizes") {
    SimConfig c = small_config();
    c.full_scale = true;
    const SimMarket m = generate_market(c);
    CHECK(m.num_consumers() >= 1000);
    CHECK(m.num_consumers() <= 2000);
    CHECK(m.num_products() >= 1000);
    CHECK(m.num_products() <= 2000);
}

TEST_CASE("sticker-shock utility") {
    SimMarket m = hand_market({2.0, 4.0}, 0.7, -1.0, 1);
    // Reference price equal to the product price leaves only the attribute part.
    CHECK(sim_utility(m, 0, 0, 2.0) == doctest::Approx(0.7));
    m.alpha = {{{0.0}}};
    // beta = -1 and p_ref - p = 2.
    CHECK(sim_utility(m, 0, 0, 4.0) == doctest::Approx(-2.0));
    CHECK(sim_utility(m, 0, 1, 3.0) == doctest::Approx(1.0));
}

TEST_CASE("choice probabilities") {
    const double u[] = {0.0, std::log(3.0)};
    const auto p = choice_probabilities(u);
    CHECK(p[0] == doctest::Approx(0.25));
    CHECK(p[1] == doctest::Approx(0.75));

    const double big[] = {1000.0, 999.0, -1000.0};
    const auto q = choice_probabilities(big);
    CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(1.0));
    CHECK(q[0] / q[1] == doctest::Approx(std::exp(1.0)));
    CHECK(q[2] == 0.0);

    CHECK_THROWS_AS(choice_probabilities(std::span<const double>{}), NumericError);
    const double bad[] = {0.0, std::nan("")};
    CHECK_THROWS_AS(choice_probabilities(bad), NumericError);
}

TEST_CASE("choices follow the logit probabilities") {
    const std::vector<double> probs{0.1, 0.2, 0.3, 0.4};
    std::mt19937_64 rng(5);
    std::vector<double> counts(4, 0.0);
    for (int d = 0; d < 40000; ++d) counts[draw_choice(probs, rng)] += 1.0;
    CHECK(testing::chi_square(counts, probs).p > 0.01);
    const std::vector<double> degenerate{0.0, 1.0, 0.0};
    for (int d = 0; d < 100; ++d) CHECK(draw_choice(degenerate, rng) == 1);
}

TEST_CASE("reference price is the running mean of purchases") {
    SimConfig c;
    c.noise_variance = 0.0;
    // A single product is always chosen.
    const SimMarket one = hand_market({5.0}, 0.0, -1.0, 3);
    const ConsumerTrace t = simulate_consumer(one, 0, c);
    REQUIRE(t.reference_prices.size() == 3);
    CHECK(t.reference_prices[0] == doctest::Approx(5.0));
    CHECK(t.reference_prices[1] == doctest::Approx(5.0));
    CHECK(t.final_reference_price == doctest::Approx(5.0));

    const SimMarket two = hand_market({1.0, 3.0, 8.0}, 0.0, -0.5, 6);
    const ConsumerTrace s = simulate_consumer(two, 0, c);
    CHECK(s.reference_prices[0] == doctest::Approx(4.0));
    double spent = 0;
    for (std::size_t t2 = 0; t2 < s.purchases.size(); ++t2) {
        spent += two.prices[s.purchases[t2]];
        const double expected = spent / static_cast<double>(t2 + 1);
        if (t2 + 1 < s.purchases.size())
            CHECK(s.reference_prices[t2 + 1] == doctest::Approx(expected));
        else
            CHECK(s.final_reference_price == doctest::Approx(expected));
    }
}

TEST_CASE("simulation output") {
    const SimConfig c = small_config();
    const SimMarket m = generate_market(c);
    const SimResult r = simulate(m, c);
    CHECK(r.catalog.size() == 45);
    CHECK(r.catalog.num_attributes() == 3);
    CHECK(r.log.num_consumers() == 60);
    std::size_t expected_records = 0;
    for (int t : m.periods) expected_records += static_cast<std::size_t>(t);
    CHECK(r.log.size() == expected_records);
    for (std::size_t u = 0; u < 60; ++u) {
        CHECK(r.traces[u].purchases.size() == static_cast<std::size_t>(m.periods[u]));
        const auto& util = r.truth.utility[u];
        for (std::size_t i = 0; i < 45; ++i)
            CHECK(util[i] == doctest::Approx(sim_utility(m, u, i, r.traces[u].final_reference_price)));
        CHECK(std::accumulate(r.truth.probability[u].begin(), r.truth.probability[u].end(), 0.0) ==
              doctest::Approx(1.0));
        std::set<std::size_t> perm(r.truth.ranking[u].begin(), r.truth.ranking[u].end());
        CHECK(perm.size() == 45);
        for (std::size_t k = 1; k < 45; ++k) CHECK(util[r.truth.ranking[u][k - 1]] >= util[r.truth.ranking[u][k]]);
    }
}

TEST_CASE("simulation is deterministic for a seed") {
    const SimConfig c = small_config(21);
    const SimResult a = simulate(generate_market(c), c);
    const SimResult b = simulate(generate_market(c), c);
    CHECK(a.log.records() == b.log.records());
    CHECK(a.catalog.prices() == b.catalog.prices());
    CHECK(a.truth.utility == b.truth.utility);
    const SimConfig d = small_config(22);
    CHECK_FALSE(simulate(generate_market(d), d).log.records() == a.log.records());
}

TEST_CASE("invalid simulation settings") {
    auto expect_error = [](auto mutate) {
        SimConfig c;
        mutate(c);
        CHECK_THROWS_AS(generate_market(c), ConfigError);
    };
    expect_error([](SimConfig& c) { c.num_consumers = 0; });
    expect_error([](SimConfig& c) { c.num_products = 0; });
    expect_error([](SimConfig& c) { c.num_attributes = 0; });
    expect_error([](SimConfig& c) { c.min_levels = 5, c.max_levels = 4; });
    expect_error([](SimConfig& c) { c.min_periods = 0; });
    expect_error([](SimConfig& c) { c.noise_variance = -1.0; });
}

TEST_CASE("truth and sensitivity files round trip") {
    const SimConfig c = small_config(31);
    const SimMarket m = generate_market(c);
    const SimResult r = simulate(m, c);
    std::stringstream truth;
    write_truth(truth, r);
    const TruthTable table = read_truth(truth, r.catalog, r.log);
    CHECK(table.ranking == r.truth.ranking);

    std::stringstream sens;
    write_sensitivity(sens, m, r);
    const auto s = read_sensitivity(sens, r.log);
    REQUIRE(s.size() == 60);
    for (std::size_t u = 0; u < 60; ++u) CHECK(s[u] == doctest::Approx(-m.beta[u]).epsilon(1e-12));

    std::stringstream partial("consumer_id,sensitivity\nc01,1.5\n");
    CHECK_THROWS_AS(read_sensitivity(partial, r.log), DataError);
    std::stringstream wrong("consumer_id,product_id\n");
    CHECK_THROWS_AS(read_truth(wrong, r.catalog, r.log), DataError);
}
