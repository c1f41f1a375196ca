#include "arcrec/protocols.hpp"

#include "arcrec/graphs.hpp"
#include "arcrec/kernels.hpp"
#include "arcrec/metrics.hpp"
#include "arcrec/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <unordered_set>

namespace arcrec {

namespace {

double dot_rows(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Runs body(i) for i in [0, n) across workers; the first exception (by
// index) is rethrown.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(kernels::workers())
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

class ArcRecPrepared : public PreparedConsumer {
public:
    ArcRecPrepared(const ArcRecScorer& scorer, std::vector<std::size_t> refs, std::vector<std::size_t> candidates)
        : scorer_(scorer),
          refs_(std::move(refs)),
          candidates_(std::move(candidates)),
          cache_(scorer.tables(), scorer.alpha(), scorer.beta(), candidates_, refs_) {
        const auto& tables = scorer.tables();
        live_.resize(candidates_.size());
        gamma_.resize(candidates_.size());
        std::vector<double> logits;
        for (std::size_t c = 0; c < candidates_.size(); ++c) {
            const std::size_t target = candidates_[c];
            logits.clear();
            for (std::size_t j : refs_) {
                if (j == target) continue;
                live_[c].push_back(j);
                double s = 0.0;
                for (const Matrix& t : tables) s += dot_rows(t.row_span(target), t.row_span(j));
                logits.push_back(s);
            }
            if (logits.empty()) throw DataError("empty reference set after excluding the candidate");
            gamma_[c] = softmax(logits);
        }
    }

    std::vector<double> score(std::span<const double> raw_prices) const override {
        const auto awtp = scorer_.awtp(refs_, raw_prices);
        const PriceSpace& space = scorer_.prices();
        std::vector<double> out(candidates_.size());
        const std::size_t num_layers = scorer_.tables().size();
        for (std::size_t c = 0; c < candidates_.size(); ++c) {
            const std::size_t target = candidates_[c];
            const double pt = space.to_utility(raw_prices[target]);
            double r = 0.0;
            for (std::size_t q = 0; q < live_[c].size(); ++q) {
                const std::size_t j = live_[c][q];
                const double shock = space.to_utility(raw_prices[j]) - pt;
                double inner = 0.0;
                for (std::size_t k = 0; k < num_layers; ++k)
                    inner += awtp[k] * (cache_.interest(k, target, j) + cache_.price_weight(k, target, j) * shock);
                r += gamma_[c][q] * inner;
            }
            out[c] = r;
        }
        return out;
    }

private:
    const ArcRecScorer& scorer_;
    std::vector<std::size_t> refs_;
    std::vector<std::size_t> candidates_;
    PairCache cache_;
    std::vector<std::vector<std::size_t>> live_;
    std::vector<std::vector<double>> gamma_;
};

}  // namespace

std::vector<std::size_t> distinct_by_last_purchase(std::span<const std::size_t> history) {
    std::vector<std::size_t> out;
    std::unordered_set<std::size_t> seen;
    for (std::size_t t = history.size(); t-- > 0;)
        if (seen.insert(history[t]).second) out.push_back(history[t]);
    std::reverse(out.begin(), out.end());
    return out;
}

LooSplit leave_last_one_out_split(const TransactionLog& log) {
    LooSplit split;
    const auto histories = log.histories();
    split.train_items.resize(histories.size());
    for (std::size_t u = 0; u < histories.size(); ++u) {
        auto items = distinct_by_last_purchase(histories[u]);
        if (items.size() < 2) continue;
        ConsumerSplit cs;
        cs.consumer = u;
        cs.test = items.back();
        items.pop_back();
        if (items.size() >= 2) {
            cs.validation = items.back();
            items.pop_back();
        }
        cs.train = items;
        split.train_items[u] = items;
        split.consumers.push_back(std::move(cs));
    }
    std::vector<Interaction> records;
    for (const Interaction& r : log.records()) {
        const auto& items = split.train_items[r.consumer];
        if (std::find(items.begin(), items.end(), r.product) != items.end()) records.push_back(r);
    }
    split.train_log = TransactionLog(log.consumer_ids(), std::move(records));
    return split;
}

ArcRecScorer::ArcRecScorer(std::vector<Matrix> tables, PreferenceNet alpha, PreferenceNet beta, PriceSpace prices,
                           ModelConfig config)
    : tables_(std::move(tables)),
      alpha_(std::move(alpha)),
      beta_(std::move(beta)),
      prices_(std::move(prices)),
      config_(config) {
    if (tables_.empty()) throw NumericError("scorer needs at least one layer");
}

ArcRecScorer ArcRecScorer::from_model(const ArcRecModel& model, const PriceSpace& prices) {
    return ArcRecScorer(model.tables(), model.params().alpha, model.params().beta, prices, model.config());
}

std::unique_ptr<PreparedConsumer> ArcRecScorer::prepare(std::size_t, std::span<const std::size_t> refs,
                                                        std::span<const std::size_t> candidates) const {
    if (refs.empty()) throw DataError("consumer has no reference set");
    return std::make_unique<ArcRecPrepared>(*this, most_recent(refs, config_.reference_cap),
                                            std::vector<std::size_t>(candidates.begin(), candidates.end()));
}

std::vector<double> ArcRecScorer::awtp(std::span<const std::size_t> refs, std::span<const double> raw_prices) const {
    const auto kept = most_recent(refs, config_.reference_cap);
    if (!config_.ablation.use_awtp) return uniform_awtp(tables_.size());
    return awtp_scores(kept, tables_, raw_prices).normalized;
}

double ArcRecScorer::price_sensitivity(std::span<const std::size_t> refs, std::span<const double> raw_prices) const {
    const auto kept = most_recent(refs, config_.reference_cap);
    if (kept.empty()) throw DataError("consumer has no reference set");
    const auto w = awtp(kept, raw_prices);
    const PairCache cache(tables_, alpha_, beta_, kept, kept);
    double s = 0.0;
    for (std::size_t k = 0; k < tables_.size(); ++k) {
        double layer = 0.0;
        for (std::size_t i : kept)
            for (std::size_t j : kept) layer += cache.price_weight(k, i, j);
        s += w[k] * layer / static_cast<double>(kept.size() * kept.size());
    }
    return s;
}

std::size_t rank_in(std::span<const std::size_t> candidates, std::span<const double> scores, std::size_t target_pos) {
    const double s = scores[target_pos];
    const std::size_t item = candidates[target_pos];
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c)
        if (scores[c] > s || (scores[c] == s && candidates[c] < item)) ++ahead;
    return ahead + 1;
}

RankingReport evaluate_ranking(const Scorer& scorer, const LooSplit& split, std::span<const double> raw_prices,
                               std::size_t num_products, HeldOut which, std::span<const std::size_t> ks) {
    std::vector<const ConsumerSplit*> rows;
    for (const ConsumerSplit& cs : split.consumers)
        if (which == HeldOut::test || cs.validation) rows.push_back(&cs);

    std::vector<std::size_t> rank(rows.size());
    parallel_for(rows.size(), [&](std::size_t r) {
        const ConsumerSplit& cs = *rows[r];
        const std::size_t held = which == HeldOut::test ? cs.test : *cs.validation;
        std::vector<char> excluded(num_products, 0);
        for (std::size_t i : cs.train) excluded[i] = 1;
        std::vector<std::size_t> candidates;
        std::size_t target_pos = 0;
        for (std::size_t i = 0; i < num_products; ++i) {
            if (excluded[i]) continue;
            if (i == held) target_pos = candidates.size();
            candidates.push_back(i);
        }
        if (held >= num_products || excluded[held]) throw DataError("held-out item missing from candidate set");
        const auto scores = scorer.score(cs.consumer, cs.train, candidates, raw_prices);
        rank[r] = rank_in(candidates, scores, target_pos);
    });

    RankingReport report;
    report.consumers = rows.size();
    for (std::size_t k : ks) {
        double hr = 0.0, nd = 0.0;
        for (std::size_t p : rank) {
            hr += hit_at(p, k);
            nd += ndcg_at(p, k);
        }
        const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
        report.hr[k] = hr / n;
        report.ndcg[k] = nd / n;
    }
    return report;
}

CorrelationReport evaluate_correlation(const Scorer& scorer, const std::vector<std::vector<std::size_t>>& refs,
                                       const std::vector<std::vector<std::size_t>>& truth,
                                       std::span<const double> raw_prices, std::size_t num_products) {
    if (refs.size() != truth.size()) throw DataError("references and truth cover different consumers");
    std::vector<std::size_t> users;
    for (std::size_t u = 0; u < refs.size(); ++u)
        if (refs[u].size() >= 2 && !truth[u].empty()) users.push_back(u);
    std::vector<std::size_t> all(num_products);
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> tau(users.size()), rho(users.size());
    parallel_for(users.size(), [&](std::size_t r) {
        const std::size_t u = users[r];
        const auto scores = scorer.score(u, refs[u], all, raw_prices);
        const auto predicted = rank_by_score(all, scores);
        tau[r] = kendall_tau(truth[u], predicted);
        rho[r] = spearman_rho(truth[u], predicted);
    });
    CorrelationReport report;
    report.consumers = users.size();
    if (users.empty()) throw DataError("no consumer has both references and a true ranking");
    for (std::size_t r = 0; r < users.size(); ++r) {
        report.tau += tau[r];
        report.rho += rho[r];
    }
    report.tau /= static_cast<double>(users.size());
    report.rho /= static_cast<double>(users.size());
    return report;
}

ColdStartSetup hold_out_products(const ProductCatalog& catalog, const TransactionLog& log,
                                 std::vector<std::size_t> cold) {
    std::sort(cold.begin(), cold.end());
    cold.erase(std::unique(cold.begin(), cold.end()), cold.end());
    if (cold.empty()) throw ConfigError("cold-start holdout is empty");
    if (cold.size() >= catalog.size()) throw ConfigError("cold-start holdout leaves no warm products");
    ColdStartSetup s;
    s.cold = std::move(cold);
    s.full_to_warm.assign(catalog.size(), std::nullopt);
    std::vector<std::size_t> keep;
    std::size_t c = 0;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (c < s.cold.size() && s.cold[c] == i) {
            ++c;
            continue;
        }
        s.full_to_warm[i] = keep.size();
        keep.push_back(i);
    }
    s.warm_catalog = catalog.subset(keep);
    s.warm_log = log.remap_products(s.full_to_warm);
    return s;
}

ColdStartSetup hold_out_products(const ProductCatalog& catalog, const TransactionLog& log, double fraction,
                                 std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction >= 1.0) throw ConfigError("cold-start fraction must be in (0, 1)");
    const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(catalog.size())));
    if (count == 0) throw ConfigError("cold-start holdout is empty at this catalog size");
    std::mt19937_64 rng(seed);
    return hold_out_products(catalog, log, sample_without_replacement(catalog.size(), count, rng));
}

std::vector<Matrix> extend_with_cold(const std::vector<Matrix>& warm_tables, const ColdStartSetup& setup,
                                     const ProductCatalog& full_catalog) {
    std::vector<Matrix> out;
    const std::size_t warm = setup.warm_catalog.size();
    std::vector<std::vector<std::vector<std::size_t>>> neighbors;
    for (std::size_t c : setup.cold) neighbors.push_back(attach_cold_node(setup.warm_catalog, full_catalog.entry(c)));
    for (std::size_t k = 0; k < warm_tables.size(); ++k) {
        const Matrix& t = warm_tables[k];
        if (t.rows() != warm) throw DataError("warm table does not match the warm catalog");
        Matrix ext(warm + setup.cold.size(), t.cols());
        std::copy(t.values().begin(), t.values().end(), ext.values().begin());
        // Layers beyond the attribute count (never expected) fall back to attribute 0.
        const std::size_t attr = std::min(k, full_catalog.num_attributes() - 1);
        for (std::size_t c = 0; c < setup.cold.size(); ++c) {
            const Matrix row = cold_embedding(neighbors[c][attr], t);
            std::copy(row.values().begin(), row.values().end(), ext.row_span(warm + c).begin());
        }
        out.push_back(std::move(ext));
    }
    return out;
}

ColdStartReport evaluate_cold_start(const Scorer& scorer, const ColdStartSetup& setup,
                                    const TransactionLog& full_log, const ProductCatalog& full_catalog,
                                    std::span<const std::size_t> ks) {
    const std::size_t warm = setup.warm_catalog.size();
    std::vector<std::size_t> cold_pos(full_catalog.size(), static_cast<std::size_t>(-1));
    for (std::size_t c = 0; c < setup.cold.size(); ++c) cold_pos[setup.cold[c]] = c;

    std::vector<double> raw(setup.warm_catalog.prices());
    for (std::size_t c : setup.cold) raw.push_back(full_catalog.prices()[c]);
    std::vector<std::size_t> candidates(setup.cold.size());
    std::iota(candidates.begin(), candidates.end(), warm);

    struct Case {
        std::size_t consumer;
        std::vector<std::size_t> refs;
        std::size_t target_pos;
    };
    std::vector<Case> cases;
    const auto histories = full_log.histories();
    for (std::size_t u = 0; u < histories.size(); ++u) {
        std::optional<std::size_t> last_cold;
        std::vector<std::size_t> warm_history;
        for (std::size_t i : histories[u]) {
            if (cold_pos[i] != static_cast<std::size_t>(-1))
                last_cold = cold_pos[i];
            else
                warm_history.push_back(*setup.full_to_warm[i]);
        }
        if (!last_cold || warm_history.empty()) continue;
        cases.push_back({u, distinct_by_last_purchase(warm_history), *last_cold});
    }

    std::vector<std::size_t> rank(cases.size());
    parallel_for(cases.size(), [&](std::size_t r) {
        const auto scores = scorer.score(cases[r].consumer, cases[r].refs, candidates, raw);
        rank[r] = rank_in(candidates, scores, cases[r].target_pos);
    });

    ColdStartReport report;
    report.cold_products = setup.cold.size();
    report.ranking.consumers = cases.size();
    for (std::size_t k : ks) {
        double hr = 0.0, nd = 0.0;
        for (std::size_t p : rank) {
            hr += hit_at(p, k);
            nd += ndcg_at(p, k);
        }
        const double n = cases.empty() ? 1.0 : static_cast<double>(cases.size());
        report.ranking.hr[k] = hr / n;
        report.ranking.ndcg[k] = nd / n;
        report.random_hr[k] = std::min(1.0, static_cast<double>(k) / static_cast<double>(setup.cold.size()));
    }
    return report;
}

const TreatmentSummary& TreatmentReport::find(double treatment, const std::string& group) const {
    for (const auto& s : summary)
        if (s.treatment == treatment && s.group == group) return s;
    throw DataError("no treatment summary for " + group + " at " + format_double(treatment));
}

TreatmentReport treatment_experiment(const Scorer& scorer, const std::vector<std::vector<std::size_t>>& refs,
                                     std::span<const double> sensitivity, std::span<const double> raw_prices,
                                     const TreatmentConfig& config) {
    if (sensitivity.size() != refs.size()) throw DataError("one sensitivity value per consumer required");
    if (config.candidates == 0 || config.candidates > raw_prices.size())
        throw ConfigError("candidate set size must be in [1, |V|]");
    if (config.group_size == 0 || config.repetitions == 0) throw ConfigError("group size and repetitions must be positive");
    if (!(config.group_quantile > 0.0 && config.group_quantile < 1.0))
        throw ConfigError("group quantile must be in (0, 1)");

    std::vector<std::size_t> eligible;
    for (std::size_t u = 0; u < refs.size(); ++u)
        if (refs[u].size() >= 2) eligible.push_back(u);
    if (eligible.empty()) throw DataError("insufficient consumers per group");
    std::vector<double> sorted;
    for (std::size_t u : eligible) sorted.push_back(sensitivity[u]);
    std::sort(sorted.begin(), sorted.end());
    const auto cut = static_cast<std::size_t>(config.group_quantile * static_cast<double>(sorted.size() - 1));
    const double threshold = sorted[cut];
    std::vector<std::size_t> low, high;
    for (std::size_t u : eligible) (sensitivity[u] <= threshold ? low : high).push_back(u);
    // Short pools shrink both groups to the same feasible size.
    const std::size_t group_size = std::min({config.group_size, low.size(), high.size()});
    if (group_size == 0)
        throw DataError("insufficient consumers per group: low " + std::to_string(low.size()) + ", high " +
                        std::to_string(high.size()));

    const std::size_t nv = raw_prices.size();
    std::vector<std::size_t> everything(nv);
    std::iota(everything.begin(), everything.end(), 0);

    TreatmentReport report;
    report.group_size = group_size;
    const std::size_t nt = config.treatments.size();
    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(rep), 0x7eu};
        std::mt19937_64 rng(seq);
        std::vector<std::size_t> members;
        for (const auto* pool : {&low, &high})
            for (std::size_t idx : sample_without_replacement(pool->size(), group_size, rng))
                members.push_back((*pool)[idx]);
        auto sampled = sample_without_replacement(nv, config.candidates, rng);
        std::sort(sampled.begin(), sampled.end());
        const auto& ranked_set = config.full_assortment ? everything : sampled;
        std::vector<std::size_t> pos_in_set(sampled.size());
        for (std::size_t c = 0; c < sampled.size(); ++c)
            pos_in_set[c] = static_cast<std::size_t>(
                std::lower_bound(ranked_set.begin(), ranked_set.end(), sampled[c]) - ranked_set.begin());

        // te[member][treatment] = summed rank shift over the sampled products.
        std::vector<std::vector<double>> te(members.size(), std::vector<double>(nt, 0.0));
        parallel_for(members.size(), [&](std::size_t m) {
            const std::size_t u = members[m];
            const auto prepared = scorer.prepare(u, refs[u], ranked_set);
            const auto base = prepared->score(raw_prices);
            std::vector<double> prices(raw_prices.begin(), raw_prices.end());
            for (std::size_t c = 0; c < sampled.size(); ++c) {
                const std::size_t item = sampled[c];
                const std::size_t before = rank_in(ranked_set, base, pos_in_set[c]);
                for (std::size_t t = 0; t < nt; ++t) {
                    prices[item] = raw_prices[item] * (1.0 + config.treatments[t]);
                    const auto treated = prepared->score(prices);
                    te[m][t] += static_cast<double>(rank_in(ranked_set, treated, pos_in_set[c])) -
                                static_cast<double>(before);
                }
                prices[item] = raw_prices[item];
            }
        });
        for (std::size_t t = 0; t < nt; ++t)
            for (std::size_t g = 0; g < 2; ++g) {
                double s = 0.0;
                for (std::size_t m = g * group_size; m < (g + 1) * group_size; ++m) s += te[m][t];
                report.rows.push_back({rep, config.treatments[t], g == 0 ? "low" : "high",
                                       s / static_cast<double>(group_size * sampled.size())});
            }
    }
    for (double t : config.treatments)
        for (const char* g : {"low", "high"}) {
            std::vector<double> v;
            for (const auto& r : report.rows)
                if (r.treatment == t && r.group == g) v.push_back(r.ate);
            TreatmentSummary s{t, g, 0.0, 0.0};
            for (double x : v) s.mean += x;
            s.mean /= static_cast<double>(v.size());
            if (v.size() > 1) {
                for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
                s.stddev = std::sqrt(s.stddev / static_cast<double>(v.size() - 1));
            }
            report.summary.push_back(s);
        }
    return report;
}

void write_treatment_csv(std::ostream& out, const TreatmentReport& report) {
    out << "repetition,treatment,group,ate\n";
    for (const auto& r : report.rows)
        out << r.repetition << ',' << format_double(r.treatment) << ',' << r.group << ',' << format_double(r.ate)
            << '\n';
}

}  // namespace arcrec
