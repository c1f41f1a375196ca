#include "arcrec/model.hpp"

#include "arcrec/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace arcrec {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

double dot_rows(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void require_refs(std::span<const std::size_t> refs) {
    if (refs.empty()) throw DataError("empty reference set");
}

}  // namespace

PreferenceNet PreferenceNet::random(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
    PreferenceNet n;
    n.w1 = gaussian(in, hidden, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    n.b1 = Matrix(1, hidden);
    n.w2 = gaussian(hidden, 1, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    n.b2 = Matrix(1, 1);
    return n;
}

double PreferenceNet::forward(std::span<const double> x) const {
    if (x.size() != w1.rows()) throw NumericError("preference net input size mismatch");
    const std::size_t hidden = w1.cols();
    double out = b2[0];
    for (std::size_t h = 0; h < hidden; ++h) {
        double z = b1[h];
        for (std::size_t t = 0; t < x.size(); ++t) z += x[t] * w1(t, h);
        out += sigmoid(z) * w2[h];
    }
    return out;
}

kernels::MlpView PreferenceNet::view() const {
    return kernels::MlpView{w1.data(), b1.data(), w2.data(), b2[0], w1.rows(), w1.cols()};
}

std::vector<Matrix*> ModelParams::tensors() {
    std::vector<Matrix*> out;
    for (Matrix& e : embeddings) out.push_back(&e);
    for (PreferenceNet* n : {&alpha, &beta}) {
        out.push_back(&n->w1);
        out.push_back(&n->b1);
        out.push_back(&n->w2);
        out.push_back(&n->b2);
    }
    return out;
}

std::vector<const Matrix*> ModelParams::tensors() const {
    auto mut = const_cast<ModelParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

double ModelParams::squared_norm() const {
    double s = 0.0;
    for (const Matrix* m : tensors()) s += m->squared_norm();
    return s;
}

PriceSpace PriceSpace::make(std::vector<double> raw, bool standardize) {
    PriceSpace p;
    p.raw = std::move(raw);
    p.standardized = standardize;
    if (standardize && !p.raw.empty()) {
        const double n = static_cast<double>(p.raw.size());
        p.mean = std::accumulate(p.raw.begin(), p.raw.end(), 0.0) / n;
        double var = 0.0;
        for (double x : p.raw) var += (x - p.mean) * (x - p.mean);
        p.stddev = std::sqrt(var / n);
        if (!(p.stddev > 0.0)) p.stddev = 1.0;
    }
    p.utility.resize(p.raw.size());
    for (std::size_t i = 0; i < p.raw.size(); ++i) p.utility[i] = p.to_utility(p.raw[i]);
    return p;
}

PriceSpace PriceSpace::with_raw(std::vector<double> new_raw) const {
    PriceSpace p = *this;
    p.raw = std::move(new_raw);
    p.utility.resize(p.raw.size());
    for (std::size_t i = 0; i < p.raw.size(); ++i) p.utility[i] = p.to_utility(p.raw[i]);
    return p;
}

std::vector<double> softmax(std::span<const double> x) {
    if (x.empty()) throw NumericError("softmax of empty input");
    const double mx = *std::max_element(x.begin(), x.end());
    std::vector<double> out(x.size());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - mx);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

std::vector<double> attention_weights(std::span<const double> target, const Matrix& references) {
    if (references.rows() == 0) throw DataError("empty reference set");
    if (references.cols() != target.size()) throw NumericError("attention dimension mismatch");
    std::vector<double> s(references.rows());
    for (std::size_t j = 0; j < references.rows(); ++j) s[j] = dot_rows(target, references.row_span(j));
    return softmax(s);
}

double pair_utility(const PreferenceNet& alpha, const PreferenceNet& beta, std::span<const double> h_i,
                    std::span<const double> h_j, double p_i, double p_j) {
    if (h_i.size() != h_j.size()) throw NumericError("pair_utility dimension mismatch");
    std::vector<double> x(h_i.size());
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = h_i[t] * h_j[t];
    return alpha.forward(x) + beta.forward(x) * (p_j - p_i);
}

ConsumerCenter consumer_center(std::span<const std::size_t> refs, const std::vector<Matrix>& tables,
                               std::span<const double> prices) {
    if (refs.empty()) throw DataError("consumer center of an empty purchase set");
    ConsumerCenter c;
    const double inv = 1.0 / static_cast<double>(refs.size());
    for (const Matrix& t : tables) {
        Matrix m(1, t.cols());
        for (std::size_t i : refs)
            for (std::size_t d = 0; d < t.cols(); ++d) m[d] += t(i, d);
        c.embedding.push_back(m * inv);
    }
    for (std::size_t i : refs) c.price += prices[i];
    c.price *= inv;
    return c;
}

AwtpRow awtp_scores(std::span<const std::size_t> refs, const std::vector<Matrix>& tables,
                    std::span<const double> prices) {
    const ConsumerCenter center = consumer_center(refs, tables, prices);
    AwtpRow row;
    const double pbar = std::max(std::abs(center.price), kAwtpEpsilon);
    for (std::size_t k = 0; k < tables.size(); ++k) {
        const Matrix& t = tables[k];
        const Matrix& hbar = center.embedding[k];
        const double hbar_norm = std::sqrt(hbar.squared_norm());
        double score = 0.0;
        if (hbar_norm > 0.0) {
            for (std::size_t i : refs) {
                double dev = 0.0;
                for (std::size_t d = 0; d < t.cols(); ++d) {
                    const double diff = t(i, d) - hbar[d];
                    dev += diff * diff;
                }
                dev = std::max(std::sqrt(dev), kAwtpEpsilon);
                const double price_ratio = std::abs(prices[i] - center.price) / pbar;
                score += price_ratio / (dev / hbar_norm);
            }
        }
        row.raw.push_back(score);
    }
    row.normalized = softmax(row.raw);
    return row;
}

std::vector<double> uniform_awtp(std::size_t num_layers) {
    return std::vector<double>(num_layers, 1.0 / static_cast<double>(num_layers));
}

double utility(const std::vector<Matrix>& tables, const PreferenceNet& alpha, const PreferenceNet& beta,
               std::span<const double> prices, std::span<const std::size_t> refs, std::size_t target,
               std::span<const double> awtp) {
    require_refs(refs);
    if (awtp.size() != tables.size()) throw NumericError("AWTP row length differs from layer count");
    const std::size_t kd = tables.size() * tables.front().cols();
    std::vector<double> hstar(kd);
    Matrix ref_star(refs.size(), kd);
    std::size_t off = 0;
    for (const Matrix& t : tables) {
        std::copy(t.row_span(target).begin(), t.row_span(target).end(), hstar.begin() + off);
        for (std::size_t r = 0; r < refs.size(); ++r)
            std::copy(t.row_span(refs[r]).begin(), t.row_span(refs[r]).end(), ref_star.row_span(r).begin() + off);
        off += t.cols();
    }
    const auto gamma = attention_weights(hstar, ref_star);
    double r = 0.0;
    for (std::size_t j = 0; j < refs.size(); ++j) {
        double inner = 0.0;
        for (std::size_t k = 0; k < tables.size(); ++k)
            inner += awtp[k] * pair_utility(alpha, beta, tables[k].row_span(target), tables[k].row_span(refs[j]),
                                            prices[target], prices[refs[j]]);
        r += gamma[j] * inner;
    }
    return r;
}

std::vector<std::size_t> exclude_target(std::span<const std::size_t> refs, std::size_t target) {
    std::vector<std::size_t> out;
    out.reserve(refs.size());
    for (std::size_t r : refs)
        if (r != target) out.push_back(r);
    return out;
}

std::vector<std::size_t> most_recent(std::span<const std::size_t> items, std::size_t cap) {
    if (items.size() <= cap) return {items.begin(), items.end()};
    return {items.end() - static_cast<std::ptrdiff_t>(cap), items.end()};
}

TapeNet net_on_tape(ad::Tape& tape, const PreferenceNet& net) {
    return TapeNet{tape.leaf(net.w1), tape.leaf(net.b1), tape.leaf(net.w2), tape.leaf(net.b2)};
}

ad::Var mlp_on_tape(const TapeNet& net, ad::Var x) {
    const std::size_t n = x.value().rows();
    ad::Var z = ad::add(ad::matmul(x, net.w1), ad::broadcast_rows(net.b1, n));
    ad::Var s = ad::sigmoid(z);
    return ad::add(ad::matmul(s, net.w2), ad::broadcast_rows(net.b2, n));
}

ad::Var utility_on_tape(std::span<const ad::Var> layers, std::size_t target,
                        std::span<const std::size_t> refs, double target_price,
                        std::span<const double> ref_prices, ad::Var awtp, const TapeNet& alpha,
                        const TapeNet& beta) {
    require_refs(refs);
    ad::Tape& tape = *layers.front().tape;
    const std::size_t m = refs.size();
    const std::size_t num_layers = layers.size();
    const std::size_t target_row[] = {target};

    std::vector<ad::Var> target_parts, ref_parts, products;
    for (const ad::Var& layer : layers) {
        ad::Var ht = ad::gather_rows(layer, target_row);
        ad::Var hr = ad::gather_rows(layer, refs);
        target_parts.push_back(ht);
        ref_parts.push_back(hr);
        products.push_back(ad::hadamard(hr, ad::broadcast_rows(ht, m)));
    }
    ad::Var hstar = ad::concat_cols(target_parts);
    ad::Var ref_star = ad::concat_cols(ref_parts);
    ad::Var gamma = ad::softmax(ad::matmul(ref_star, ad::transpose(hstar)));

    ad::Var x = ad::concat_rows(products);
    ad::Var interest = mlp_on_tape(alpha, x);
    ad::Var sensitivity = mlp_on_tape(beta, x);
    Matrix shock(num_layers * m, 1);
    for (std::size_t k = 0; k < num_layers; ++k)
        for (std::size_t j = 0; j < m; ++j) shock(k * m + j, 0) = ref_prices[j] - target_price;
    ad::Var f = ad::add(interest, ad::hadamard(sensitivity, tape.constant(std::move(shock))));
    ad::Var per_ref = ad::matmul(awtp, ad::reshape(f, num_layers, m));
    return ad::matmul(per_ref, gamma);
}

ad::Var awtp_on_tape(std::span<const ad::Var> layers, std::span<const std::size_t> refs,
                     std::span<const double> raw_prices) {
    require_refs(refs);
    ad::Tape& tape = *layers.front().tape;
    double pbar = 0.0;
    for (double p : raw_prices) pbar += p;
    pbar /= static_cast<double>(raw_prices.size());
    const double pbar_floor = std::max(std::abs(pbar), kAwtpEpsilon);

    std::vector<ad::Var> scores;
    for (const ad::Var& layer : layers) {
        ad::Var rows = ad::gather_rows(layer, refs);
        ad::Var center = ad::mean_rows(rows);
        ad::Var score = tape.constant(Matrix::scalar(0.0));
        if (center.value().squared_norm() > 0.0) {
            ad::Var center_norm = ad::norm(center);
            for (std::size_t r = 0; r < refs.size(); ++r) {
                const std::size_t row[] = {r};
                ad::Var diff = ad::sub(ad::gather_rows(rows, row), center);
                const double price_ratio = std::abs(raw_prices[r] - pbar) / pbar_floor;
                ad::Var dev = diff.value().squared_norm() > kAwtpEpsilon * kAwtpEpsilon
                                  ? ad::norm(diff)
                                  : tape.constant(Matrix::scalar(kAwtpEpsilon));
                // price_ratio / (dev / |center|)
                ad::Var term = ad::scale(ad::div(center_norm, dev), price_ratio);
                score = ad::add(score, term);
            }
        }
        scores.push_back(score);
    }
    return ad::softmax(ad::concat_cols(scores));
}

ArcRecModel::ArcRecModel(ModelConfig config, const AttributedAdjacency& graphs, std::uint64_t seed)
    : config_(config), num_products_(graphs.reference.num_nodes()) {
    if (graphs.layers.empty()) throw ConfigError("model needs at least one attributed network");
    if (config_.dim == 0) throw ConfigError("embedding dimension must be positive");
    for (const GraphLayer& g : graphs.layers) operators_.push_back(propagation_operator(g));
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < operators_.size(); ++k)
        params_.embeddings.push_back(gaussian(num_products_, config_.dim, config_.init_std, rng));
    params_.alpha = PreferenceNet::random(config_.dim, config_.dim, rng);
    params_.beta = PreferenceNet::random(config_.dim, config_.dim, rng);
}

ArcRecModel::ArcRecModel(ModelConfig config, const AttributedAdjacency& graphs, ModelParams params)
    : config_(config), num_products_(graphs.reference.num_nodes()), params_(std::move(params)) {
    for (const GraphLayer& g : graphs.layers) operators_.push_back(propagation_operator(g));
    if (params_.embeddings.size() != operators_.size())
        throw DataError("parameter layer count does not match graphs");
    for (const Matrix& e : params_.embeddings)
        if (e.rows() != num_products_ || e.cols() != config_.dim)
            throw DataError("embedding table shape does not match graphs/config");
}

std::vector<Matrix> ArcRecModel::tables() const {
    std::vector<Matrix> out;
    for (std::size_t k = 0; k < operators_.size(); ++k) {
        if (config_.ablation.use_arn_propagation)
            out.push_back(propagate_combined(operators_[k], params_.embeddings[k], config_.depth));
        else
            out.push_back(params_.embeddings[k]);
    }
    return out;
}

std::vector<Matrix> ArcRecModel::tables_adjoint(const std::vector<Matrix>& grad_tables) const {
    std::vector<Matrix> out;
    for (std::size_t k = 0; k < operators_.size(); ++k) {
        if (config_.ablation.use_arn_propagation)
            out.push_back(propagate_combined_adjoint(operators_[k], grad_tables[k], config_.depth));
        else
            out.push_back(grad_tables[k]);
    }
    return out;
}

PairCache::PairCache(const std::vector<Matrix>& tables, const PreferenceNet& alpha, const PreferenceNet& beta,
                     std::vector<std::size_t> targets, std::vector<std::size_t> refs)
    : num_refs_(refs.size()) {
    const std::size_t n = tables.front().rows();
    target_pos_.assign(n, kMissing);
    ref_pos_.assign(n, kMissing);
    for (std::size_t t = 0; t < targets.size(); ++t) target_pos_.at(targets[t]) = t;
    for (std::size_t r = 0; r < refs.size(); ++r) ref_pos_.at(refs[r]) = r;
    const auto va = alpha.view();
    const auto vb = beta.view();
    for (const Matrix& table : tables) {
        a_.emplace_back(targets.size() * refs.size());
        b_.emplace_back(targets.size() * refs.size());
        kernels::pair_mlp(table.data(), table.cols(), targets, refs, va, vb, a_.back().data(), b_.back().data());
    }
}

double PairCache::interest(std::size_t k, std::size_t target, std::size_t ref) const {
    const std::size_t t = target_pos_[target];
    const std::size_t r = ref_pos_[ref];
    if (t == kMissing || r == kMissing) throw NumericError("pair not in cache");
    return a_[k][t * num_refs_ + r];
}

double PairCache::price_weight(std::size_t k, std::size_t target, std::size_t ref) const {
    const std::size_t t = target_pos_[target];
    const std::size_t r = ref_pos_[ref];
    if (t == kMissing || r == kMissing) throw NumericError("pair not in cache");
    return b_[k][t * num_refs_ + r];
}

std::vector<double> score_candidates(const std::vector<Matrix>& tables, const PairCache& cache,
                                     std::span<const double> prices, std::span<const std::size_t> refs,
                                     std::span<const double> awtp, std::span<const std::size_t> candidates) {
    std::vector<double> out(candidates.size());
    std::vector<double> logits;
    std::vector<std::size_t> live;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const std::size_t target = candidates[c];
        live.clear();
        logits.clear();
        for (std::size_t j : refs) {
            if (j == target) continue;
            live.push_back(j);
            double s = 0.0;
            for (const Matrix& t : tables) s += dot_rows(t.row_span(target), t.row_span(j));
            logits.push_back(s);
        }
        require_refs(live);
        const auto gamma = softmax(logits);
        double r = 0.0;
        for (std::size_t q = 0; q < live.size(); ++q) {
            const std::size_t j = live[q];
            double inner = 0.0;
            for (std::size_t k = 0; k < tables.size(); ++k)
                inner += awtp[k] * (cache.interest(k, target, j) +
                                    cache.price_weight(k, target, j) * (prices[j] - prices[target]));
            r += gamma[q] * inner;
        }
        out[c] = r;
    }
    return out;
}

}  // namespace arcrec
