#include "arcrec/training.hpp"

#include "arcrec/adam.hpp"
#include "arcrec/kernels.hpp"
#include "arcrec/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

namespace arcrec {

namespace {

constexpr std::size_t kNetTensors = 8;

struct TripletGradient {
    std::vector<std::size_t> rows;
    std::vector<Matrix> row_grads;  // per layer, rows.size() x d
    std::vector<Matrix> net_grads;  // alpha w1,b1,w2,b2 then beta
    double term = 0.0;
};

Matrix awtp_row(std::span<const double> w) { return Matrix::row(w); }

void check_reference_cap(const ModelConfig& config) {
    if (config.reference_cap < 2) throw ConfigError("reference_cap must be at least 2");
}

TripletGradient triplet_gradient(const std::vector<Matrix>& tables, const ModelParams& params,
                                 const ModelConfig& config, const TrainingData& data, const Triplet& t) {
    const auto& items = data.items[t.consumer];
    const auto full = most_recent(items, config.reference_cap);
    const auto refs = exclude_target(full, t.positive);
    const std::size_t num_layers = tables.size();

    TripletGradient out;
    out.rows.reserve(refs.size() + 2);
    out.rows.push_back(t.positive);
    out.rows.push_back(t.negative);
    out.rows.insert(out.rows.end(), refs.begin(), refs.end());

    ad::Tape tape;
    std::vector<ad::Var> layers;
    for (const Matrix& table : tables) {
        Matrix local(out.rows.size(), table.cols());
        for (std::size_t r = 0; r < out.rows.size(); ++r) {
            auto src = table.row_span(out.rows[r]);
            std::copy(src.begin(), src.end(), local.row_span(r).begin());
        }
        layers.push_back(tape.leaf(std::move(local)));
    }
    const TapeNet alpha = net_on_tape(tape, params.alpha);
    const TapeNet beta = net_on_tape(tape, params.beta);

    std::vector<std::size_t> local_refs(refs.size());
    std::vector<double> ref_prices(refs.size());
    for (std::size_t r = 0; r < refs.size(); ++r) {
        local_refs[r] = r + 2;
        ref_prices[r] = data.prices.utility[refs[r]];
    }

    ad::Var awtp;
    if (!config.ablation.use_awtp) {
        awtp = tape.constant(awtp_row(uniform_awtp(num_layers)));
    } else if (config.awtp_gradient) {
        // The positive sits in local row 0; every other item of `full` is a reference.
        std::vector<std::size_t> local_full;
        std::vector<double> raw;
        for (std::size_t item : full) {
            if (item == t.positive) {
                local_full.push_back(0);
            } else {
                const auto it = std::find(refs.begin(), refs.end(), item);
                local_full.push_back(2 + static_cast<std::size_t>(it - refs.begin()));
            }
            raw.push_back(data.prices.raw[item]);
        }
        awtp = awtp_on_tape(layers, local_full, raw);
    } else {
        awtp = tape.constant(awtp_row(awtp_scores(full, tables, data.prices.raw).normalized));
    }

    const ad::Var rp = utility_on_tape(layers, 0, local_refs, data.prices.utility[t.positive], ref_prices, awtp,
                                       alpha, beta);
    const ad::Var rn = utility_on_tape(layers, 1, local_refs, data.prices.utility[t.negative], ref_prices, awtp,
                                       alpha, beta);
    const ad::Var term = ad::scale(ad::log_sigmoid(ad::sub(rp, rn)), -1.0);
    out.term = term.value().scalar_value();
    tape.backward(term);

    for (const ad::Var& layer : layers) out.row_grads.push_back(layer.grad());
    for (const TapeNet* net : {&alpha, &beta})
        for (const ad::Var& v : {net->w1, net->b1, net->w2, net->b2}) out.net_grads.push_back(v.grad());
    return out;
}

void add_l2(BatchGradient& g, const ModelParams& params, double l2) {
    const auto tensors = params.tensors();
    for (std::size_t p = 0; p < tensors.size(); ++p) g.grads[p] += *tensors[p] * (2.0 * l2);
    g.loss = g.data_loss + l2 * params.squared_norm();
}

}  // namespace

TripletSampler::TripletSampler(std::span<const std::vector<std::size_t>> items, std::size_t num_products)
    : num_products_(num_products), items_(items.begin(), items.end()) {
    sorted_.reserve(items_.size());
    for (std::size_t u = 0; u < items_.size(); ++u) {
        auto s = items_[u];
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end())
            throw DataError("training items of a consumer must be distinct");
        if (!s.empty() && s.back() >= num_products) throw DataError("training item outside the catalog");
        if (s.size() >= 2 && s.size() < num_products) eligible_.push_back(u);
        sorted_.push_back(std::move(s));
    }
}

Triplet TripletSampler::draw(std::mt19937_64& rng) const {
    if (eligible_.empty()) throw DataError("no consumer is eligible for triplet sampling");
    Triplet t;
    t.consumer = eligible_[std::uniform_int_distribution<std::size_t>(0, eligible_.size() - 1)(rng)];
    const auto& items = items_[t.consumer];
    t.positive = items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
    const auto& bought = sorted_[t.consumer];
    std::uniform_int_distribution<std::size_t> any(0, num_products_ - 1);
    do {
        t.negative = any(rng);
    } while (std::binary_search(bought.begin(), bought.end(), t.negative));
    return t;
}

std::vector<Triplet> TripletSampler::sample(std::size_t count, std::mt19937_64& rng) const {
    std::vector<Triplet> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(draw(rng));
    return out;
}

double bpr_term(double positive, double negative) {
    const double x = positive - negative;
    if (!std::isfinite(x)) throw NumericError("non-finite utility in BPR loss");
    // -log sigmoid(x) = log(1 + exp(-x)), evaluated without overflow.
    return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double bpr_loss(std::span<const double> positive, std::span<const double> negative, double squared_norm,
                double l2) {
    if (positive.size() != negative.size()) throw NumericError("BPR loss needs paired utilities");
    double s = 0.0;
    for (std::size_t i = 0; i < positive.size(); ++i) s += bpr_term(positive[i], negative[i]);
    return s + l2 * squared_norm;
}

std::vector<std::size_t> triplet_references(std::span<const std::size_t> items, std::size_t cap,
                                            std::size_t positive) {
    return exclude_target(most_recent(items, cap), positive);
}

BatchGradient batch_gradient(const ArcRecModel& model, const TrainingData& data, std::span<const Triplet> batch,
                             double l2) {
    check_reference_cap(model.config());
    const auto tables = model.tables();
    const ModelParams& params = model.params();

    std::vector<TripletGradient> parts(batch.size());
    std::vector<std::exception_ptr> errors(batch.size());
#pragma omp parallel for schedule(dynamic, 8) num_threads(kernels::workers())
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(batch.size()); ++t) {
        try {
            parts[t] = triplet_gradient(tables, params, model.config(), data, batch[t]);
        } catch (...) {
            errors[t] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    // Fixed-order reduction keeps results independent of the worker count.
    BatchGradient g;
    std::vector<Matrix> grad_tables;
    for (const Matrix& t : tables) grad_tables.emplace_back(t.rows(), t.cols());
    std::vector<Matrix> net_grads;
    for (std::size_t i = 0; i < kNetTensors; ++i) {
        const Matrix& ref = *params.tensors()[params.embeddings.size() + i];
        net_grads.emplace_back(ref.rows(), ref.cols());
    }
    for (const TripletGradient& p : parts) {
        g.data_loss += p.term;
        for (std::size_t k = 0; k < grad_tables.size(); ++k)
            for (std::size_t r = 0; r < p.rows.size(); ++r) {
                auto dst = grad_tables[k].row_span(p.rows[r]);
                auto src = p.row_grads[k].row_span(r);
                for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
            }
        for (std::size_t i = 0; i < kNetTensors; ++i) net_grads[i] += p.net_grads[i];
    }

    g.grads = model.tables_adjoint(grad_tables);
    for (Matrix& m : net_grads) g.grads.push_back(std::move(m));
    add_l2(g, params, l2);
    return g;
}

BatchGradient batch_gradient_reference(const ArcRecModel& model, const TrainingData& data,
                                       std::span<const Triplet> batch, double l2) {
    check_reference_cap(model.config());
    const ModelConfig& config = model.config();
    const ModelParams& params = model.params();
    const auto detached = model.tables();

    ad::Tape tape;
    std::vector<ad::Var> base, layers;
    for (std::size_t k = 0; k < params.embeddings.size(); ++k) {
        base.push_back(tape.leaf(params.embeddings[k]));
        layers.push_back(config.ablation.use_arn_propagation
                             ? propagate_on_tape(model.operators()[k], base.back(), config.depth)
                             : base.back());
    }
    const TapeNet alpha = net_on_tape(tape, params.alpha);
    const TapeNet beta = net_on_tape(tape, params.beta);

    ad::Var total = tape.constant(Matrix::scalar(0.0));
    for (const Triplet& t : batch) {
        const auto full = most_recent(data.items[t.consumer], config.reference_cap);
        const auto refs = exclude_target(full, t.positive);
        std::vector<double> ref_prices;
        for (std::size_t j : refs) ref_prices.push_back(data.prices.utility[j]);
        ad::Var awtp;
        if (!config.ablation.use_awtp) {
            awtp = tape.constant(awtp_row(uniform_awtp(layers.size())));
        } else if (config.awtp_gradient) {
            std::vector<double> raw;
            for (std::size_t j : full) raw.push_back(data.prices.raw[j]);
            awtp = awtp_on_tape(layers, full, raw);
        } else {
            awtp = tape.constant(awtp_row(awtp_scores(full, detached, data.prices.raw).normalized));
        }
        const ad::Var rp =
            utility_on_tape(layers, t.positive, refs, data.prices.utility[t.positive], ref_prices, awtp, alpha, beta);
        const ad::Var rn =
            utility_on_tape(layers, t.negative, refs, data.prices.utility[t.negative], ref_prices, awtp, alpha, beta);
        total = ad::sub(total, ad::log_sigmoid(ad::sub(rp, rn)));
    }
    const double data_loss = total.value().scalar_value();

    std::vector<ad::Var> leaves = base;
    for (const TapeNet* net : {&alpha, &beta})
        for (const ad::Var& v : {net->w1, net->b1, net->w2, net->b2}) leaves.push_back(v);
    ad::Var loss = total;
    for (const ad::Var& v : leaves) loss = ad::add(loss, ad::scale(ad::dot(v, v), l2));
    tape.backward(loss);

    BatchGradient g;
    g.data_loss = data_loss;
    g.loss = loss.value().scalar_value();
    for (const ad::Var& v : leaves) g.grads.push_back(v.grad());
    return g;
}

TrainResult train(ArcRecModel& model, const TrainingData& data, const TrainConfig& config,
                  const Validator& validator, const std::function<void(const EpochRecord&)>& on_epoch) {
    if (config.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (config.max_epochs < 1) throw ConfigError("max_epochs must be positive");
    if (config.validate_every < 1) throw ConfigError("validate_every must be positive");
    if (!(config.learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (!(config.l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
    if (data.items.empty()) throw DataError("empty training split");

    const TripletSampler sampler(data.items, model.num_products());
    if (sampler.empty()) throw DataError("empty training split: no consumer has two distinct training items");
    std::size_t epoch_size = 0;
    for (std::size_t u : sampler.eligible()) epoch_size += data.items[u].size();

    Adam adam(AdamOptions{config.learning_rate});
    std::mt19937_64 rng(config.seed);
    TrainResult result;
    std::optional<ModelParams> best_params;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        double total = 0.0;
        for (std::size_t done = 0; done < epoch_size;) {
            const std::size_t n = std::min(config.batch_size, epoch_size - done);
            const auto batch = sampler.sample(n, rng);
            BatchGradient g = batch_gradient(model, data, batch, config.l2);
            if (!std::isfinite(g.loss))
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
            std::vector<const Matrix*> grads;
            for (const Matrix& m : g.grads) grads.push_back(&m);
            const auto params = model.params().tensors();
            adam.step(params, grads);
            total += g.data_loss;
            done += n;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = total / static_cast<double>(epoch_size);

        bool stop = false;
        if (validator && (epoch % config.validate_every == 0 || epoch == config.max_epochs)) {
            const ValidationScore s = validator(model);
            rec.val_hr10 = s.hr10;
            rec.val_ndcg10 = s.ndcg10;
            const bool better = !result.best || s.hr10 > result.best->hr10 ||
                                (s.hr10 == result.best->hr10 && s.ndcg10 > result.best->ndcg10);
            if (better) {
                result.best = s;
                result.best_epoch = epoch;
                best_params = model.params();
            } else if (config.patience > 0 && epoch - result.best_epoch >= config.patience) {
                stop = true;
            }
        }
        result.curve.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (stop) break;
    }
    if (best_params) {
        model.params() = std::move(*best_params);
    } else {
        result.best_epoch = static_cast<int>(result.curve.size());
    }
    return result;
}

}  // namespace arcrec
