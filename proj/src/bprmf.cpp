#include "arcrec/bprmf.hpp"

#include "arcrec/adam.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace arcrec {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

class BprMfPrepared : public PreparedConsumer {
public:
    BprMfPrepared(const BprMf& model, std::size_t consumer, std::span<const std::size_t> candidates)
        : scores_(candidates.size()) {
        for (std::size_t c = 0; c < candidates.size(); ++c) scores_[c] = model.score(consumer, candidates[c]);
    }
    std::vector<double> score(std::span<const double>) const override { return scores_; }

private:
    std::vector<double> scores_;
};

}  // namespace

BprMf::BprMf(std::size_t num_consumers, std::size_t num_products, BprMfConfig config, std::uint64_t seed)
    : users(num_consumers, config.dim), items(num_products, config.dim) {
    if (config.dim == 0) throw ConfigError("embedding dimension must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, config.init_std);
    for (double& v : users.values()) v = dist(rng);
    for (double& v : items.values()) v = dist(rng);
}

double BprMf::score(std::size_t consumer, std::size_t product) const {
    const auto u = users.row_span(consumer);
    const auto i = items.row_span(product);
    double s = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) s += u[c] * i[c];
    return s;
}

BatchGradient bprmf_batch_gradient(const BprMf& model, std::span<const Triplet> batch, double l2) {
    BatchGradient g;
    g.grads.emplace_back(model.users.rows(), model.users.cols());
    g.grads.emplace_back(model.items.rows(), model.items.cols());
    Matrix& du = g.grads[0];
    Matrix& di = g.grads[1];
    const std::size_t d = model.users.cols();
    for (const Triplet& t : batch) {
        const double x = model.score(t.consumer, t.positive) - model.score(t.consumer, t.negative);
        g.data_loss += bpr_term(x, 0.0);
        const double coef = -sigmoid(-x);  // d(-log sigmoid(x))/dx
        const auto u = model.users.row_span(t.consumer);
        const auto ip = model.items.row_span(t.positive);
        const auto in = model.items.row_span(t.negative);
        auto gu = du.row_span(t.consumer);
        auto gp = di.row_span(t.positive);
        auto gn = di.row_span(t.negative);
        for (std::size_t c = 0; c < d; ++c) {
            gu[c] += coef * (ip[c] - in[c]);
            gp[c] += coef * u[c];
            gn[c] -= coef * u[c];
        }
    }
    du += model.users * (2.0 * l2);
    di += model.items * (2.0 * l2);
    g.loss = g.data_loss + l2 * (model.users.squared_norm() + model.items.squared_norm());
    return g;
}

TrainResult train_bprmf(BprMf& model, std::span<const std::vector<std::size_t>> items, const TrainConfig& config,
                        const std::function<ValidationScore(const BprMf&)>& validator,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
    if (config.batch_size == 0 || config.max_epochs < 1 || config.validate_every < 1)
        throw ConfigError("invalid training schedule");
    if (items.size() != model.num_consumers()) throw DataError("training items do not match the consumer count");
    const TripletSampler sampler(items, model.num_products());
    if (sampler.empty()) throw DataError("empty training split: no consumer has two distinct training items");
    std::size_t epoch_size = 0;
    for (std::size_t u : sampler.eligible()) epoch_size += items[u].size();

    Adam adam(AdamOptions{config.learning_rate});
    std::mt19937_64 rng(config.seed);
    TrainResult result;
    std::optional<BprMf> best_model;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        double total = 0.0;
        for (std::size_t done = 0; done < epoch_size;) {
            const std::size_t n = std::min(config.batch_size, epoch_size - done);
            const auto batch = sampler.sample(n, rng);
            const BatchGradient g = bprmf_batch_gradient(model, batch, config.l2);
            if (!std::isfinite(g.loss))
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
            Matrix* params[] = {&model.users, &model.items};
            const Matrix* grads[] = {&g.grads[0], &g.grads[1]};
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
            if (!result.best || s.hr10 > result.best->hr10 ||
                (s.hr10 == result.best->hr10 && s.ndcg10 > result.best->ndcg10)) {
                result.best = s;
                result.best_epoch = epoch;
                best_model = model;
            } else if (config.patience > 0 && epoch - result.best_epoch >= config.patience) {
                stop = true;
            }
        }
        result.curve.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (stop) break;
    }
    if (best_model)
        model = std::move(*best_model);
    else
        result.best_epoch = static_cast<int>(result.curve.size());
    return result;
}

std::unique_ptr<PreparedConsumer> BprMfScorer::prepare(std::size_t consumer, std::span<const std::size_t>,
                                                       std::span<const std::size_t> candidates) const {
    if (consumer >= model_.num_consumers()) throw DataError("consumer outside the baseline model");
    return std::make_unique<BprMfPrepared>(model_, consumer, candidates);
}

}  // namespace arcrec
