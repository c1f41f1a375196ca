#include "arcrec/config.hpp"

#include <fstream>
#include <set>

namespace arcrec {

namespace {

using nlohmann::json;

class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        try {
            read(j_.at(key), out);
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + path_ + key + "': " + e.what());
        }
    }

    const json* child(const std::string& key) {
        known_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!known_.count(item.key())) throw ConfigError("unknown config key '" + path_ + item.key() + "'");
    }

private:
    template <class T>
    void read(const json& v, T& out) {
        out = v.get<T>();
    }
    void read(const json& v, std::size_t& out) {
        if (!v.is_number_integer()) throw ConfigError("config key under '" + path_ + "' must be an integer");
        const auto x = v.get<std::int64_t>();
        if (x < 0) throw ConfigError("config key under '" + path_ + "' must be non-negative");
        out = static_cast<std::size_t>(x);
    }
    void read(const json& v, int& out) {
        if (!v.is_number_integer()) throw ConfigError("config key under '" + path_ + "' must be an integer");
        out = v.get<int>();
    }
    void read(const json& v, std::optional<std::int64_t>& out) {
        if (v.is_null())
            out.reset();
        else
            out = v.get<std::int64_t>();
    }
    void read(const json& v, std::vector<std::size_t>& out) {
        out.clear();
        for (const json& e : v) {
            std::size_t x = 0;
            read(e, x);
            out.push_back(x);
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> known_;
};

json optional_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void RunConfig::propagate_seed() {
    simulator.seed = seed;
    training.seed = seed;
    evaluation.treatment.seed = seed;
}

void RunConfig::validate() const {
    if (workers < 1) throw ConfigError("workers must be >= 1");
    arcrec::validate(simulator);
    if (graphs.numeric_bins < 1) throw ConfigError("graphs.numeric_bins must be >= 1");
    if (model.dim == 0) throw ConfigError("model.dim must be positive");
    if (model.depth < 0 || model.depth > 20) throw ConfigError("model.depth must be in [0, 20]");
    if (model.reference_cap < 2) throw ConfigError("model.reference_cap must be >= 2");
    if (!(model.init_std > 0.0)) throw ConfigError("model.init_std must be positive");
    if (training.batch_size == 0) throw ConfigError("training.batch_size must be positive");
    if (!(training.learning_rate >= 0.0)) throw ConfigError("training.learning_rate must be non-negative");
    if (!(training.l2 >= 0.0)) throw ConfigError("training.l2 must be non-negative");
    if (training.max_epochs < 1) throw ConfigError("training.max_epochs must be positive");
    if (training.patience < 0) throw ConfigError("training.patience must be >= 0");
    if (training.validate_every < 1) throw ConfigError("training.validate_every must be positive");
    if (!(cold_fraction >= 0.0 && cold_fraction < 1.0)) throw ConfigError("cold_fraction must be in [0, 1)");
    for (std::size_t k : evaluation.ks)
        if (k == 0) throw ConfigError("evaluation.ks entries must be positive");
    for (std::size_t k : evaluation.cold_ks)
        if (k == 0) throw ConfigError("evaluation.cold_ks entries must be positive");
    const auto& t = evaluation.treatment;
    if (t.group_size == 0 || t.candidates == 0 || t.repetitions == 0)
        throw ConfigError("treatment sizes must be positive");
    if (!(t.group_quantile > 0.0 && t.group_quantile < 1.0))
        throw ConfigError("treatment.group_quantile must be in (0, 1)");
}

json to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["standardize_prices"] = c.standardize_prices;
    j["cold_fraction"] = c.cold_fraction;
    j["emit_sensitivity"] = c.emit_sensitivity;
    const auto& s = c.simulator;
    j["simulator"] = {{"num_consumers", s.num_consumers}, {"num_products", s.num_products},
                      {"full_scale", s.full_scale},     {"num_attributes", s.num_attributes},
                      {"min_levels", s.min_levels},       {"max_levels", s.max_levels},
                      {"min_periods", s.min_periods},     {"max_periods", s.max_periods},
                      {"noise_variance", s.noise_variance}};
    const auto& g = c.graphs;
    j["graphs"] = {{"weighted", g.weighted},
                   {"window_start", optional_json(g.window_start)},
                   {"window_end", optional_json(g.window_end)},
                   {"numeric_attributes", g.numeric_attributes},
                   {"numeric_bins", g.numeric_bins}};
    const auto& m = c.model;
    j["model"] = {{"dim", m.dim},
                  {"depth", m.depth},
                  {"reference_cap", m.reference_cap},
                  {"init_std", m.init_std},
                  {"awtp_gradient", m.awtp_gradient},
                  {"use_arn_propagation", m.ablation.use_arn_propagation},
                  {"decompose_by_attribute", m.ablation.decompose_by_attribute},
                  {"use_awtp", m.ablation.use_awtp}};
    const auto& t = c.training;
    j["training"] = {{"batch_size", t.batch_size}, {"learning_rate", t.learning_rate},
                     {"l2", t.l2},                 {"max_epochs", t.max_epochs},
                     {"patience", t.patience},     {"validate_every", t.validate_every}};
    const auto& e = c.evaluation;
    j["evaluation"] = {{"ks", e.ks},
                       {"cold_ks", e.cold_ks},
                       {"treatment",
                        {{"group_size", e.treatment.group_size},
                         {"candidates", e.treatment.candidates},
                         {"repetitions", e.treatment.repetitions},
                         {"treatments", e.treatment.treatments},
                         {"group_quantile", e.treatment.group_quantile},
                         {"full_assortment", e.treatment.full_assortment}}}};
    return j;
}

RunConfig merge_json(RunConfig c, const json& j) {
    Section top(j, "");
    top.get("seed", c.seed);
    top.get("workers", c.workers);
    top.get("standardize_prices", c.standardize_prices);
    top.get("cold_fraction", c.cold_fraction);
    top.get("emit_sensitivity", c.emit_sensitivity);
    if (const json* sj = top.child("simulator")) {
        Section s(*sj, "simulator.");
        s.get("num_consumers", c.simulator.num_consumers);
        s.get("num_products", c.simulator.num_products);
        s.get("full_scale", c.simulator.full_scale);
        s.get("num_attributes", c.simulator.num_attributes);
        s.get("min_levels", c.simulator.min_levels);
        s.get("max_levels", c.simulator.max_levels);
        s.get("min_periods", c.simulator.min_periods);
        s.get("max_periods", c.simulator.max_periods);
        s.get("noise_variance", c.simulator.noise_variance);
        s.finish();
    }
    if (const json* gj = top.child("graphs")) {
        Section s(*gj, "graphs.");
        s.get("weighted", c.graphs.weighted);
        s.get("window_start", c.graphs.window_start);
        s.get("window_end", c.graphs.window_end);
        s.get("numeric_attributes", c.graphs.numeric_attributes);
        s.get("numeric_bins", c.graphs.numeric_bins);
        s.finish();
    }
    if (const json* mj = top.child("model")) {
        Section s(*mj, "model.");
        s.get("dim", c.model.dim);
        s.get("depth", c.model.depth);
        s.get("reference_cap", c.model.reference_cap);
        s.get("init_std", c.model.init_std);
        s.get("awtp_gradient", c.model.awtp_gradient);
        s.get("use_arn_propagation", c.model.ablation.use_arn_propagation);
        s.get("decompose_by_attribute", c.model.ablation.decompose_by_attribute);
        s.get("use_awtp", c.model.ablation.use_awtp);
        s.finish();
    }
    if (const json* tj = top.child("training")) {
        Section s(*tj, "training.");
        s.get("batch_size", c.training.batch_size);
        s.get("learning_rate", c.training.learning_rate);
        s.get("l2", c.training.l2);
        s.get("max_epochs", c.training.max_epochs);
        s.get("patience", c.training.patience);
        s.get("validate_every", c.training.validate_every);
        s.finish();
    }
    if (const json* ej = top.child("evaluation")) {
        Section s(*ej, "evaluation.");
        s.get("ks", c.evaluation.ks);
        s.get("cold_ks", c.evaluation.cold_ks);
        if (const json* tj = s.child("treatment")) {
            Section t(*tj, "evaluation.treatment.");
            auto& tc = c.evaluation.treatment;
            t.get("group_size", tc.group_size);
            t.get("candidates", tc.candidates);
            t.get("repetitions", tc.repetitions);
            t.get("treatments", tc.treatments);
            t.get("group_quantile", tc.group_quantile);
            t.get("full_assortment", tc.full_assortment);
            t.finish();
        }
        s.finish();
    }
    top.finish();
    c.propagate_seed();
    return c;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return merge_json(std::move(base), j);
}

GraphOptions graph_options(const RunConfig& config) {
    GraphOptions o;
    o.weighted = config.graphs.weighted;
    o.window_start = config.graphs.window_start;
    o.window_end = config.graphs.window_end;
    o.decompose_by_attribute = config.model.ablation.decompose_by_attribute;
    return o;
}

}  // namespace arcrec
