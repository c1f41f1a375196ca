#include "arcrec/commands.hpp"

#include "arcrec/checkpoint.hpp"
#include "arcrec/config.hpp"
#include "arcrec/io.hpp"
#include "arcrec/kernels.hpp"
#include "arcrec/metrics.hpp"
#include "arcrec/propagation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>

namespace arcrec {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// CLI flags that override config values only when given.
class Overrides {
public:
    template <class T>
    CLI::Option* option(CLI::App* app, const std::string& name, std::function<void(RunConfig&, const T&)> set,
                        const std::string& desc) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(name, *value, desc);
        apply_.push_back([opt, value, set](RunConfig& c) {
            if (opt->count() > 0) set(c, *value);
        });
        return opt;
    }

    CLI::Option* flag(CLI::App* app, const std::string& name, std::function<void(RunConfig&)> set,
                      const std::string& desc) {
        CLI::Option* opt = app->add_flag(name, desc);
        apply_.push_back([opt, set](RunConfig& c) {
            if (opt->count() > 0) set(c);
        });
        return opt;
    }

    void apply(RunConfig& c) const {
        for (const auto& f : apply_) f(c);
    }

private:
    std::vector<std::function<void(RunConfig&)>> apply_;
};

struct Globals {
    std::string config_path;
    std::uint64_t seed = 0;
    int workers = 1;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
};

RunConfig effective_config(const Globals& g, const Overrides& ov) {
    RunConfig c;
    if (!g.config_path.empty()) c = load_config_file(g.config_path, c);
    if (g.seed_opt->count() > 0) c.seed = g.seed;
    if (g.workers_opt->count() > 0) c.workers = g.workers;
    ov.apply(c);
    c.propagate_seed();
    c.validate();
    kernels::set_workers(c.workers);
    return c;
}

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

void require_dir(const std::string& dir) {
    if (dir.empty()) throw ConfigError("an output directory is required");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir);
}

std::string render_csv(const std::function<void(std::ostream&)>& write) {
    std::ostringstream ss;
    write(ss);
    return ss.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

ProductCatalog load_catalog(const std::string& path, const RunConfig& config) {
    ProductCatalog catalog = read_catalog_file(path);
    for (const std::string& name : config.graphs.numeric_attributes) {
        const auto& names = catalog.attribute_names();
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw ConfigError("numeric attribute '" + name + "' is not a catalog column");
        catalog.bin_numeric_attribute(static_cast<std::size_t>(it - names.begin()), config.graphs.numeric_bins);
    }
    return catalog;
}

TransactionLog load_log(const std::string& path, const ProductCatalog& catalog) {
    TransactionLog log(read_transactions_file(path), catalog);
    if (log.empty()) throw DataError(path + ": no purchases");
    return log;
}

void require_file(const std::string& path, const char* flag) {
    if (path.empty()) throw ConfigError(std::string("missing required option ") + flag);
}

// ---- simulate -----------------------------------------------------------

struct SimulateArgs {
    std::string out_dir;
};

int cmd_simulate(const RunConfig& config, const SimulateArgs& args, std::ostream& out) {
    require_dir(args.out_dir);
    const SimMarket market = generate_market(config.simulator);
    const SimResult sim = simulate(market, config.simulator);
    const fs::path dir(args.out_dir);

    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("catalog.csv", render_csv([&](std::ostream& o) { write_catalog(o, sim.catalog); }));
    files.emplace_back("transactions.csv",
                       render_csv([&](std::ostream& o) { write_transactions(o, sim.log, sim.catalog); }));
    files.emplace_back("truth.csv", render_csv([&](std::ostream& o) { write_truth(o, sim); }));
    if (config.emit_sensitivity)
        files.emplace_back("sensitivity.csv", render_csv([&](std::ostream& o) { write_sensitivity(o, market, sim); }));

    json manifest;
    manifest["command"] = "simulate";
    manifest["config"] = to_json(config);
    manifest["market"] = {{"consumers", market.num_consumers()},
                          {"products", market.num_products()},
                          {"attribute_levels", market.levels},
                          {"purchases", sim.log.size()}};
    for (const auto& [name, content] : files) {
        write_file_atomic(join(dir, name), content);
        manifest["outputs"][name] = sha256_hex(content);
    }
    write_file_atomic(join(dir, "manifest.json"), dump(manifest));
    out << "simulated " << market.num_consumers() << " consumers, " << market.num_products() << " products, "
        << sim.log.size() << " purchases -> " << args.out_dir << "\n";
    return kExitOk;
}

// ---- graphs -------------------------------------------------------------

struct DataArgs {
    std::string catalog;
    std::string transactions;
};

struct GraphsArgs {
    DataArgs data;
    std::string out_dir;
};

int cmd_graphs(const RunConfig& config, const GraphsArgs& args, std::ostream& out) {
    require_file(args.data.catalog, "--catalog");
    require_file(args.data.transactions, "--transactions");
    require_dir(args.out_dir);
    const ProductCatalog catalog = load_catalog(args.data.catalog, config);
    const TransactionLog log = load_log(args.data.transactions, catalog);
    const AttributedAdjacency graphs = build_attributed_networks(log, catalog, graph_options(config));
    const fs::path dir(args.out_dir);

    json summary;
    summary["command"] = "graphs";
    summary["config"] = to_json(config);
    summary["inputs"] = {{"catalog_sha256", sha256_file(args.data.catalog)},
                         {"transactions_sha256", sha256_file(args.data.transactions)}};
    auto emit = [&](const GraphLayer& layer, const std::string& file) {
        check_layer_invariants(layer);
        const std::string content = render_csv([&](std::ostream& o) { write_edge_list(o, layer, catalog); });
        write_file_atomic(join(dir, file), content);
        summary["layers"].push_back(
            {{"name", layer.name}, {"file", file}, {"nodes", layer.num_nodes()}, {"edges", layer.num_edges()},
             {"sha256", sha256_hex(content)}});
    };
    emit(graphs.reference, "edges_reference.csv");
    for (std::size_t k = 0; k < graphs.layers.size(); ++k)
        emit(graphs.layers[k], "edges_layer" + std::to_string(k + 1) + ".csv");
    write_file_atomic(join(dir, "graphs.json"), dump(summary));
    out << "reference network: " << graphs.reference.num_edges() << " edges; " << graphs.layers.size()
        << " attributed networks -> " << args.out_dir << "\n";
    return kExitOk;
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
    DataArgs data;
    std::string out_dir;
    bool dump_embeddings = false;
};

json epoch_json(const EpochRecord& r) {
    json j{{"epoch", r.epoch}, {"loss", r.loss}};
    j["val_hr10"] = r.val_hr10 ? json(*r.val_hr10) : json(nullptr);
    j["val_ndcg10"] = r.val_ndcg10 ? json(*r.val_ndcg10) : json(nullptr);
    return j;
}

int cmd_train(const RunConfig& config, const TrainArgs& args, std::ostream& out) {
    require_file(args.data.catalog, "--catalog");
    require_file(args.data.transactions, "--transactions");
    require_dir(args.out_dir);
    const ProductCatalog full_catalog = load_catalog(args.data.catalog, config);
    const TransactionLog full_log = load_log(args.data.transactions, full_catalog);

    ProductCatalog catalog = full_catalog;
    TransactionLog log = full_log;
    std::vector<std::string> cold_ids;
    if (config.cold_fraction > 0.0) {
        ColdStartSetup setup = hold_out_products(full_catalog, full_log, config.cold_fraction, config.seed);
        for (std::size_t c : setup.cold) cold_ids.push_back(full_catalog.ids()[c]);
        catalog = std::move(setup.warm_catalog);
        log = std::move(setup.warm_log);
    }

    const LooSplit split = leave_last_one_out_split(log);
    if (split.consumers.empty()) throw DataError("empty training split: no consumer has two distinct purchases");
    const AttributedAdjacency graphs = build_attributed_networks(split.train_log, catalog, graph_options(config));
    const PriceSpace prices = PriceSpace::make(catalog.prices(), config.standardize_prices);
    ArcRecModel model(config.model, graphs, config.seed);
    const TrainingData data{split.train_items, prices};

    const bool has_validation = std::any_of(split.consumers.begin(), split.consumers.end(),
                                            [](const ConsumerSplit& c) { return c.validation.has_value(); });
    Validator validator;
    if (has_validation) {
        validator = [&](const ArcRecModel& m) {
            const ArcRecScorer scorer = ArcRecScorer::from_model(m, prices);
            const std::size_t k10[] = {10};
            const auto r = evaluate_ranking(scorer, split, prices.raw, catalog.size(), HeldOut::validation, k10);
            return ValidationScore{r.hr.at(10), r.ndcg.at(10)};
        };
    }

    const std::string catalog_sha = sha256_file(args.data.catalog);
    const std::string transactions_sha = sha256_file(args.data.transactions);
    const json header{{"config", to_json(config)},
                      {"inputs", {{"catalog_sha256", catalog_sha}, {"transactions_sha256", transactions_sha}}}};
    std::string log_text = header.dump() + "\n";
    const TrainResult result = train(model, data, config.training, validator, [&](const EpochRecord& r) {
        log_text += epoch_json(r).dump() + "\n";
    });

    Checkpoint ckpt;
    ckpt.config = config;
    ckpt.catalog_sha256 = catalog_sha;
    ckpt.transactions_sha256 = transactions_sha;
    ckpt.attribute_names = catalog.attribute_names();
    for (const GraphLayer& g : graphs.layers) ckpt.layer_names.push_back(g.name);
    ckpt.product_ids = catalog.ids();
    ckpt.cold_product_ids = cold_ids;
    ckpt.prices = prices;
    ckpt.params = model.params();
    ckpt.tables = model.tables();
    ckpt.consumer_ids = log.consumer_ids();
    ckpt.train_items = split.train_items;
    ckpt.best_epoch = result.best_epoch;
    ckpt.best_validation = result.best;

    const fs::path dir(args.out_dir);
    const std::string ckpt_text = serialize_checkpoint(ckpt);
    write_file_atomic(join(dir, "checkpoint.json"), ckpt_text);
    write_file_atomic(join(dir, "training_log.jsonl"), log_text);
    if (args.dump_embeddings)
        write_file_atomic(join(dir, "embeddings.csv"), render_csv([&](std::ostream& o) {
                              write_embedding_snapshot(o, ckpt.layer_names, ckpt.tables, ckpt.product_ids);
                          }));
    out << "trained " << result.curve.size() << " epochs (best " << result.best_epoch << ")";
    if (result.best) out << ", val HR@10 " << result.best->hr10;
    out << "; checkpoint sha256 " << sha256_hex(ckpt_text) << "\n";
    return kExitOk;
}

// ---- evaluate -----------------------------------------------------------

struct EvaluateArgs {
    std::string checkpoint;
    DataArgs data;
    std::string mode = "standard";
    std::string truth;
    std::string sensitivity;
    std::string out_dir;
};

struct LoadedData {
    Checkpoint ckpt;
    ProductCatalog catalog;
    TransactionLog log;
    std::vector<std::size_t> cold;
};

LoadedData load_for_evaluation(const EvaluateArgs& args) {
    require_file(args.checkpoint, "--checkpoint");
    require_file(args.data.catalog, "--catalog");
    require_file(args.data.transactions, "--transactions");
    LoadedData d;
    d.ckpt = load_checkpoint(args.checkpoint);
    if (sha256_file(args.data.catalog) != d.ckpt.catalog_sha256)
        throw DataError("catalog " + args.data.catalog + " does not match the checkpoint's catalog digest");
    d.catalog = load_catalog(args.data.catalog, d.ckpt.config);
    d.log = load_log(args.data.transactions, d.catalog);
    for (const std::string& id : d.ckpt.cold_product_ids) d.cold.push_back(d.catalog.index_of(id));
    return d;
}

json ranking_json(const RankingReport& r) {
    json m = json::object();
    for (const auto& [k, v] : r.hr) m["HR@" + std::to_string(k)] = v;
    for (const auto& [k, v] : r.ndcg) m["nDCG@" + std::to_string(k)] = v;
    return m;
}

std::vector<std::vector<std::size_t>> full_histories(const TransactionLog& log) {
    std::vector<std::vector<std::size_t>> refs;
    for (const auto& h : log.histories()) refs.push_back(distinct_by_last_purchase(h));
    return refs;
}

int cmd_evaluate(const RunConfig& config, const EvaluateArgs& args, std::ostream& out) {
    const std::vector<std::string> modes{"standard", "coldstart", "correlation", "treatment"};
    if (std::find(modes.begin(), modes.end(), args.mode) == modes.end())
        throw ConfigError("unknown evaluation mode '" + args.mode + "'");
    if (args.mode == "correlation" && args.truth.empty()) throw ConfigError("correlation mode requires --truth");
    require_dir(args.out_dir);
    LoadedData d = load_for_evaluation(args);
    const Checkpoint& ckpt = d.ckpt;
    const fs::path dir(args.out_dir);

    json report;
    report["command"] = "evaluate";
    report["mode"] = args.mode;
    report["config"] = to_json(config);
    report["checkpoint_config"] = to_json(ckpt.config);
    report["inputs"] = {{"checkpoint_sha256", sha256_file(args.checkpoint)},
                        {"catalog_sha256", ckpt.catalog_sha256},
                        {"transactions_sha256", sha256_file(args.data.transactions)}};

    if (args.mode == "coldstart") {
        if (d.cold.empty()) throw ConfigError("checkpoint was trained without a cold-start holdout");
        const ColdStartSetup setup = hold_out_products(d.catalog, d.log, d.cold);
        if (setup.warm_catalog.ids() != ckpt.product_ids) throw DataError("catalog products differ from checkpoint");
        const ArcRecScorer scorer(extend_with_cold(ckpt.tables, setup, d.catalog), ckpt.params.alpha,
                                  ckpt.params.beta, ckpt.prices, ckpt.config.model);
        const ColdStartReport r = evaluate_cold_start(scorer, setup, d.log, d.catalog, config.evaluation.cold_ks);
        report["metrics"] = ranking_json(r.ranking);
        report["consumers"] = r.ranking.consumers;
        report["cold_products"] = r.cold_products;
        for (const auto& [k, v] : r.random_hr) report["random_hr"]["HR@" + std::to_string(k)] = v;
        report["empty"] = r.ranking.consumers == 0;
        out << "cold start: " << r.ranking.consumers << " consumers, " << r.cold_products << " cold products\n";
    } else {
        if (!d.cold.empty() && args.mode != "standard")
            throw ConfigError(args.mode + " mode needs a checkpoint trained on the full catalog");
        ProductCatalog catalog = d.catalog;
        TransactionLog log = d.log;
        if (!d.cold.empty()) {
            ColdStartSetup setup = hold_out_products(d.catalog, d.log, d.cold);
            catalog = std::move(setup.warm_catalog);
            log = std::move(setup.warm_log);
        }
        if (catalog.ids() != ckpt.product_ids) throw DataError("catalog products differ from checkpoint");
        const ArcRecScorer scorer = ckpt.scorer();
        const auto& raw = catalog.prices();

        if (args.mode == "standard") {
            const LooSplit split = leave_last_one_out_split(log);
            const RankingReport r =
                evaluate_ranking(scorer, split, raw, catalog.size(), HeldOut::test, config.evaluation.ks);
            report["metrics"] = ranking_json(r);
            report["consumers"] = r.consumers;
            out << "standard: " << r.consumers << " consumers\n";
        } else if (args.mode == "correlation") {
            const std::string truth_text = read_file(args.truth);
            std::istringstream in(truth_text);
            const TruthTable truth = read_truth(in, catalog, log, args.truth);
            report["inputs"]["truth_sha256"] = sha256_hex(truth_text);
            const CorrelationReport r = evaluate_correlation(scorer, full_histories(log), truth.ranking, raw,
                                                             catalog.size());
            report["metrics"] = {{"kendall_tau", r.tau}, {"spearman_rho", r.rho}};
            report["consumers"] = r.consumers;
            out << "correlation: tau " << r.tau << ", rho " << r.rho << "\n";
        } else {
            const auto refs = full_histories(log);
            std::vector<double> sensitivity(refs.size(), 0.0);
            if (!args.sensitivity.empty()) {
                const std::string text = read_file(args.sensitivity);
                std::istringstream in(text);
                sensitivity = read_sensitivity(in, log, args.sensitivity);
                report["inputs"]["sensitivity_sha256"] = sha256_hex(text);
                report["grouping"] = "external sensitivity";
            } else {
                for (std::size_t u = 0; u < refs.size(); ++u)
                    if (!refs[u].empty()) sensitivity[u] = scorer.price_sensitivity(refs[u], raw);
                report["grouping"] = "model price-preference proxy";
            }
            const TreatmentReport r = treatment_experiment(scorer, refs, sensitivity, raw, config.evaluation.treatment);
            report["group_size"] = r.group_size;
            for (const auto& s : r.summary)
                report["summary"].push_back(
                    {{"treatment", s.treatment}, {"group", s.group}, {"ate_mean", s.mean}, {"ate_std", s.stddev}});
            write_file_atomic(join(dir, "treatment.csv"),
                              render_csv([&](std::ostream& o) { write_treatment_csv(o, r); }));
            out << "treatment: " << r.rows.size() << " rows\n";
        }
    }
    write_file_atomic(join(dir, "report_" + args.mode + ".json"), dump(report));
    return kExitOk;
}

// ---- recommend / awtp ---------------------------------------------------

struct RecommendArgs {
    std::string checkpoint;
    std::string consumer;
    std::size_t k = 10;
    std::string out_path;
};

void emit(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty())
        out << content;
    else
        write_file_atomic(path, content);
}

int cmd_recommend(const RecommendArgs& args, std::ostream& out) {
    require_file(args.checkpoint, "--checkpoint");
    if (args.k == 0) throw ConfigError("--k must be at least 1");
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const auto it = std::lower_bound(ckpt.consumer_ids.begin(), ckpt.consumer_ids.end(), args.consumer);
    if (it == ckpt.consumer_ids.end() || *it != args.consumer)
        throw DataError("unknown consumer '" + args.consumer + "'");
    const auto& refs = ckpt.train_items[static_cast<std::size_t>(it - ckpt.consumer_ids.begin())];
    if (refs.empty()) throw DataError("consumer '" + args.consumer + "' has no purchases to use as references");

    std::vector<char> bought(ckpt.product_ids.size(), 0);
    for (std::size_t i : refs) bought[i] = 1;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < bought.size(); ++i)
        if (!bought[i]) candidates.push_back(i);
    const ArcRecScorer scorer = ckpt.scorer();
    const auto scores = scorer.score(0, refs, candidates, ckpt.prices.raw);
    std::vector<double> by_item(ckpt.product_ids.size(), 0.0);
    for (std::size_t c = 0; c < candidates.size(); ++c) by_item[candidates[c]] = scores[c];
    const auto ranked = rank_by_score(candidates, scores);

    std::ostringstream ss;
    ss << "rank,product_id,utility\n";
    for (std::size_t r = 0; r < std::min(args.k, ranked.size()); ++r)
        ss << r + 1 << ',' << ckpt.product_ids[ranked[r]] << ',' << format_double(by_item[ranked[r]]) << '\n';
    emit(args.out_path, ss.str(), out);
    return kExitOk;
}

struct AwtpArgs {
    std::string checkpoint;
    std::string out_path;
};

int cmd_awtp(const AwtpArgs& args, std::ostream& out) {
    require_file(args.checkpoint, "--checkpoint");
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const ArcRecScorer scorer = ckpt.scorer();
    std::ostringstream ss;
    ss << "consumer_id";
    for (const auto& name : ckpt.attribute_names) ss << ',' << name;
    ss << '\n';
    for (std::size_t u = 0; u < ckpt.consumer_ids.size(); ++u) {
        if (ckpt.train_items[u].empty()) continue;
        ss << ckpt.consumer_ids[u];
        for (double w : scorer.awtp(ckpt.train_items[u], ckpt.prices.raw)) ss << ',' << format_double(w);
        ss << '\n';
    }
    emit(args.out_path, ss.str(), out);
    return kExitOk;
}

void add_data_options(CLI::App* app, DataArgs& d) {
    app->add_option("--catalog", d.catalog, "Catalog CSV (product_id,price,<attributes>)");
    app->add_option("--transactions", d.transactions, "Transactions CSV (consumer_id,product_id,timestamp)");
}

void add_graph_overrides(CLI::App* app, Overrides& ov) {
    ov.flag(app, "--weighted", [](RunConfig& c) { c.graphs.weighted = true; }, "Weight edges by co-purchase count");
    ov.option<std::int64_t>(app, "--window-start", [](RunConfig& c, const std::int64_t& v) { c.graphs.window_start = v; },
                            "First timestamp of the graph window");
    ov.option<std::int64_t>(app, "--window-end", [](RunConfig& c, const std::int64_t& v) { c.graphs.window_end = v; },
                            "End (exclusive) of the graph window");
    ov.flag(app, "--ref-network", [](RunConfig& c) { c.model.ablation.decompose_by_attribute = false; },
            "Use the raw reference network for every attribute");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reference-dependent recommendation laboratory"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "JSON run configuration");
    g.seed_opt = app.add_option("--seed", g.seed, "Seed for every random draw");
    g.workers_opt = app.add_option("--workers", g.workers, "Worker threads");

    Overrides ov;

    SimulateArgs sim_args;
    CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic market");
    sim->add_option("--out-dir", sim_args.out_dir, "Output directory")->required();
    ov.option<std::size_t>(sim, "--consumers", [](RunConfig& c, const std::size_t& v) { c.simulator.num_consumers = v; },
                           "Number of consumers");
    ov.option<std::size_t>(sim, "--products", [](RunConfig& c, const std::size_t& v) { c.simulator.num_products = v; },
                           "Number of products");
    ov.flag(sim, "--full-scale", [](RunConfig& c) { c.simulator.full_scale = true; },
            "Draw both sizes from U(1000, 2000)");
    ov.flag(sim, "--emit-sensitivity", [](RunConfig& c) { c.emit_sensitivity = true; },
            "Also write sensitivity.csv (|beta| per consumer)");

    GraphsArgs graph_args;
    CLI::App* gr = app.add_subcommand("graphs", "Build and dump the reference networks");
    add_data_options(gr, graph_args.data);
    gr->add_option("--out-dir", graph_args.out_dir, "Output directory")->required();
    add_graph_overrides(gr, ov);

    TrainArgs train_args;
    CLI::App* tr = app.add_subcommand("train", "Train a model");
    add_data_options(tr, train_args.data);
    tr->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
    tr->add_flag("--dump-embeddings", train_args.dump_embeddings, "Write embeddings.csv");
    add_graph_overrides(tr, ov);
    ov.option<std::size_t>(tr, "--dim", [](RunConfig& c, const std::size_t& v) { c.model.dim = v; }, "Embedding size");
    ov.option<int>(tr, "--depth", [](RunConfig& c, const int& v) { c.model.depth = v; }, "Propagation depth");
    ov.option<std::size_t>(tr, "--reference-cap", [](RunConfig& c, const std::size_t& v) { c.model.reference_cap = v; },
                           "Most recent purchases kept as references");
    ov.option<int>(tr, "--epochs", [](RunConfig& c, const int& v) { c.training.max_epochs = v; }, "Maximum epochs");
    ov.option<std::size_t>(tr, "--batch-size", [](RunConfig& c, const std::size_t& v) { c.training.batch_size = v; },
                           "Triplets per batch");
    ov.option<double>(tr, "--lr", [](RunConfig& c, const double& v) { c.training.learning_rate = v; }, "Learning rate");
    ov.option<double>(tr, "--l2", [](RunConfig& c, const double& v) { c.training.l2 = v; }, "L2 coefficient");
    ov.option<int>(tr, "--patience", [](RunConfig& c, const int& v) { c.training.patience = v; },
                   "Early-stopping patience in epochs (0 disables)");
    ov.option<int>(tr, "--validate-every", [](RunConfig& c, const int& v) { c.training.validate_every = v; },
                   "Validation interval in epochs");
    ov.option<double>(tr, "--cold-fraction", [](RunConfig& c, const double& v) { c.cold_fraction = v; },
                      "Fraction of products held out for cold-start evaluation");
    ov.flag(tr, "--no-awtp", [](RunConfig& c) { c.model.ablation.use_awtp = false; }, "Equal attribute weights");
    ov.flag(tr, "--no-net", [](RunConfig& c) { c.model.ablation.use_arn_propagation = false; },
            "Skip graph propagation");
    ov.flag(tr, "--awtp-gradient", [](RunConfig& c) { c.model.awtp_gradient = true; },
            "Back-propagate through the AWTP weights");
    ov.flag(tr, "--raw-prices", [](RunConfig& c) { c.standardize_prices = false; },
            "Use raw prices in the utility instead of standardized ones");

    EvaluateArgs eval_args;
    CLI::App* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint");
    ev->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.json")->required();
    add_data_options(ev, eval_args.data);
    ev->add_option("--mode", eval_args.mode, "standard | coldstart | correlation | treatment");
    ev->add_option("--truth", eval_args.truth, "truth.csv (correlation mode)");
    ev->add_option("--sensitivity", eval_args.sensitivity, "sensitivity.csv (treatment mode)");
    ev->add_option("--out-dir", eval_args.out_dir, "Output directory")->required();
    ov.option<std::size_t>(ev, "--repetitions",
                           [](RunConfig& c, const std::size_t& v) { c.evaluation.treatment.repetitions = v; },
                           "Treatment repetitions");
    ov.option<std::size_t>(ev, "--group-size",
                           [](RunConfig& c, const std::size_t& v) { c.evaluation.treatment.group_size = v; },
                           "Consumers per sensitivity group");
    ov.option<std::size_t>(ev, "--candidates",
                           [](RunConfig& c, const std::size_t& v) { c.evaluation.treatment.candidates = v; },
                           "Candidate products per repetition");
    ov.flag(ev, "--full-assortment", [](RunConfig& c) { c.evaluation.treatment.full_assortment = true; },
            "Rank treated products within the whole assortment");

    RecommendArgs rec_args;
    CLI::App* rec = app.add_subcommand("recommend", "Top-K products for one consumer");
    rec->add_option("--checkpoint", rec_args.checkpoint, "checkpoint.json")->required();
    rec->add_option("--consumer", rec_args.consumer, "Consumer id")->required();
    rec->add_option("--k", rec_args.k, "List length");
    rec->add_option("--out", rec_args.out_path, "Output CSV (default stdout)");

    AwtpArgs awtp_args;
    CLI::App* aw = app.add_subcommand("awtp", "Export attribute-level willingness-to-pay weights");
    aw->add_option("--checkpoint", awtp_args.checkpoint, "checkpoint.json")->required();
    aw->add_option("--out", awtp_args.out_path, "Output CSV (default stdout)");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        const RunConfig config = effective_config(g, ov);
        if (sim->parsed()) return cmd_simulate(config, sim_args, out);
        if (gr->parsed()) return cmd_graphs(config, graph_args, out);
        if (tr->parsed()) return cmd_train(config, train_args, out);
        if (ev->parsed()) return cmd_evaluate(config, eval_args, out);
        if (rec->parsed()) return cmd_recommend(rec_args, out);
        if (aw->parsed()) return cmd_awtp(awtp_args, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitRuntime;
}

}  // namespace arcrec
