#include "arcrec/checkpoint.hpp"

#include "arcrec/io.hpp"

namespace arcrec {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "arcrec-checkpoint";

json net_to_json(const PreferenceNet& n) {
    return {{"w1", matrix_to_json(n.w1)}, {"b1", matrix_to_json(n.b1)}, {"w2", matrix_to_json(n.w2)},
            {"b2", matrix_to_json(n.b2)}};
}

PreferenceNet net_from_json(const json& j) {
    PreferenceNet n;
    n.w1 = matrix_from_json(j.at("w1"));
    n.b1 = matrix_from_json(j.at("b1"));
    n.w2 = matrix_from_json(j.at("w2"));
    n.b2 = matrix_from_json(j.at("b2"));
    if (n.b1.rows() != 1 || n.b1.cols() != n.w1.cols() || n.w2.rows() != n.w1.cols() || n.w2.cols() != 1 ||
        n.b2.rows() != 1 || n.b2.cols() != 1)
        throw DataError("preference net shapes are inconsistent");
    return n;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw DataError("matrix data length does not match its shape");
    return Matrix(rows, cols, std::move(data));
}

ArcRecScorer Checkpoint::scorer() const {
    return ArcRecScorer(tables, params.alpha, params.beta, prices, config.model);
}

std::string serialize_checkpoint(const Checkpoint& c) {
    json j;
    j["format"] = kFormat;
    j["version"] = Checkpoint::kVersion;
    j["config"] = to_json(c.config);
    j["inputs"] = {{"catalog_sha256", c.catalog_sha256}, {"transactions_sha256", c.transactions_sha256}};
    j["mode"] = {{"use_awtp", c.config.model.ablation.use_awtp},
                 {"use_arn_propagation", c.config.model.ablation.use_arn_propagation},
                 {"decompose_by_attribute", c.config.model.ablation.decompose_by_attribute}};
    j["attribute_names"] = c.attribute_names;
    j["layer_names"] = c.layer_names;
    j["products"] = {{"ids", c.product_ids}, {"raw_prices", c.prices.raw}};
    j["cold_product_ids"] = c.cold_product_ids;
    j["price_transform"] = {
        {"standardized", c.prices.standardized}, {"mean", c.prices.mean}, {"stddev", c.prices.stddev}};
    json emb = json::array();
    for (const Matrix& m : c.params.embeddings) emb.push_back(matrix_to_json(m));
    json tab = json::array();
    for (const Matrix& m : c.tables) tab.push_back(matrix_to_json(m));
    j["embeddings"] = std::move(emb);
    j["tables"] = std::move(tab);
    j["alpha"] = net_to_json(c.params.alpha);
    j["beta"] = net_to_json(c.params.beta);
    j["consumers"] = {{"ids", c.consumer_ids}, {"train_items", c.train_items}};
    j["best_epoch"] = c.best_epoch;
    if (c.best_validation)
        j["best_validation"] = {{"hr10", c.best_validation->hr10}, {"ndcg10", c.best_validation->ndcg10}};
    else
        j["best_validation"] = nullptr;
    return j.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text, const std::string& source) {
    Checkpoint c;
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != kFormat) throw DataError(source + ": not a checkpoint file");
        if (j.at("version").get<int>() != Checkpoint::kVersion)
            throw DataError(source + ": unsupported checkpoint version");
        c.config = merge_json(RunConfig{}, j.at("config"));
        c.catalog_sha256 = j.at("inputs").at("catalog_sha256").get<std::string>();
        c.transactions_sha256 = j.at("inputs").at("transactions_sha256").get<std::string>();
        c.attribute_names = j.at("attribute_names").get<std::vector<std::string>>();
        c.layer_names = j.at("layer_names").get<std::vector<std::string>>();
        c.product_ids = j.at("products").at("ids").get<std::vector<std::string>>();
        auto raw = j.at("products").at("raw_prices").get<std::vector<double>>();
        c.cold_product_ids = j.at("cold_product_ids").get<std::vector<std::string>>();
        const json& pt = j.at("price_transform");
        c.prices.standardized = pt.at("standardized").get<bool>();
        c.prices.mean = pt.at("mean").get<double>();
        c.prices.stddev = pt.at("stddev").get<double>();
        c.prices = c.prices.with_raw(std::move(raw));
        for (const json& m : j.at("embeddings")) c.params.embeddings.push_back(matrix_from_json(m));
        for (const json& m : j.at("tables")) c.tables.push_back(matrix_from_json(m));
        c.params.alpha = net_from_json(j.at("alpha"));
        c.params.beta = net_from_json(j.at("beta"));
        c.consumer_ids = j.at("consumers").at("ids").get<std::vector<std::string>>();
        c.train_items = j.at("consumers").at("train_items").get<std::vector<std::vector<std::size_t>>>();
        c.best_epoch = j.at("best_epoch").get<int>();
        if (!j.at("best_validation").is_null())
            c.best_validation = ValidationScore{j["best_validation"].at("hr10").get<double>(),
                                                j["best_validation"].at("ndcg10").get<double>()};
    } catch (const json::exception& e) {
        throw DataError(source + ": malformed checkpoint: " + e.what());
    } catch (const ConfigError& e) {
        throw DataError(source + ": malformed checkpoint config: " + e.what());
    }
    const std::size_t n = c.product_ids.size();
    if (c.prices.raw.size() != n) throw DataError(source + ": price count does not match product count");
    if (c.tables.empty() || c.tables.size() != c.layer_names.size())
        throw DataError(source + ": layer tables do not match layer names");
    for (const Matrix& t : c.tables)
        if (t.rows() != n || t.cols() != c.params.alpha.in_dim())
            throw DataError(source + ": table shape does not match products/dimension");
    if (c.train_items.size() != c.consumer_ids.size())
        throw DataError(source + ": consumer histories do not match consumer ids");
    for (const auto& items : c.train_items)
        for (std::size_t i : items)
            if (i >= n) throw DataError(source + ": training item outside the product list");
    return c;
}

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path), path); }

}  // namespace arcrec
