#include "arcrec/data.hpp"

#include "arcrec/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace arcrec {

namespace csv {

std::vector<std::string> split_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string where(const std::string& source, std::size_t line) {
    return source + ":" + std::to_string(line);
}

double parse_double(const std::string& s, const std::string& loc) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError(loc + ": cannot parse number '" + s + "'");
    return v;
}

std::int64_t parse_int(const std::string& s, const std::string& loc) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError(loc + ": cannot parse integer '" + s + "'");
    return v;
}

}  // namespace csv

namespace {

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

ProductCatalog::ProductCatalog(std::vector<std::string> attribute_names, std::vector<Entry> entries)
    : attribute_names_(std::move(attribute_names)) {
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Entry& e = entries[i];
        if (!ids_.empty() && ids_.back() == e.id) throw DataError("duplicate product_id " + e.id);
        if (!(e.price > 0.0) || !std::isfinite(e.price))
            throw DataError("product " + e.id + " has non-positive price");
        if (e.attributes.size() != attribute_names_.size())
            throw DataError("product " + e.id + " has " + std::to_string(e.attributes.size()) +
                            " attribute values, expected " + std::to_string(attribute_names_.size()));
        index_.emplace(e.id, i);
        ids_.push_back(std::move(e.id));
        prices_.push_back(e.price);
        attributes_.push_back(std::move(e.attributes));
    }
}

ProductCatalog::Entry ProductCatalog::entry(std::size_t product) const {
    return Entry{ids_.at(product), prices_.at(product), attributes_.at(product)};
}

std::optional<std::size_t> ProductCatalog::find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t ProductCatalog::index_of(const std::string& id) const {
    auto idx = find(id);
    if (!idx) throw DataError("unknown product id " + id);
    return *idx;
}

void ProductCatalog::bin_numeric_attribute(std::size_t k, int levels) {
    if (k >= num_attributes()) throw ConfigError("attribute index out of range");
    if (levels < 1) throw ConfigError("binning needs at least one level");
    std::vector<double> values(size());
    for (std::size_t i = 0; i < size(); ++i)
        values[i] = csv::parse_double(attributes_[i][k], "attribute " + attribute_names_[k]);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    // Level boundaries at the interior quantiles j / levels.
    std::vector<double> edges;
    for (int j = 1; j < levels; ++j) {
        const std::size_t pos = static_cast<std::size_t>(j) * sorted.size() / static_cast<std::size_t>(levels);
        edges.push_back(sorted[std::min(pos, sorted.size() - 1)]);
    }
    for (std::size_t i = 0; i < size(); ++i) {
        const auto level = std::upper_bound(edges.begin(), edges.end(), values[i]) - edges.begin();
        attributes_[i][k] = "L" + std::to_string(level);
    }
}

ProductCatalog ProductCatalog::subset(const std::vector<std::size_t>& keep) const {
    std::vector<Entry> entries;
    for (std::size_t i : keep) entries.push_back(entry(i));
    return ProductCatalog(attribute_names_, std::move(entries));
}

TransactionLog::TransactionLog(const std::vector<RawPurchase>& raw, const ProductCatalog& catalog) {
    std::set<std::string> ids;
    for (const RawPurchase& r : raw) ids.insert(r.consumer_id);
    consumer_ids_.assign(ids.begin(), ids.end());
    std::unordered_map<std::string, std::uint32_t> cidx;
    for (std::size_t i = 0; i < consumer_ids_.size(); ++i)
        cidx.emplace(consumer_ids_[i], static_cast<std::uint32_t>(i));
    records_.reserve(raw.size());
    for (const RawPurchase& r : raw) {
        auto p = catalog.find(r.product_id);
        if (!p) throw DataError("unknown product id " + r.product_id);
        records_.push_back({cidx.at(r.consumer_id), static_cast<std::uint32_t>(*p), r.timestamp});
    }
    std::sort(records_.begin(), records_.end(), [](const Interaction& a, const Interaction& b) {
        return std::tie(a.timestamp, a.consumer, a.product) < std::tie(b.timestamp, b.consumer, b.product);
    });
}

TransactionLog::TransactionLog(std::vector<std::string> consumer_ids, std::vector<Interaction> records)
    : consumer_ids_(std::move(consumer_ids)), records_(std::move(records)) {
    for (const Interaction& r : records_)
        if (r.consumer >= consumer_ids_.size()) throw DataError("interaction references unknown consumer");
    std::sort(records_.begin(), records_.end(), [](const Interaction& a, const Interaction& b) {
        return std::tie(a.timestamp, a.consumer, a.product) < std::tie(b.timestamp, b.consumer, b.product);
    });
}

std::optional<std::size_t> TransactionLog::find_consumer(const std::string& id) const {
    auto it = std::lower_bound(consumer_ids_.begin(), consumer_ids_.end(), id);
    if (it == consumer_ids_.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - consumer_ids_.begin());
}

std::vector<std::vector<std::size_t>> TransactionLog::histories() const {
    std::vector<std::vector<std::size_t>> h(consumer_ids_.size());
    for (const Interaction& r : records_) h[r.consumer].push_back(r.product);
    return h;
}

TransactionLog TransactionLog::window(std::int64_t start, std::int64_t end) const {
    std::vector<Interaction> kept;
    for (const Interaction& r : records_)
        if (r.timestamp >= start && r.timestamp < end) kept.push_back(r);
    if (kept.empty()) throw DataError("time window [" + std::to_string(start) + "," +
                                      std::to_string(end) + ") contains no purchases");
    return TransactionLog(consumer_ids_, std::move(kept));
}

TransactionLog TransactionLog::remap_products(
    const std::vector<std::optional<std::size_t>>& old_to_new) const {
    std::vector<Interaction> kept;
    for (const Interaction& r : records_) {
        const auto& m = old_to_new.at(r.product);
        if (!m) continue;
        kept.push_back({r.consumer, static_cast<std::uint32_t>(*m), r.timestamp});
    }
    return TransactionLog(consumer_ids_, std::move(kept));
}

ProductCatalog read_catalog(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty catalog file");
    const auto header = csv::split_line(line);
    if (header.empty() || header[0] != "product_id")
        throw DataError(source + ":1: first column must be 'product_id'");
    if (header.size() < 2 || header[1] != "price")
        throw DataError(source + ":1: missing required column 'price'");
    if (header.size() < 3) throw DataError(source + ":1: catalog needs at least one attribute column");
    std::vector<std::string> names(header.begin() + 2, header.end());
    std::vector<ProductCatalog::Entry> entries;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = csv::split_line(line);
        if (f.size() != header.size())
            throw DataError(csv::where(source, lineno) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(f.size()));
        ProductCatalog::Entry e;
        e.id = f[0];
        e.price = csv::parse_double(f[1], csv::where(source, lineno));
        if (!(e.price > 0.0)) throw DataError(csv::where(source, lineno) + ": price must be positive");
        e.attributes.assign(f.begin() + 2, f.end());
        entries.push_back(std::move(e));
    }
    try {
        return ProductCatalog(std::move(names), std::move(entries));
    } catch (const DataError& e) {
        throw DataError(source + ": " + e.what());
    }
}

ProductCatalog read_catalog_file(const std::string& path) {
    auto in = open_or_throw(path);
    return read_catalog(in, path);
}

std::vector<RawPurchase> read_transactions(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty transactions file");
    const auto header = csv::split_line(line);
    const std::vector<std::string> want{"consumer_id", "product_id", "timestamp"};
    for (std::size_t i = 0; i < want.size(); ++i)
        if (header.size() <= i || header[i] != want[i])
            throw DataError(source + ":1: missing required column '" + want[i] + "'");
    std::vector<RawPurchase> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = csv::split_line(line);
        if (f.size() != 3)
            throw DataError(csv::where(source, lineno) + ": expected 3 fields, got " + std::to_string(f.size()));
        if (f[0].empty() || f[1].empty()) throw DataError(csv::where(source, lineno) + ": empty id");
        out.push_back({f[0], f[1], csv::parse_int(f[2], csv::where(source, lineno))});
    }
    return out;
}

std::vector<RawPurchase> read_transactions_file(const std::string& path) {
    auto in = open_or_throw(path);
    return read_transactions(in, path);
}

void write_catalog(std::ostream& out, const ProductCatalog& catalog) {
    out << "product_id,price";
    for (const auto& n : catalog.attribute_names()) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        out << catalog.ids()[i] << ',' << format_double(catalog.prices()[i]);
        for (const auto& a : catalog.attributes(i)) out << ',' << a;
        out << '\n';
    }
}

void write_transactions(std::ostream& out, const TransactionLog& log, const ProductCatalog& catalog) {
    out << "consumer_id,product_id,timestamp\n";
    for (const Interaction& r : log.records())
        out << log.consumer_ids()[r.consumer] << ',' << catalog.ids()[r.product] << ',' << r.timestamp << '\n';
}

}  // namespace arcrec
