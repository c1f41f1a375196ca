#pragma once

// Purchase logs and product catalogs, and their CSV forms:
//   transactions: consumer_id,product_id,timestamp
//   catalog:      product_id,price,<attr_1>,...,<attr_K>

#include "arcrec/matrix.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace arcrec {

/// Per-product price and K categorical attribute tokens. Products are held in
/// ascending product_id order, so a product's index doubles as its tie-break
/// rank.
class ProductCatalog {
public:
    struct Entry {
        std::string id;
        double price = 0.0;
        std::vector<std::string> attributes;
    };

    ProductCatalog() = default;
    ProductCatalog(std::vector<std::string> attribute_names, std::vector<Entry> entries);

    std::size_t size() const { return ids_.size(); }
    std::size_t num_attributes() const { return attribute_names_.size(); }
    const std::vector<std::string>& attribute_names() const { return attribute_names_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<double>& prices() const { return prices_; }
    const std::string& attribute(std::size_t product, std::size_t k) const {
        return attributes_[product][k];
    }
    const std::vector<std::string>& attributes(std::size_t product) const {
        return attributes_[product];
    }
    Entry entry(std::size_t product) const;

    std::optional<std::size_t> find(const std::string& id) const;
    std::size_t index_of(const std::string& id) const;

    /// Replaces the tokens of a real-valued attribute by quantile level labels
    /// "L0".."L{levels-1}". Equal values always share a level.
    void bin_numeric_attribute(std::size_t k, int levels);

    /// Catalog restricted to the given product indices (kept in id order).
    ProductCatalog subset(const std::vector<std::size_t>& keep) const;

private:
    std::vector<std::string> attribute_names_;
    std::vector<std::string> ids_;
    std::vector<double> prices_;
    std::vector<std::vector<std::string>> attributes_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Interaction {
    std::uint32_t consumer = 0;
    std::uint32_t product = 0;
    std::int64_t timestamp = 0;

    bool operator==(const Interaction&) const = default;
};

struct RawPurchase {
    std::string consumer_id;
    std::string product_id;
    std::int64_t timestamp = 0;
};

/// Time-ordered purchases with consumers and products resolved to indices.
/// Records are canonically sorted by (timestamp, consumer, product); consumer
/// indices follow ascending consumer_id.
class TransactionLog {
public:
    TransactionLog() = default;
    /// Throws DataError on a product id the catalog does not know.
    TransactionLog(const std::vector<RawPurchase>& raw, const ProductCatalog& catalog);
    TransactionLog(std::vector<std::string> consumer_ids, std::vector<Interaction> records);

    const std::vector<std::string>& consumer_ids() const { return consumer_ids_; }
    const std::vector<Interaction>& records() const { return records_; }
    std::size_t num_consumers() const { return consumer_ids_.size(); }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    std::optional<std::size_t> find_consumer(const std::string& id) const;

    /// Per consumer, purchased product indices in time order (repeats kept).
    std::vector<std::vector<std::size_t>> histories() const;

    /// Records with timestamp in [start, end).
    TransactionLog window(std::int64_t start, std::int64_t end) const;

    /// Log with the listed products removed; surviving product indices are
    /// remapped through old_to_new (entries for removed products ignored).
    TransactionLog remap_products(const std::vector<std::optional<std::size_t>>& old_to_new) const;

private:
    std::vector<std::string> consumer_ids_;
    std::vector<Interaction> records_;
};

ProductCatalog read_catalog(std::istream& in, const std::string& source = "catalog");
ProductCatalog read_catalog_file(const std::string& path);
std::vector<RawPurchase> read_transactions(std::istream& in, const std::string& source = "transactions");
std::vector<RawPurchase> read_transactions_file(const std::string& path);

void write_catalog(std::ostream& out, const ProductCatalog& catalog);
void write_transactions(std::ostream& out, const TransactionLog& log, const ProductCatalog& catalog);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

}  // namespace arcrec
