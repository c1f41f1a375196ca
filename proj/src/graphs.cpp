#include "arcrec/graphs.hpp"

#include "arcrec/sparse.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <ostream>

namespace arcrec {

namespace {

GraphLayer from_edges(std::string name, std::size_t n,
                      const std::map<std::pair<std::uint32_t, std::uint32_t>, double>& edges) {
    GraphLayer g;
    g.name = std::move(name);
    g.neighbors.resize(n);
    g.weights.resize(n);
    g.degree.assign(n, 0.0);
    // Map order is lexicographic on (i, j), so both directions come out sorted
    // once the reverse entries are appended and each list is sorted.
    for (const auto& [e, w] : edges) {
        g.neighbors[e.first].push_back(e.second);
        g.weights[e.first].push_back(w);
        g.neighbors[e.second].push_back(e.first);
        g.weights[e.second].push_back(w);
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> order(g.neighbors[i].size());
        for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return g.neighbors[i][a] < g.neighbors[i][b]; });
        std::vector<std::uint32_t> nb;
        std::vector<double> wt;
        for (std::size_t t : order) {
            nb.push_back(g.neighbors[i][t]);
            wt.push_back(g.weights[i][t]);
            g.degree[i] += g.weights[i][t];
        }
        g.neighbors[i] = std::move(nb);
        g.weights[i] = std::move(wt);
    }
    return g;
}

}  // namespace

std::size_t GraphLayer::num_edges() const {
    std::size_t s = 0;
    for (const auto& nb : neighbors) s += nb.size();
    return s / 2;
}

bool GraphLayer::has_edge(std::size_t i, std::size_t j) const {
    const auto& nb = neighbors.at(i);
    return std::binary_search(nb.begin(), nb.end(), static_cast<std::uint32_t>(j));
}

double GraphLayer::weight(std::size_t i, std::size_t j) const {
    const auto& nb = neighbors.at(i);
    auto it = std::lower_bound(nb.begin(), nb.end(), static_cast<std::uint32_t>(j));
    if (it == nb.end() || *it != j) return 0.0;
    return weights[i][static_cast<std::size_t>(it - nb.begin())];
}

GraphLayer build_reference_network(const TransactionLog& log, std::size_t num_products,
                                   const GraphOptions& options) {
    if (log.empty()) throw DataError("cannot build a reference network from an empty log");
    const std::int64_t lo = options.window_start.value_or(std::numeric_limits<std::int64_t>::min());
    const std::int64_t hi = options.window_end.value_or(std::numeric_limits<std::int64_t>::max());
    if (lo >= hi) throw DataError("empty time window");

    std::vector<std::vector<std::uint32_t>> bought(log.num_consumers());
    bool any = false;
    for (const Interaction& r : log.records()) {
        if (r.product >= num_products) throw DataError("unknown product index " + std::to_string(r.product));
        if (r.timestamp < lo || r.timestamp >= hi) continue;
        bought[r.consumer].push_back(r.product);
        any = true;
    }
    if (!any) throw DataError("time window contains no purchases");

    std::map<std::pair<std::uint32_t, std::uint32_t>, double> edges;
    for (auto& items : bought) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        for (std::size_t a = 0; a < items.size(); ++a)
            for (std::size_t b = a + 1; b < items.size(); ++b) edges[{items[a], items[b]}] += 1.0;
    }
    if (!options.weighted)
        for (auto& [e, w] : edges) w = 1.0;
    return from_edges("reference", num_products, edges);
}

GraphLayer decompose_arn(const GraphLayer& reference, const ProductCatalog& catalog, std::size_t k) {
    if (k >= catalog.num_attributes())
        throw ConfigError("attribute index " + std::to_string(k) + " out of range (K = " +
                          std::to_string(catalog.num_attributes()) + ")");
    if (reference.num_nodes() != catalog.size()) throw DataError("graph and catalog sizes differ");
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> edges;
    for (std::size_t i = 0; i < reference.num_nodes(); ++i) {
        const auto& nb = reference.neighbors[i];
        for (std::size_t t = 0; t < nb.size(); ++t) {
            const std::size_t j = nb[t];
            if (j <= i) continue;
            if (catalog.attribute(i, k) == catalog.attribute(j, k))
                edges[{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)}] = reference.weights[i][t];
        }
    }
    return from_edges(catalog.attribute_names()[k], reference.num_nodes(), edges);
}

AttributedAdjacency build_attributed_networks(const TransactionLog& log, const ProductCatalog& catalog,
                                              const GraphOptions& options) {
    AttributedAdjacency g;
    g.reference = build_reference_network(log, catalog.size(), options);
    for (std::size_t k = 0; k < catalog.num_attributes(); ++k) {
        if (options.decompose_by_attribute) {
            g.layers.push_back(decompose_arn(g.reference, catalog, k));
        } else {
            GraphLayer copy = g.reference;
            copy.name = catalog.attribute_names()[k];
            g.layers.push_back(std::move(copy));
        }
    }
    return g;
}

std::vector<std::vector<std::size_t>> attach_cold_node(const ProductCatalog& catalog,
                                                       const ProductCatalog::Entry& product) {
    if (product.attributes.size() != catalog.num_attributes())
        throw DataError("cold product " + product.id + " has the wrong number of attribute values");
    if (catalog.find(product.id)) throw DataError("product " + product.id + " is already in the graph");
    std::vector<std::vector<std::size_t>> out(catalog.num_attributes());
    for (std::size_t k = 0; k < catalog.num_attributes(); ++k)
        for (std::size_t i = 0; i < catalog.size(); ++i)
            if (catalog.attribute(i, k) == product.attributes[k]) out[k].push_back(i);
    return out;
}

void write_edge_list(std::ostream& out, const GraphLayer& layer, const ProductCatalog& catalog) {
    out << "i,j,weight\n";
    for (std::size_t i = 0; i < layer.num_nodes(); ++i)
        for (std::size_t t = 0; t < layer.neighbors[i].size(); ++t) {
            const std::size_t j = layer.neighbors[i][t];
            if (j <= i) continue;
            out << catalog.ids()[i] << ',' << catalog.ids()[j] << ',' << format_double(layer.weights[i][t]) << '\n';
        }
}

void check_layer_invariants(const GraphLayer& layer) {
    for (std::size_t i = 0; i < layer.num_nodes(); ++i)
        for (std::size_t t = 0; t < layer.neighbors[i].size(); ++t) {
            const std::size_t j = layer.neighbors[i][t];
            if (j == i) throw NumericError("self-loop at node " + std::to_string(i));
            if (layer.weight(j, i) != layer.weights[i][t])
                throw NumericError("asymmetric edge " + std::to_string(i) + "-" + std::to_string(j));
        }
}

CsrMatrix CsrMatrix::transposed() const {
    CsrMatrix t;
    t.n = n;
    t.row_ptr.assign(n + 1, 0);
    for (std::uint32_t c : col) ++t.row_ptr[c + 1];
    for (std::size_t i = 0; i < n; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
    t.col.resize(col.size());
    t.val.resize(val.size());
    std::vector<std::size_t> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
            const std::size_t dst = fill[col[e]]++;
            t.col[dst] = static_cast<std::uint32_t>(r);
            t.val[dst] = val[e];
        }
    return t;
}

}  // namespace arcrec
