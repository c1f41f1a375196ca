#pragma once

// Reference networks: products linked when some consumer bought both, and
// the per-attribute sub-networks that keep only edges whose endpoints share
// the attribute's level.

#include "arcrec/data.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace arcrec {

/// Undirected product graph as sorted per-node neighbor lists.
struct GraphLayer {
    std::string name;
    std::vector<std::vector<std::uint32_t>> neighbors;
    std::vector<std::vector<double>> weights;
    /// |N_i|, or the weighted degree when edges carry weights.
    std::vector<double> degree;

    std::size_t num_nodes() const { return neighbors.size(); }
    std::size_t num_edges() const;
    bool has_edge(std::size_t i, std::size_t j) const;
    double weight(std::size_t i, std::size_t j) const;
};

/// The raw reference network plus one attributed network per attribute.
struct AttributedAdjacency {
    GraphLayer reference;
    std::vector<GraphLayer> layers;

    std::size_t num_layers() const { return layers.size(); }
};

struct GraphOptions {
    /// Edge weight = number of consumers who bought both endpoints.
    bool weighted = false;
    /// Only purchases with timestamp in [start, end) count.
    std::optional<std::int64_t> window_start;
    std::optional<std::int64_t> window_end;
    /// false replicates the reference network for every attribute.
    bool decompose_by_attribute = true;
};

GraphLayer build_reference_network(const TransactionLog& log, std::size_t num_products,
                                   const GraphOptions& options = {});

/// Keeps the edges of `reference` whose endpoints carry the same token for
/// attribute k (0-based).
GraphLayer decompose_arn(const GraphLayer& reference, const ProductCatalog& catalog, std::size_t k);

AttributedAdjacency build_attributed_networks(const TransactionLog& log, const ProductCatalog& catalog,
                                              const GraphOptions& options = {});

/// Neighbors of a product outside the graph: in layer k, every catalog
/// product whose attribute-k token equals the new product's. An empty set
/// means the token is unseen.
std::vector<std::vector<std::size_t>> attach_cold_node(const ProductCatalog& catalog,
                                                       const ProductCatalog::Entry& product);

/// Edge list "i,j,weight" with i < j, product ids resolved via catalog.
void write_edge_list(std::ostream& out, const GraphLayer& layer, const ProductCatalog& catalog);

/// Throws NumericError when symmetry or the no-self-loop rule is broken.
void check_layer_invariants(const GraphLayer& layer);

}  // namespace arcrec
