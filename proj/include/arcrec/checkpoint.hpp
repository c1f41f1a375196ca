#pragma once

// Versioned JSON container for a trained model: config echo, input digests,
// product and consumer identities, price transform, base embeddings,
// propagated tables and preference-net weights.

#include "arcrec/config.hpp"
#include "arcrec/protocols.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace arcrec {

struct Checkpoint {
    static constexpr int kVersion = 1;

    RunConfig config;
    std::string catalog_sha256;
    std::string transactions_sha256;
    std::vector<std::string> attribute_names;
    std::vector<std::string> layer_names;
    /// Products the model was trained on, in index order.
    std::vector<std::string> product_ids;
    /// Held out of training for the cold-start protocol.
    std::vector<std::string> cold_product_ids;
    PriceSpace prices;
    ModelParams params;
    std::vector<Matrix> tables;
    std::vector<std::string> consumer_ids;
    /// Per consumer, training item indices in time order.
    std::vector<std::vector<std::size_t>> train_items;
    int best_epoch = 0;
    std::optional<ValidationScore> best_validation;

    ArcRecScorer scorer() const;
};

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text, const std::string& source = "checkpoint");
Checkpoint load_checkpoint(const std::string& path);

}  // namespace arcrec
