#pragma once

// Run configuration: every tunable knob, loadable from a JSON file with
// unknown keys rejected, and echoed into each output artifact.

#include "arcrec/graphs.hpp"
#include "arcrec/model.hpp"
#include "arcrec/protocols.hpp"
#include "arcrec/simulator.hpp"
#include "arcrec/training.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace arcrec {

struct GraphConfig {
    bool weighted = false;
    std::optional<std::int64_t> window_start;
    std::optional<std::int64_t> window_end;
    /// Attribute columns holding real values, quantile-binned before use.
    std::vector<std::string> numeric_attributes;
    int numeric_bins = 5;
};

struct EvalConfig {
    std::vector<std::size_t> ks{5, 10, 15};
    std::vector<std::size_t> cold_ks{5, 10, 15, 20};
    TreatmentConfig treatment;
};

struct RunConfig {
    std::uint64_t seed = 1;
    int workers = 1;
    SimConfig simulator;
    bool emit_sensitivity = false;
    GraphConfig graphs;
    ModelConfig model;
    bool standardize_prices = true;
    TrainConfig training;
    /// Fraction of products held out of training for the cold-start protocol.
    double cold_fraction = 0.0;
    EvalConfig evaluation;

    /// Pushes the global seed into every component seed.
    void propagate_seed();
    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Overlays `j` onto `base`; throws ConfigError on unknown keys or bad types.
RunConfig merge_json(RunConfig base, const nlohmann::json& j);
RunConfig load_config_file(const std::string& path, RunConfig base = {});

GraphOptions graph_options(const RunConfig& config);

}  // namespace arcrec
