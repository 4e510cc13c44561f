#pragma once

#include "qdp/baselines/qlearn.hpp"
#include "qdp/opt/optimizer.hpp"
#include "qdp/qplex/pricing.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qdp::harness {

inline constexpr int schema_version = 1;

/// How training shares parameters across cells of the (t, z) table.
struct SharingSpec {
    enum Kind { None, TimeHomogeneous, Blocks } kind = None;
    std::vector<std::pair<int, int>> blocks; ///< inclusive counter ranges, used with Blocks
};

struct SimSettings {
    long reps = 100000;
};

struct ExhaustiveSettings {
    std::vector<std::pair<int, int>> blocks;
    std::vector<int> price_indices; ///< empty means all prices
    long reps = 100000;
    int top_k = 6;
    long rerun_reps = 0;
};

/// Fully resolved run configuration.
struct RunConfig {
    qplex::InstanceParams instance;
    std::string service_label;
    std::string shape_label;
    /// Service and shape as written (name, array or fit spec). The canonical document
    /// keeps these rather than the derived vectors so that renormalization never drifts.
    nlohmann::json service_source = "Uni";
    nlohmann::json shape_source = "CON";
    opt::TrainOptions train;
    SharingSpec sharing;
    std::uint64_t seed = 1;
    SimSettings simulate;
    baselines::QLearnOptions qlearn;
    ExhaustiveSettings exhaustive;
};

/// Strict parse. Unknown keys and wrong types raise ConfigError listing the keys.
RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical document with every default filled in; a fixed point of parse_config.
nlohmann::json resolved_json(const RunConfig& c);

/// 64-bit FNV-1a of the compact canonical dump, as 16 hex digits.
std::string config_hash(const RunConfig& c);
std::uint64_t fnv1a64(const std::string& bytes);

qplex::PricingSpec to_spec(const RunConfig& c);

/// Uniform start with the configured sharing scheme installed.
PartitionedPolicy initial_policy(const RunConfig& c, const qplex::PricingSpec& spec);

} // namespace qdp::harness
