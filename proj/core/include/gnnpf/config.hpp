#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnpf/clock.hpp"
#include "gnnpf/controller.hpp"
#include "gnnpf/graph.hpp"
#include "gnnpf/types.hpp"

namespace gnnpf {

/// Either an edge-list path or generator parameters.
struct GraphSource {
  std::string path;
  std::string partition_path;  // optional precomputed partition file
  std::size_t nodes = 10000;
  std::size_t avg_degree = 10;
  double skew = 2.1;
  Seed seed = 1;
};

struct RunConfig {
  GraphSource graph;
  std::size_t partitions = 4;
  PartitionStrategy partition_strategy = PartitionStrategy::GreedyEdgeCut;
  double train_fraction = 0.1;
  double buffer_pct = 25.0;
  std::vector<std::size_t> fanouts{10, 25};
  std::size_t batch_size = 2000;
  std::size_t epochs = 5;
  Mode mode = Mode::Async;
  ControllerConfig controller;
  ClockModel clock;
  Seed seed = 0;
  std::string output_dir = "out";
  double deadband = 0.5;
  std::size_t max_trace_events = 1'000'000;
};

/// Fills defaults and applies range and cross-field checks. Unknown keys
/// are rejected. Throws ConfigError naming the offending field.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Re-runs the range and cross-field checks on an already built config.
void validate_config(const RunConfig& cfg);

/// Legal but suspicious combinations.
std::vector<std::string> config_warnings(const RunConfig& cfg);

/// GNNPF_ENDPOINT_URL replaces controller.endpoint_url when set.
void apply_env_overrides(RunConfig& cfg);

nlohmann::json config_to_json(const RunConfig& cfg);

/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string config_hash(const RunConfig& cfg);

}  // namespace gnnpf
