#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace gnnpf {

struct GraphStatic {
  std::uint64_t num_nodes = 0;
  std::uint64_t num_edges = 0;
  std::uint64_t partition_nodes = 0;
  std::uint64_t partition_edges = 0;

  friend bool operator==(const GraphStatic&, const GraphStatic&) = default;
};

inline constexpr std::size_t kFeatureCount = 8;
using FeatureVector = std::array<double, kFeatureCount>;

/// Observation a trainer's prefetcher publishes after every minibatch.
struct RuntimeMetrics {
  std::uint32_t trainer = 0;
  double pct_hits = 0.0;
  bool no_sample = false;
  std::uint64_t sampled_remote = 0;
  /// Remote node features fetched for this minibatch (misses + replacement).
  std::uint64_t comm_volume = 0;
  /// Simulated fetch cost of comm_volume under the clock model.
  double comm_time = 0.0;
  double nodes_replaced_pct = 0.0;
  /// Per-trainer step counter, monotone across epochs.
  std::uint64_t minibatch_index = 0;
  std::uint64_t epoch = 0;
  std::uint64_t minibatches_remaining = 0;
  std::uint64_t epochs_remaining = 0;
  GraphStatic graph;

  /// pct_hits, comm_volume, nodes_replaced_pct, minibatch_index,
  /// minibatches_remaining, epochs_remaining, partition_nodes,
  /// partition_edges.
  FeatureVector features() const;

  friend bool operator==(const RuntimeMetrics&, const RuntimeMetrics&) = default;
};

void to_json(nlohmann::json& j, const GraphStatic& g);
void from_json(const nlohmann::json& j, GraphStatic& g);
void to_json(nlohmann::json& j, const RuntimeMetrics& m);
void from_json(const nlohmann::json& j, RuntimeMetrics& m);

/// Percent change from `before` to `after`. 0 -> 0 is no change; growth
/// from zero counts as +100%.
double percent_change(double before, double after) noexcept;

/// Hits gained (percentage points) minus the percent change in simulated
/// fetch cost. Shared by the context builder and the S' labeling rule.
double hits_minus_comm(const RuntimeMetrics& pre, const RuntimeMetrics& post) noexcept;

enum class Action { Skip, Replace };
enum class Expectation { None, Up, Down, Flat };

std::string_view to_string(Action a) noexcept;
std::string_view to_string(Expectation e) noexcept;
Expectation parse_expectation(std::string_view s);

struct Decision {
  Action action = Action::Skip;
  Expectation expected = Expectation::None;
  std::string raw_response;
  bool valid = true;
  bool timed_out = false;
  /// Why a decision was marked invalid (empty when valid).
  std::string error;
  std::uint64_t source_minibatch = 0;

  /// Invalid decisions always resolve to Skip.
  static Decision invalid(std::string raw, std::string error, std::uint64_t source = 0);

  friend bool operator==(const Decision&, const Decision&) = default;
};

void to_json(nlohmann::json& j, const Decision& d);
void from_json(const nlohmann::json& j, Decision& d);

/// A decision bracketed by the metrics observed before and after it.
struct DecisionRecord {
  std::uint32_t trainer = 0;
  RuntimeMetrics pre;
  Decision decision;
  std::optional<RuntimeMetrics> post;
  std::optional<double> effectiveness;
  std::uint64_t consumed_minibatch = 0;
  /// A Replace found nothing stale in a full buffer.
  bool replacement_skipped = false;
};

void to_json(nlohmann::json& j, const DecisionRecord& r);
void from_json(const nlohmann::json& j, DecisionRecord& r);

}  // namespace gnnpf
