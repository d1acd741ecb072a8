#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnpf/agent.hpp"
#include "gnnpf/clock.hpp"
#include "gnnpf/config.hpp"
#include "gnnpf/controller.hpp"
#include "gnnpf/graph.hpp"
#include "gnnpf/metrics.hpp"
#include "gnnpf/trace.hpp"

namespace gnnpf {

/// A decision waiting in the response queue.
struct PendingDecision {
  Decision decision;
  double ready_time = 0.0;
  double latency = 0.0;
  std::uint64_t request_seq = 0;
};

/// One trainer's request queue (Q_R), response slot (Q_Rt) and the
/// inference task's pause flag.
class Queues {
 public:
  void push_request(const RuntimeMetrics& m) { requests_.push_back(m); }
  std::size_t pending_requests() const noexcept { return requests_.size(); }

  /// Newest request; older ones are dropped and counted in `dropped`.
  std::optional<RuntimeMetrics> take_newest_request(std::size_t* dropped = nullptr);

  /// Empties Q_R and returns how many requests were discarded.
  std::size_t clear_requests();

  /// Throws std::logic_error if a decision is already waiting.
  void push_decision(PendingDecision d);
  bool has_decision() const noexcept { return decision_.has_value(); }

  /// Non-blocking. Async returns the decision once ready_time <= now; sync
  /// waits for it, so any queued decision is returned.
  std::optional<PendingDecision> poll(double now, Mode mode);

  bool paused() const noexcept { return paused_; }
  void pause() noexcept { paused_ = true; }
  void notify() noexcept { paused_ = false; }

 private:
  std::deque<RuntimeMetrics> requests_;
  std::optional<PendingDecision> decision_;
  bool paused_ = false;
};

struct EpochStats {
  std::uint64_t epoch = 0;
  double epoch_time = 0.0;
  double mean_step_time = 0.0;
  double pct_hits = 0.0;  // mean over minibatches that sampled remote nodes
  std::uint64_t comm_volume = 0;
  std::size_t replacements = 0;  // consumed Replace decisions that evicted or inserted
  std::size_t decisions = 0;
  std::optional<double> r_mean;
};

struct RunReport {
  std::string config_hash;
  ControllerKind controller = ControllerKind::Never;
  Mode mode = Mode::Async;
  std::size_t trainers = 0;
  std::vector<std::size_t> buffer_capacity;
  std::vector<EpochStats> epochs;
  double total_time = 0.0;
  double mean_step_time = 0.0;
  /// Mean %-Hits from the second epoch on (all epochs for one-epoch runs).
  double steady_pct_hits = 0.0;
  std::uint64_t comm_volume = 0;
  std::size_t decisions = 0;
  std::size_t invalid_decisions = 0;
  std::size_t replacements = 0;
  /// Gaps in minibatches between consecutive consumed decisions, pooled
  /// over trainers.
  std::vector<std::uint64_t> replacement_intervals;
  std::optional<double> r_mean;
  std::vector<DecisionRecord> ledger;
  std::vector<std::string> warnings;
  Trace trace;
};

nlohmann::json report_to_json(const RunReport& r);
/// epoch,mean_time,pct_hits,comm_volume,replacements,r_mean
std::string report_csv(const RunReport& r);

/// Writes report.json, epochs.csv and trace.jsonl; `meta` (wall-clock
/// data) goes to run.meta.json only.
void write_report(const RunReport& r, const std::filesystem::path& dir, const nlohmann::json& meta = {});

using ControllerFactory = std::function<std::unique_ptr<Controller>(PartitionId, const PromptStatic&)>;

struct RunHooks {
  /// Overrides make_controller.
  ControllerFactory controller_factory;
  /// Test hook: the prefetcher never resumes the inference task.
  bool drop_notifies = false;
  /// Minibatches a trainer may go without any decision in flight while
  /// inference is paused before the run aborts with PipelineStall.
  std::size_t stall_guard = 64;
};

/// Simulates every trainer's prefetcher, inference task and training loop
/// on one deterministic scheduler. pm.parts must equal cfg.partitions.
RunReport run_training(const RunConfig& cfg, const Graph& g, const PartitionMap& pm, const RunHooks& hooks = {});

}  // namespace gnnpf
