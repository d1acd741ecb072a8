#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnpf/classifier.hpp"
#include "gnnpf/config.hpp"
#include "gnnpf/controller.hpp"
#include "gnnpf/graph.hpp"
#include "gnnpf/metrics.hpp"

namespace gnnpf {

enum class EventKind { Sample, Metrics, Request, Decision, Replacement, Fetch, Barrier, EpochMark };

std::string_view to_string(EventKind k) noexcept;
EventKind parse_event_kind(std::string_view name);

struct TraceEvent {
  std::uint64_t seq = 0;  // assigned by Trace::record, 1-based
  EventKind kind = EventKind::Sample;
  std::uint32_t trainer = 0;
  std::uint64_t epoch = 0;
  std::uint64_t minibatch = 0;
  double sim_time = 0.0;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

void to_json(nlohmann::json& j, const TraceEvent& e);
void from_json(const nlohmann::json& j, TraceEvent& e);

inline constexpr std::string_view kTraceSchema = "gnnpf-trace";
inline constexpr int kTraceVersion = 1;

/// Append-only event log of one run. Enforces, per trainer, non-decreasing
/// (epoch, minibatch) and that each decision answers an earlier,
/// unanswered request of the same trainer (payload.request_seq).
class Trace {
 public:
  explicit Trace(std::string config_hash = {}, nlohmann::json meta = nlohmann::json::object(),
                 std::size_t max_events = 1'000'000);

  /// Assigns and returns the next sequence number. Throws TraceError
  /// (Ordering or Capacity) and leaves the trace unchanged on rejection.
  std::uint64_t record(TraceEvent e);

  const std::vector<TraceEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  const std::string& config_hash() const noexcept { return config_hash_; }
  const nlohmann::json& meta() const noexcept { return meta_; }
  std::size_t max_events() const noexcept { return max_events_; }

  friend bool operator==(const Trace& a, const Trace& b) {
    return a.config_hash_ == b.config_hash_ && a.meta_ == b.meta_ && a.events_ == b.events_;
  }

 private:
  struct Cursor {
    std::uint64_t epoch = 0;
    std::uint64_t minibatch = 0;
    std::vector<std::uint64_t> open_requests;
  };

  std::string config_hash_;
  nlohmann::json meta_;
  std::size_t max_events_;
  std::vector<TraceEvent> events_;
  std::map<std::uint32_t, Cursor> cursors_;
};

/// Header line followed by one event per line, each newline-terminated.
void write_trace(const Trace& t, std::ostream& out);
std::string serialize_trace(const Trace& t);
void export_trace(const Trace& t, const std::filesystem::path& path);

struct ImportResult {
  Trace trace;
  std::vector<std::string> warnings;
};

/// Validates the header, sequence numbering and ordering. A config hash
/// different from `expected_hash` (when non-empty) only adds a warning.
/// Throws TraceError: Schema, Corrupt or Truncated with the last good
/// sequence number, Io when unreadable.
ImportResult read_trace(std::istream& in, std::string_view expected_hash = {});
ImportResult import_trace(const std::filesystem::path& path, std::string_view expected_hash = {});

/// Metrics exactly as recorded.
std::vector<RuntimeMetrics> recorded_metrics(const Trace& t);

/// Metrics recomputed from sample/replacement/fetch events and the header.
std::vector<RuntimeMetrics> derive_metrics(const Trace& t);

/// One record per consumed decision: pre is the trainer's metrics at the
/// consuming minibatch, post those of the following minibatch (absent for
/// the last one).
std::vector<DecisionRecord> ledger_from_trace(const Trace& t);

/// label_sample over consecutive metrics of each trainer.
std::vector<LabeledSample> labels_from_trace(const Trace& t);

/// Fetch volume per epoch summed over trainers.
std::vector<std::uint64_t> fetch_volume_per_epoch(const Trace& t);

struct AuditResult {
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
};

/// Every consumed decision was made from metrics no older than the last
/// request-queue clear of its trainer.
AuditResult audit_no_stale_decisions(const Trace& t);

/// Requests and decisions alternate per trainer, so at most one decision
/// is ever outstanding.
AuditResult audit_single_outstanding(const Trace& t);

/// Fetch events sum to each metrics event's comm_volume and, per epoch, to
/// `reported_per_epoch`.
AuditResult audit_comm_conservation(const Trace& t, std::span<const std::uint64_t> reported_per_epoch);

struct ReplayResult {
  std::size_t compared = 0;
  std::size_t matched = 0;
  std::vector<std::string> mismatches;
};

/// Feeds every recorded request to a fresh controller per trainer and
/// compares actions with the recorded decisions. The trace is not modified.
ReplayResult replay_decisions(const Trace& t, const std::function<std::unique_ptr<Controller>(std::uint32_t)>& make);

struct CollectResult {
  std::vector<LabeledSample> samples;
  Trace trace;
  /// No remote traffic or a single label class.
  bool low_signal = false;
  /// Mean simulated time per sampled minibatch.
  double t_sampling = 0.0;
  /// samples.size() * t_sampling
  double offline_cost = 0.0;
};

/// Trace-only run: no training cost, fixed controller driving the buffer.
CollectResult collect_training_samples(const RunConfig& cfg, const Graph& g, const PartitionMap& pm);

}  // namespace gnnpf
