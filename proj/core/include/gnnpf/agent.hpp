#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gnnpf/metrics.hpp"

namespace gnnpf {

/// Rolling history of decisions and their measured impact, serialized into
/// every agent prompt.
class ContextWindow {
 public:
  explicit ContextWindow(std::size_t max_chars = 2400, std::size_t max_records = 64);

  std::size_t max_chars() const noexcept { return max_chars_; }
  const std::deque<DecisionRecord>& records() const noexcept { return records_; }
  bool empty() const noexcept { return records_.empty(); }

  /// Most recent record whose outcome has not been observed yet.
  DecisionRecord* pending();

  void append(DecisionRecord record);

  /// Only the latest note is kept; it is consumed by the next prompt.
  void set_note(std::string note) { note_ = std::move(note); }
  std::optional<std::string> take_note();
  const std::optional<std::string>& note() const noexcept { return note_; }

  /// History text of at most `budget` characters. Newest records are kept;
  /// older ones are elided first.
  std::string serialize(std::size_t budget) const;
  std::string serialize() const { return serialize(max_chars_); }

 private:
  std::size_t max_chars_;
  std::size_t max_records_;
  std::deque<DecisionRecord> records_;
  std::optional<std::string> note_;
};

/// Fills rec.post and rec.effectiveness (hits gained minus percent change
/// in fetch cost). rec.post must be unset.
double evaluate_previous(DecisionRecord& rec, const RuntimeMetrics& post);

struct PromptStatic {
  GraphStatic graph;
  std::size_t trainers = 1;
  std::size_t buffer_capacity = 0;
  std::size_t batch_size = 0;
  std::vector<std::size_t> fanouts;
};

struct PromptOptions {
  std::size_t max_chars = 6000;
  bool chain_of_thought = false;
};

inline constexpr std::string_view kNoHistorySentinel = "(no prior decisions)";

/// Deterministic zero-shot prompt: task, metric definitions, static graph
/// facts, current metrics, decision history, progress, output format.
std::string build_prompt(const RuntimeMetrics& m, const ContextWindow& ctx, const PromptStatic& info,
                         const PromptOptions& options);

/// Extracts the first JSON object in `text` and validates
/// {"replace": bool, "expect": "hits_up"|"hits_down"|"hits_flat"}. Anything
/// else yields an invalid Skip.
Decision parse_response(std::string_view text);

}  // namespace gnnpf
