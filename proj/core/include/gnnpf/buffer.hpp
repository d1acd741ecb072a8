#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gnnpf/types.hpp"

namespace gnnpf {

/// Frequency scoring that penalizes stasis: an access adds
/// `access_increment`, every round without access multiplies the score by
/// `decay_factor`, and entries strictly below `stale_threshold` are
/// eviction candidates.
struct ScoringPolicy {
  double access_increment = 1.0;
  double decay_factor = 0.95;
  double stale_threshold = 0.95;

  /// Throws std::invalid_argument unless 0 < decay < 1 and the other two
  /// fields are positive.
  void validate() const;

  /// Number of idle decay rounds after which an entry with `score` becomes
  /// stale: the smallest k with score * decay^k < threshold.
  std::size_t rounds_until_stale(double score) const;
};

struct ReplacementOutcome {
  std::vector<NodeId> evicted;   // ascending id
  std::vector<NodeId> inserted;  // rank order
  bool skipped = false;
  double replaced_pct = 0.0;  // 100 * |evicted| / capacity
};

struct HitRate {
  double pct = 0.0;
  std::size_t hits = 0;
  std::size_t sampled = 0;
  bool no_sample = false;
};

/// Capacity-bounded node -> score map. Single-owner: only the trainer's
/// prefetcher mutates it.
class PersistentBuffer {
 public:
  /// Returns false for nodes that must never be buffered (local nodes).
  using AdmissionFilter = std::function<bool(NodeId)>;

  explicit PersistentBuffer(std::size_t capacity, ScoringPolicy policy = {}, AdmissionFilter admit = {});

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool full() const noexcept { return entries_.size() >= capacity_; }
  bool contains(NodeId v) const { return entries_.contains(v); }
  /// Throws std::out_of_range when v is not buffered.
  double score(NodeId v) const { return entries_.at(v); }
  const ScoringPolicy& policy() const noexcept { return policy_; }

  /// Adds access_increment to each listed entry. Every node must already be
  /// buffered (std::logic_error otherwise).
  void record_access(std::span<const NodeId> hit_nodes);

  /// Multiplies the score of every buffered entry not in `accessed` by the
  /// decay factor.
  void decay_unaccessed(std::span<const NodeId> accessed);

  /// Entries with score strictly below the stale threshold, ascending id.
  std::vector<NodeId> stale_set() const;

  /// Skips when the buffer is full and nothing is stale. Otherwise evicts
  /// every stale entry and inserts `incoming` in order (already-buffered
  /// ids are ignored) until capacity is reached; new entries start at
  /// access_increment.
  ReplacementOutcome apply_replacement(std::span<const NodeId> incoming);

  HitRate hit_rate(std::span<const NodeId> sampled_remote) const;

  /// (node, score) pairs in ascending node order.
  std::vector<std::pair<NodeId, double>> snapshot() const;

 private:
  std::size_t capacity_;
  ScoringPolicy policy_;
  AdmissionFilter admit_;
  std::unordered_map<NodeId, double> entries_;
};

}  // namespace gnnpf
