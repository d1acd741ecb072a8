#include "gnnpf/buffer.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace gnnpf {

void ScoringPolicy::validate() const {
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw std::invalid_argument("decay_factor must be in (0, 1)");
  if (!(stale_threshold > 0.0)) throw std::invalid_argument("stale_threshold must be > 0");
  if (!(access_increment > 0.0)) throw std::invalid_argument("access_increment must be > 0");
}

std::size_t ScoringPolicy::rounds_until_stale(double score) const {
  std::size_t k = 0;
  for (double s = score; !(s < stale_threshold); s *= decay_factor) ++k;
  return k;
}

PersistentBuffer::PersistentBuffer(std::size_t capacity, ScoringPolicy policy, AdmissionFilter admit)
    : capacity_(capacity), policy_(policy), admit_(std::move(admit)) {
  policy_.validate();
  entries_.reserve(capacity);
}

void PersistentBuffer::record_access(std::span<const NodeId> hit_nodes) {
  for (NodeId v : hit_nodes) {
    auto it = entries_.find(v);
    if (it == entries_.end()) {
      throw std::logic_error("record_access: node " + std::to_string(v) + " is not buffered");
    }
    it->second += policy_.access_increment;
  }
}

void PersistentBuffer::decay_unaccessed(std::span<const NodeId> accessed) {
  if (entries_.empty()) return;
  const std::unordered_set<NodeId> touched(accessed.begin(), accessed.end());
  for (auto& [v, s] : entries_) {
    // Clamped so scores stay positive after very long idle streaks.
    if (!touched.contains(v)) s = std::max(s * policy_.decay_factor, DBL_MIN);
  }
}

std::vector<NodeId> PersistentBuffer::stale_set() const {
  std::vector<NodeId> out;
  for (const auto& [v, s] : entries_) {
    if (s < policy_.stale_threshold) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ReplacementOutcome PersistentBuffer::apply_replacement(std::span<const NodeId> incoming) {
  ReplacementOutcome out;
  out.evicted = stale_set();
  if (out.evicted.empty() && full()) {
    out.skipped = true;
    return out;
  }
  for (NodeId v : out.evicted) entries_.erase(v);
  for (NodeId v : incoming) {
    if (entries_.size() >= capacity_) break;
    if (admit_ && !admit_(v)) {
      throw std::invalid_argument("apply_replacement: node " + std::to_string(v) + " may not be buffered");
    }
    if (entries_.emplace(v, policy_.access_increment).second) out.inserted.push_back(v);
  }
  out.replaced_pct = capacity_ == 0 ? 0.0 : 100.0 * static_cast<double>(out.evicted.size()) /
                                                static_cast<double>(capacity_);
  return out;
}

HitRate PersistentBuffer::hit_rate(std::span<const NodeId> sampled_remote) const {
  HitRate r;
  r.sampled = sampled_remote.size();
  if (sampled_remote.empty()) {
    r.no_sample = true;
    return r;
  }
  for (NodeId v : sampled_remote) {
    if (entries_.contains(v)) ++r.hits;
  }
  r.pct = 100.0 * static_cast<double>(r.hits) / static_cast<double>(r.sampled);
  return r;
}

std::vector<std::pair<NodeId, double>> PersistentBuffer::snapshot() const {
  std::vector<std::pair<NodeId, double>> out(entries_.begin(), entries_.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gnnpf
