#include "gnnpf/buffer.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

namespace gnnpf {
namespace {

// Scores folded one round at a time: an access adds 1, an idle round
// multiplies by 0.95. Same operation order as the buffer.
double fold(const std::vector<bool>& accessed_per_round) {
  double s = 1.0;
  for (bool a : accessed_per_round) s = a ? s + 1.0 : s * 0.95;
  return s;
}

// sum over accesses of 0.95^(idle rounds after it), plus the initial 1.
double closed_form(const std::vector<bool>& accessed_per_round) {
  std::size_t idle_after = 0;
  double total = 0.0;
  for (auto it = accessed_per_round.rbegin(); it != accessed_per_round.rend(); ++it) {
    if (*it) {
      total += std::pow(0.95, static_cast<double>(idle_after));
    } else {
      ++idle_after;
    }
  }
  return total + std::pow(0.95, static_cast<double>(idle_after));
}

// One minibatch round: record hits, then decay the rest.
void round(PersistentBuffer& buf, const std::vector<NodeId>& hits) {
  buf.record_access(hits);
  buf.decay_unaccessed(hits);
}

TEST(ScoringPolicy, RejectsBadCoefficients) {
  EXPECT_THROW((ScoringPolicy{1.0, 1.0, 0.95}.validate()), std::invalid_argument);
  EXPECT_THROW((ScoringPolicy{1.0, 0.0, 0.95}.validate()), std::invalid_argument);
  EXPECT_THROW((ScoringPolicy{0.0, 0.95, 0.95}.validate()), std::invalid_argument);
  EXPECT_THROW((ScoringPolicy{1.0, 0.95, -1.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW(ScoringPolicy{}.validate());
}

TEST(ScoringPolicy, RoundsUntilStale) {
  const ScoringPolicy p;
  EXPECT_EQ(p.rounds_until_stale(1.0), 2u);  // 1.0 -> 0.95 -> 0.9025
  EXPECT_EQ(p.rounds_until_stale(0.95), 1u);
  EXPECT_EQ(p.rounds_until_stale(0.9), 0u);
  // 2.0 * 0.95^k < 0.95  <=>  k > log(0.475)/log(0.95) = 14.51...
  EXPECT_EQ(p.rounds_until_stale(2.0), 15u);
}

TEST(PersistentBuffer, StaleBoundaryIsStrict) {
  PersistentBuffer buf(4);
  const std::vector<NodeId> in{7};
  buf.apply_replacement(in);
  EXPECT_EQ(buf.score(7), 1.0);
  buf.decay_unaccessed({});
  EXPECT_EQ(buf.score(7), 0.95);
  EXPECT_TRUE(buf.stale_set().empty());
  buf.decay_unaccessed({});
  EXPECT_EQ(buf.score(7), 0.95 * 0.95);
  EXPECT_EQ(buf.stale_set(), std::vector<NodeId>{7});
}

TEST(PersistentBuffer, ScoresMatchFoldAndClosedForm) {
  // Node v is accessed in round t iff (t * (v + 3)) % (v + 2) == 0.
  constexpr NodeId kNodes = 6;
  constexpr std::size_t kRounds = 40;
  PersistentBuffer buf(kNodes);
  std::vector<NodeId> all;
  for (NodeId v = 0; v < kNodes; ++v) all.push_back(v);
  buf.apply_replacement(all);
  std::map<NodeId, std::vector<bool>> history;
  for (std::size_t t = 0; t < kRounds; ++t) {
    std::vector<NodeId> hits;
    for (NodeId v = 0; v < kNodes; ++v) {
      const bool a = (t * (v + 3)) % (v + 2) == 0;
      history[v].push_back(a);
      if (a) hits.push_back(v);
    }
    round(buf, hits);
    for (NodeId v = 0; v < kNodes; ++v) {
      ASSERT_EQ(buf.score(v), fold(history[v])) << "node " << v << " round " << t;
      ASSERT_NEAR(buf.score(v), closed_form(history[v]), 1e-12);
    }
  }
}

TEST(PersistentBuffer, RecordAccessRequiresBufferedNode) {
  PersistentBuffer buf(2);
  const std::vector<NodeId> miss{3};
  EXPECT_THROW(buf.record_access(miss), std::logic_error);
}

TEST(PersistentBuffer, SkipsWhenFullAndNothingStale) {
  PersistentBuffer buf(2);
  const std::vector<NodeId> first{1, 2};
  buf.apply_replacement(first);
  const std::vector<NodeId> next{3, 4};
  const auto out = buf.apply_replacement(next);
  EXPECT_TRUE(out.skipped);
  EXPECT_TRUE(out.evicted.empty());
  EXPECT_TRUE(out.inserted.empty());
  EXPECT_TRUE(buf.contains(1));
  EXPECT_FALSE(buf.contains(3));
}

TEST(PersistentBuffer, EvictsAllStaleThenFillsInRankOrder) {
  PersistentBuffer buf(3);
  const std::vector<NodeId> first{10, 11, 12};
  buf.apply_replacement(first);
  // Two idle rounds for 10 and 12; 11 is accessed every round.
  round(buf, {11});
  round(buf, {11});
  EXPECT_EQ(buf.stale_set(), (std::vector<NodeId>{10, 12}));
  const std::vector<NodeId> incoming{30, 11, 20, 40};
  const auto out = buf.apply_replacement(incoming);
  EXPECT_FALSE(out.skipped);
  EXPECT_EQ(out.evicted, (std::vector<NodeId>{10, 12}));
  EXPECT_EQ(out.inserted, (std::vector<NodeId>{30, 20}));  // 11 already buffered, 40 over capacity
  EXPECT_DOUBLE_EQ(out.replaced_pct, 100.0 * 2.0 / 3.0);
  EXPECT_EQ(buf.score(30), 1.0);
  EXPECT_EQ(buf.score(11), 3.0);
  EXPECT_EQ(buf.size(), 3u);
}

TEST(PersistentBuffer, FreedPlusSpareSlots) {
  PersistentBuffer buf(4);
  const std::vector<NodeId> first{1, 2};  // a = 1, b = 2
  buf.apply_replacement(first);
  round(buf, {2});
  round(buf, {2});
  ASSERT_EQ(buf.stale_set(), std::vector<NodeId>{1});
  const std::vector<NodeId> incoming{3, 4, 5};
  const auto out = buf.apply_replacement(incoming);
  EXPECT_EQ(out.evicted, std::vector<NodeId>{1});
  EXPECT_EQ(out.inserted, (std::vector<NodeId>{3, 4, 5}));
  EXPECT_EQ(buf.size(), 4u);
  EXPECT_EQ(out.replaced_pct, 25.0);
}

TEST(PersistentBuffer, CapacityNeverExceededUnderRandomOps) {
  Rng rng(2024);
  PersistentBuffer buf(16);
  for (int step = 0; step < 2000; ++step) {
    std::vector<NodeId> sampled;
    for (int i = 0; i < 12; ++i) sampled.push_back(static_cast<NodeId>(rng.below(64)));
    std::vector<NodeId> hits;
    std::vector<NodeId> missed;
    for (NodeId v : sampled) (buf.contains(v) ? hits : missed).push_back(v);
    buf.record_access(hits);
    if (rng.below(3) == 0) buf.apply_replacement(missed);
    buf.decay_unaccessed(hits);
    ASSERT_LE(buf.size(), buf.capacity());
    for (const auto& [v, s] : buf.snapshot()) ASSERT_GT(s, 0.0);
  }
}

TEST(PersistentBuffer, NotFullReplacesEvenWithoutStale) {
  PersistentBuffer buf(3);
  const std::vector<NodeId> first{1};
  buf.apply_replacement(first);
  const std::vector<NodeId> next{2};
  const auto out = buf.apply_replacement(next);
  EXPECT_FALSE(out.skipped);
  EXPECT_EQ(out.inserted, std::vector<NodeId>{2});
  EXPECT_EQ(out.replaced_pct, 0.0);
}

TEST(PersistentBuffer, AdmissionFilterRejectsLocalNodes) {
  PersistentBuffer buf(4, {}, [](NodeId v) { return v % 2 == 1; });
  const std::vector<NodeId> bad{1, 2};
  EXPECT_THROW(buf.apply_replacement(bad), std::invalid_argument);
}

TEST(PersistentBuffer, ZeroCapacityAlwaysSkips) {
  PersistentBuffer buf(0);
  const std::vector<NodeId> in{1};
  EXPECT_TRUE(buf.apply_replacement(in).skipped);
  EXPECT_EQ(buf.size(), 0u);
}

TEST(PersistentBuffer, HitRate) {
  PersistentBuffer buf(4);
  const std::vector<NodeId> in{1, 2};
  buf.apply_replacement(in);
  const std::vector<NodeId> sampled{1, 3, 5, 2};
  const HitRate r = buf.hit_rate(sampled);
  EXPECT_EQ(r.hits, 2u);
  EXPECT_EQ(r.sampled, 4u);
  EXPECT_EQ(r.pct, 50.0);
  EXPECT_TRUE(buf.hit_rate({}).no_sample);
}

TEST(PersistentBuffer, SnapshotIsSortedById) {
  PersistentBuffer buf(4);
  const std::vector<NodeId> in{9, 3, 5};
  buf.apply_replacement(in);
  round(buf, {5});
  const auto snap = buf.snapshot();
  ASSERT_EQ(snap.size(), 3u);
  EXPECT_EQ(snap[0], (std::pair<NodeId, double>{3, 0.95}));
  EXPECT_EQ(snap[1], (std::pair<NodeId, double>{5, 2.0}));
  EXPECT_EQ(snap[2], (std::pair<NodeId, double>{9, 0.95}));
}

TEST(PersistentBuffer, LongIdleStreakStaysPositive) {
  PersistentBuffer buf(1);
  const std::vector<NodeId> in{1};
  buf.apply_replacement(in);
  for (int i = 0; i < 20000; ++i) buf.decay_unaccessed({});
  EXPECT_GT(buf.score(1), 0.0);
}

}  // namespace
}  // namespace gnnpf
