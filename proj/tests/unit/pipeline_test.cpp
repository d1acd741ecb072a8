#include "gnnpf/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <stdexcept>

#include <gtest/gtest.h>

#include "gnnpf/error.hpp"
#include "test_graphs.hpp"

namespace gnnpf {
namespace {

using testing::make_world;
using testing::small_config;

RunReport run(const RunConfig& cfg, const RunHooks& hooks = {}) {
  const auto w = make_world(cfg);
  return run_training(cfg, w.graph, w.partition, hooks);
}

/// Replays a fixed list of actions, then skips.
class ScriptController final : public Controller {
 public:
  explicit ScriptController(std::vector<Action> script) : script_(std::move(script)) {}
  ControllerKind kind() const noexcept override { return ControllerKind::Agent; }

 protected:
  Decision decide_impl(const RuntimeMetrics&) override {
    Decision d;
    if (i_ < script_.size()) d.action = script_[i_];
    ++i_;
    return d;
  }

 private:
  std::vector<Action> script_;
  std::size_t i_ = 0;
};

class ThrowingController final : public Controller {
 public:
  ControllerKind kind() const noexcept override { return ControllerKind::Agent; }

 protected:
  Decision decide_impl(const RuntimeMetrics&) override { throw std::runtime_error("model crashed"); }
};

TEST(Queues, NewestRequestWinsAndOthersDrop) {
  Queues q;
  RuntimeMetrics m;
  for (std::uint64_t i = 0; i < 3; ++i) {
    m.minibatch_index = i;
    q.push_request(m);
  }
  std::size_t dropped = 0;
  const auto req = q.take_newest_request(&dropped);
  ASSERT_TRUE(req.has_value());
  EXPECT_EQ(req->minibatch_index, 2u);
  EXPECT_EQ(dropped, 2u);
  EXPECT_EQ(q.pending_requests(), 0u);
  EXPECT_FALSE(q.take_newest_request().has_value());
  q.push_request(m);
  q.push_request(m);
  EXPECT_EQ(q.clear_requests(), 2u);
}

TEST(Queues, SingleOutstandingDecision) {
  Queues q;
  q.push_decision(PendingDecision{{}, 5.0, 5.0, 1});
  EXPECT_THROW(q.push_decision(PendingDecision{}), std::logic_error);
  EXPECT_FALSE(q.poll(4.0, Mode::Async).has_value());
  EXPECT_TRUE(q.has_decision());
  EXPECT_TRUE(q.poll(5.0, Mode::Async).has_value());
  EXPECT_FALSE(q.has_decision());
  q.push_decision(PendingDecision{{}, 50.0, 50.0, 2});
  EXPECT_TRUE(q.poll(0.0, Mode::Sync).has_value());  // sync waits for it
}

TEST(Queues, PauseAndNotify) {
  Queues q;
  EXPECT_FALSE(q.paused());
  q.pause();
  EXPECT_TRUE(q.paused());
  q.notify();
  EXPECT_FALSE(q.paused());
}

TEST(RunTraining, SinglePartitionHasNoCommunication) {
  RunConfig cfg = small_config();
  cfg.partitions = 1;
  cfg.controller.kind = ControllerKind::Never;
  const RunReport r = run(cfg);
  EXPECT_EQ(r.comm_volume, 0u);
  for (const auto& e : r.epochs) EXPECT_EQ(e.comm_volume, 0u);
}

TEST(RunTraining, WarmBufferReducesCommunication) {
  RunConfig cfg;
  cfg.graph.nodes = 10'000;
  cfg.graph.seed = 7;
  cfg.partitions = 4;
  cfg.buffer_pct = 25;
  cfg.epochs = 3;
  cfg.seed = 5;
  cfg.controller.kind = ControllerKind::Fixed;
  const RunReport r = run(cfg);
  ASSERT_EQ(r.epochs.size(), 3u);
  EXPECT_LT(r.epochs[2].comm_volume, r.epochs[0].comm_volume);
}

TEST(RunTraining, DeterministicReportAndTrace) {
  RunConfig cfg = small_config();
  cfg.controller.kind = ControllerKind::Selective;
  const RunReport a = run(cfg);
  const RunReport b = run(cfg);
  EXPECT_EQ(report_to_json(a), report_to_json(b));
  EXPECT_EQ(serialize_trace(a.trace), serialize_trace(b.trace));
  cfg.seed += 1;
  EXPECT_NE(serialize_trace(run(cfg).trace), serialize_trace(a.trace));
}

TEST(RunTraining, SyncIntervalIsAlwaysOne) {
  RunConfig cfg = small_config();
  cfg.mode = Mode::Sync;
  cfg.controller.kind = ControllerKind::Selective;
  const RunReport r = run(cfg);
  ASSERT_FALSE(r.replacement_intervals.empty());
  for (auto gap : r.replacement_intervals) EXPECT_EQ(gap, 1u);
  EXPECT_EQ(r.r_mean, 1.0);
}

TEST(RunTraining, AsyncIntervalGrowsWithLatency) {
  RunConfig cfg = small_config();
  cfg.controller.kind = ControllerKind::Selective;
  cfg.clock.t_infer = 0.0;
  const RunReport fast = run(cfg);
  cfg.clock.t_infer = 500.0;
  const RunReport slow = run(cfg);
  ASSERT_TRUE(fast.r_mean && slow.r_mean);
  for (auto gap : slow.replacement_intervals) EXPECT_GE(gap, 1u);
  EXPECT_GT(*slow.r_mean, *fast.r_mean);
}

TEST(RunTraining, InstantaneousControllersHaveZeroLatency) {
  RunConfig cfg = small_config();
  for (auto kind : {ControllerKind::Never, ControllerKind::Fixed}) {
    cfg.controller.kind = kind;
    const RunReport r = run(cfg);
    for (const auto& ev : r.trace.events()) {
      if (ev.kind == EventKind::Decision) ASSERT_EQ(ev.payload["latency"].get<double>(), 0.0);
    }
  }
}

TEST(RunTraining, SkipDoesNotClearRequestsAndStaleOnesAreDropped) {
  RunConfig cfg = small_config();
  cfg.clock.t_infer = 300.0;  // several minibatches per decision
  RunHooks hooks;
  hooks.controller_factory = [](PartitionId, const PromptStatic&) {
    return std::make_unique<ScriptController>(std::vector<Action>{Action::Skip, Action::Skip, Action::Replace});
  };
  const RunReport r = run(cfg, hooks);
  std::size_t replace_events = 0;
  std::size_t dropped_total = 0;
  std::map<std::uint64_t, Action> consumed;  // decision seq -> action
  for (const auto& ev : r.trace.events()) {
    if (ev.kind == EventKind::Request) dropped_total += ev.payload["dropped"].get<std::size_t>();
    if (ev.kind == EventKind::Replacement) ++replace_events;
  }
  std::size_t replace_decisions = 0;
  for (const auto& rec : r.ledger) replace_decisions += rec.decision.action == Action::Replace;
  EXPECT_EQ(replace_events, replace_decisions);
  EXPECT_GT(dropped_total, 0u);
}

TEST(RunTraining, ReplaceOnFreshFullBufferIsRecordedAsSkipped) {
  RunConfig cfg = small_config();
  cfg.controller.kind = ControllerKind::Fixed;
  cfg.clock.t_infer = 0.0;
  const RunReport r = run(cfg);
  std::size_t skipped = 0;
  for (const auto& ev : r.trace.events()) {
    if (ev.kind != EventKind::Replacement || !ev.payload["skipped"].get<bool>()) continue;
    ++skipped;
    EXPECT_EQ(ev.payload["evicted"], 0);
    EXPECT_EQ(ev.payload["inserted"], 0);
  }
  std::size_t flagged = 0;
  for (const auto& rec : r.ledger) flagged += rec.replacement_skipped;
  EXPECT_EQ(flagged, skipped);
}

TEST(RunTraining, ControllerFailureBecomesInvalidSkip) {
  RunConfig cfg = small_config();
  RunHooks hooks;
  hooks.controller_factory = [](PartitionId, const PromptStatic&) { return std::make_unique<ThrowingController>(); };
  const RunReport r = run(cfg, hooks);
  EXPECT_GT(r.decisions, 0u);
  EXPECT_EQ(r.invalid_decisions, r.decisions);
  EXPECT_EQ(r.replacements, 0u);
  for (const auto& rec : r.ledger) EXPECT_EQ(rec.decision.action, Action::Skip);
}

TEST(RunTraining, MissingNotifyStallsWithDiagnostic) {
  RunConfig cfg = small_config();
  cfg.epochs = 20;
  RunHooks hooks;
  hooks.drop_notifies = true;
  hooks.stall_guard = 8;
  try {
    run(cfg, hooks);
    FAIL() << "run finished without notifies";
  } catch (const PipelineStall& e) {
    EXPECT_NE(std::string(e.what()).find("paused"), std::string::npos);
  }
}

TEST(RunTraining, LedgerBracketsConsumingMinibatch) {
  RunConfig cfg = small_config();
  cfg.controller.kind = ControllerKind::Selective;
  const RunReport r = run(cfg);
  ASSERT_FALSE(r.ledger.empty());
  for (const auto& rec : r.ledger) {
    EXPECT_EQ(rec.pre.minibatch_index, rec.consumed_minibatch);
    EXPECT_LE(rec.decision.source_minibatch, rec.consumed_minibatch);
    if (rec.post) EXPECT_EQ(rec.post->minibatch_index, rec.consumed_minibatch + 1);
  }
}

TEST(RunTraining, EpochTimeTracksSlowestTrainer) {
  RunConfig cfg = small_config();
  cfg.partitions = 3;
  cfg.partition_strategy = PartitionStrategy::Range;
  cfg.controller.kind = ControllerKind::Fixed;
  const RunReport r = run(cfg);
  // Per-step elapsed comes from sample (start) and barrier (before) events.
  std::map<std::pair<std::uint32_t, std::uint64_t>, double> start;
  std::map<std::uint64_t, std::map<std::uint32_t, double>> own;   // epoch -> trainer -> sum
  std::map<std::uint64_t, std::map<std::uint64_t, double>> slowest;  // epoch -> step index -> max
  std::map<std::uint32_t, std::uint64_t> step_in_epoch;
  std::map<std::uint32_t, std::uint64_t> epoch_of;
  for (const auto& ev : r.trace.events()) {
    if (ev.kind == EventKind::Sample) start[{ev.trainer, ev.minibatch}] = ev.sim_time;
    if (ev.kind != EventKind::Barrier) continue;
    if (epoch_of[ev.trainer] != ev.epoch) step_in_epoch[ev.trainer] = 0;
    epoch_of[ev.trainer] = ev.epoch;
    const double elapsed = ev.payload["before"].get<double>() - start.at({ev.trainer, ev.minibatch});
    own[ev.epoch][ev.trainer] += elapsed;
    double& m = slowest[ev.epoch][step_in_epoch[ev.trainer]++];
    m = std::max(m, elapsed);
  }
  for (const auto& es : r.epochs) {
    double expected = 0.0;
    for (const auto& [i, t] : slowest[es.epoch]) expected += t;
    EXPECT_NEAR(es.epoch_time, expected, 1e-9 * std::max(1.0, expected));
    for (const auto& [trainer, sum] : own[es.epoch]) EXPECT_LE(sum, es.epoch_time + 1e-9);
  }
}

TEST(RunTraining, RejectsMismatchedPartitionMap) {
  RunConfig cfg = small_config();
  const auto w = make_world(cfg);
  cfg.partitions = 3;
  EXPECT_THROW(run_training(cfg, w.graph, w.partition), ConfigError);
}

TEST(RunTraining, EpochMarkCarriesBufferSnapshot) {
  RunConfig cfg = small_config();
  const RunReport r = run(cfg);
  std::size_t marks = 0;
  for (const auto& ev : r.trace.events()) {
    if (ev.kind != EventKind::EpochMark) continue;
    ++marks;
    const auto& snap = ev.payload["buffer"];
    ASSERT_TRUE(snap.is_array());
    EXPECT_LE(snap.size(), r.buffer_capacity[ev.trainer]);
    for (const auto& pair : snap) EXPECT_GT(pair[1].get<double>(), 0.0);
  }
  EXPECT_EQ(marks, cfg.partitions * cfg.epochs);
}

TEST(RunReport, CsvAndFiles) {
  RunConfig cfg = small_config();
  const RunReport r = run(cfg);
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,mean_time,pct_hits,comm_volume,replacements,r_mean");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(cfg.epochs + 1));
  const auto dir = std::filesystem::temp_directory_path() / "gnnpf_report_files";
  std::filesystem::remove_all(dir);
  write_report(r, dir, {{"wall_seconds", 1.5}});
  for (const char* f : {"report.json", "epochs.csv", "trace.jsonl", "run.meta.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace gnnpf
