#include "gnnpf/controller.hpp"

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "gnnpf/types.hpp"

namespace gnnpf {
namespace {

RuntimeMetrics at(std::uint64_t idx, double hits = 50.0) {
  RuntimeMetrics m;
  m.minibatch_index = idx;
  m.pct_hits = hits;
  m.comm_time = 10.0;
  m.minibatches_remaining = 100;
  return m;
}

std::unique_ptr<AgentController> agent(std::vector<std::string> replies) {
  return std::make_unique<AgentController>(std::make_unique<ScriptedEndpoint>(std::move(replies)), PromptStatic{});
}

TEST(ControllerKind, ParseAndPrint) {
  for (auto k : {ControllerKind::Never, ControllerKind::Fixed, ControllerKind::Once, ControllerKind::Selective,
                 ControllerKind::Classifier, ControllerKind::Agent}) {
    EXPECT_EQ(parse_controller_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_controller_kind("oracle"), std::invalid_argument);
}

TEST(Baselines, NeverAndFixed) {
  NeverController never;
  FixedController fixed;
  for (std::uint64_t i = 0; i < 5; ++i) {
    const Decision n = never.decide(at(i));
    const Decision f = fixed.decide(at(i));
    EXPECT_EQ(n.action, Action::Skip);
    EXPECT_EQ(f.action, Action::Replace);
    EXPECT_TRUE(n.valid && f.valid);
    EXPECT_EQ(f.source_minibatch, i);
  }
  EXPECT_TRUE(never.instantaneous());
  EXPECT_TRUE(fixed.instantaneous());
}

TEST(Once, ReplacesOnlyFirstTime) {
  OnceController c;
  EXPECT_FALSE(c.instantaneous());
  EXPECT_EQ(c.decide(at(0)).action, Action::Replace);
  for (std::uint64_t i = 1; i < 10; ++i) EXPECT_EQ(c.decide(at(i)).action, Action::Skip);
}

TEST(Selective, ReplacesWhenHitsStall) {
  SelectiveController c(3, 1.0);
  // Rising hits: no replacement once the window fills.
  EXPECT_EQ(c.decide(at(0, 10)).action, Action::Skip);
  EXPECT_EQ(c.decide(at(1, 12)).action, Action::Skip);
  EXPECT_EQ(c.decide(at(2, 14)).action, Action::Skip);
  // Window {12, 14, 14.5}: gain 2.5 >= 1.
  EXPECT_EQ(c.decide(at(3, 14.5)).action, Action::Skip);
  // Window {14, 14.5, 14.6}: gain 0.6 < 1.
  const Decision d = c.decide(at(4, 14.6));
  EXPECT_EQ(d.action, Action::Replace);
  EXPECT_EQ(d.expected, Expectation::Up);
  // History restarts after a replacement.
  EXPECT_EQ(c.decide(at(5, 14.6)).action, Action::Skip);
  EXPECT_EQ(c.decide(at(6, 14.6)).action, Action::Skip);
  EXPECT_EQ(c.decide(at(7, 14.6)).action, Action::Replace);
}

Classifier threshold_model() {
  // Logistic model: good iff pct_hits < 50 (z-scored with mean 50).
  Classifier c;
  c.kind = ClassifierKind::Logistic;
  c.mean = {50, 0, 0, 0, 0, 0, 0, 0};
  c.scale = {10, 1, 1, 1, 1, 1, 1, 1};
  c.out_weights = {-5, 0, 0, 0, 0, 0, 0, 0};
  c.out_bias = 0.0;
  return c;
}

TEST(ClassifierController, ThresholdsProbability) {
  ClassifierController c(threshold_model());
  EXPECT_EQ(c.decide(at(0, 20)).action, Action::Replace);
  EXPECT_EQ(c.decide(at(1, 80)).action, Action::Skip);
  EXPECT_EQ(c.decide(at(2, 20)).expected, Expectation::None);
  // Stateless: the same input gives the same decision in any order.
  EXPECT_EQ(c.decide(at(3, 80)).action, Action::Skip);
  EXPECT_TRUE(c.finetune_log().empty());
}

TEST(ClassifierController, FinetuneCadence) {
  ClassifierController c(threshold_model(), 5);
  for (std::uint64_t i = 0; i <= 16; ++i) c.decide(at(i, 30.0 + static_cast<double>(i % 4) * 10.0));
  EXPECT_EQ(c.finetune_log(), (std::vector<std::uint64_t>{5, 10, 15}));
}

TEST(AgentController, ScriptedReplyBecomesDecision) {
  auto c = agent({R"({"replace": true, "expect": "hits_up"})"});
  const Decision d = c->decide(at(3));
  EXPECT_TRUE(d.valid);
  EXPECT_EQ(d.action, Action::Replace);
  EXPECT_EQ(d.expected, Expectation::Up);
  EXPECT_EQ(d.source_minibatch, 3u);
  EXPECT_FALSE(c->instantaneous());
}

TEST(AgentController, MalformedReplyQueuesNoteForNextPrompt) {
  auto c = agent({"replace it!", R"({"replace": false, "expect": "hits_flat"})"});
  const Decision bad = c->decide(at(0));
  EXPECT_FALSE(bad.valid);
  EXPECT_EQ(bad.action, Action::Skip);
  EXPECT_EQ(c->invalid_count(), 1u);
  c->decide(at(1));
  auto& ep = static_cast<ScriptedEndpoint&>(c->endpoint());
  ASSERT_EQ(ep.prompts().size(), 2u);
  EXPECT_EQ(ep.prompts()[0].find("malformed"), std::string::npos);
  EXPECT_NE(ep.prompts()[1].find("malformed"), std::string::npos);
  EXPECT_EQ(c->invalid_count(), 1u);
}

TEST(AgentController, FailuresAreInvalidSkips) {
  auto c = agent({"__TIMEOUT__", "__UNREACHABLE__"});
  const Decision t = c->decide(at(0));
  EXPECT_FALSE(t.valid);
  EXPECT_TRUE(t.timed_out);
  EXPECT_EQ(t.action, Action::Skip);
  const Decision u = c->decide(at(1));
  EXPECT_FALSE(u.valid);
  EXPECT_FALSE(u.timed_out);
  EXPECT_EQ(c->invalid_count(), 2u);
  EXPECT_EQ(c->timeout_count(), 1u);
}

TEST(AgentController, HistoryEvaluatesPreviousDecision) {
  auto c = agent({R"({"replace": true, "expect": "hits_up"})"});
  c->decide(at(0, 40));
  c->decide(at(1, 55));
  const auto& recs = c->context().records();
  ASSERT_EQ(recs.size(), 2u);
  ASSERT_TRUE(recs[0].post.has_value());
  EXPECT_EQ(*recs[0].effectiveness, 15.0);
  EXPECT_FALSE(recs[1].post.has_value());
  auto& ep = static_cast<ScriptedEndpoint&>(c->endpoint());
  EXPECT_NE(ep.prompts()[1].find("effectiveness +15.00"), std::string::npos);
}

TEST(AgentController, GarbageNeverThrows) {
  Rng rng(1);
  std::vector<std::string> replies;
  for (int i = 0; i < 200; ++i) {
    std::string s;
    const auto len = rng.below(40);
    for (std::uint64_t j = 0; j < len; ++j) s.push_back(static_cast<char>(rng.below(256)));
    if (i % 3 == 0) s = "{" + s + "}";
    replies.push_back(s);
  }
  auto c = agent(replies);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Decision d = c->decide(at(i));
    if (!d.valid) EXPECT_EQ(d.action, Action::Skip);
  }
}

TEST(MakeController, BuildsEachKind) {
  ControllerConfig cfg;
  for (auto k : {ControllerKind::Never, ControllerKind::Fixed, ControllerKind::Once, ControllerKind::Selective}) {
    cfg.kind = k;
    EXPECT_EQ(make_controller(cfg, PromptStatic{})->kind(), k);
  }
  cfg.kind = ControllerKind::Agent;
  cfg.fixture = std::string(GNNPF_FIXTURE_DIR) + "/chat_valid.json";
  EXPECT_EQ(make_controller(cfg, PromptStatic{})->kind(), ControllerKind::Agent);

  const auto path = std::filesystem::temp_directory_path() / "gnnpf_model.json";
  std::ofstream(path) << threshold_model().to_json().dump();
  cfg.kind = ControllerKind::Classifier;
  cfg.model_path = path.string();
  EXPECT_EQ(make_controller(cfg, PromptStatic{})->kind(), ControllerKind::Classifier);
  std::filesystem::remove(path);
  EXPECT_THROW(make_controller(cfg, PromptStatic{}), std::runtime_error);
}

}  // namespace
}  // namespace gnnpf
