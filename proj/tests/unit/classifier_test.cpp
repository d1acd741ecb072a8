#include "gnnpf/classifier.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "gnnpf/error.hpp"
#include "gnnpf/eval.hpp"
#include "gnnpf/types.hpp"

namespace gnnpf {
namespace {

RuntimeMetrics snap(std::uint64_t idx, double hits, double comm_time) {
  RuntimeMetrics m;
  m.minibatch_index = idx;
  m.pct_hits = hits;
  m.comm_time = comm_time;
  return m;
}

// Feature 0 drives the label (good iff > 50) unless `flip`; feature 6
// drifts with the regime. Other features are noise.
std::vector<LabeledSample> regime(std::size_t n, Seed seed, bool flip, double regime_marker) {
  Rng rng(seed);
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    for (auto& f : s.features) f = rng.uniform() * 100.0;
    s.features[6] = regime_marker + rng.uniform() * 10.0;
    // Keep a margin around the boundary.
    if (std::abs(s.features[0] - 50.0) < 5.0) s.features[0] += s.features[0] < 50.0 ? -5.0 : 5.0;
    s.good = (s.features[0] > 50.0) != flip;
    out.push_back(s);
  }
  return out;
}

TEST(LabelSample, SPrimeRule) {
  // +5 points of hits, +2% fetch cost.
  EXPECT_TRUE(label_sample(snap(1, 40, 50), snap(2, 45, 51)).good);
  EXPECT_FALSE(label_sample(snap(1, 40, 50), snap(2, 40, 50)).good);  // S' = 0 is bad
  EXPECT_FALSE(label_sample(snap(1, 40, 50), snap(2, 41, 52)).good);  // +1 vs +4%
  EXPECT_THROW(label_sample(snap(2, 0, 0), snap(2, 0, 0)), std::invalid_argument);
  const auto s = label_sample(snap(3, 10, 1), snap(9, 10, 1));
  EXPECT_EQ(s.pre_minibatch, 3u);
  EXPECT_EQ(s.post_minibatch, 9u);
  EXPECT_EQ(s.features[0], 10.0);
}

TEST(LabelSample, JsonRoundTrip) {
  auto s = label_sample(snap(1, 40, 50), snap(2, 45, 51));
  s.trainer = 3;
  const nlohmann::json j = s;
  EXPECT_EQ(j.get<LabeledSample>(), s);
}

TEST(ClassifierKind, ParseAndPrint) {
  EXPECT_EQ(parse_classifier_kind("logistic"), ClassifierKind::Logistic);
  EXPECT_EQ(parse_classifier_kind("small-mlp"), ClassifierKind::SmallMlp);
  EXPECT_EQ(parse_classifier_kind("mlp"), ClassifierKind::SmallMlp);
  EXPECT_THROW(parse_classifier_kind("svm"), std::invalid_argument);
}

TEST(FitClassifier, RejectsDegenerateData) {
  auto data = regime(20, 1, false, 0);
  for (auto& s : data) s.good = true;
  EXPECT_THROW(fit_classifier(data, ClassifierKind::Logistic, 1), DegenerateDataError);
  const std::vector<LabeledSample> one(1);
  EXPECT_THROW(fit_classifier(one, ClassifierKind::Logistic, 1), DegenerateDataError);
}

class FitByKind : public ::testing::TestWithParam<ClassifierKind> {};

TEST_P(FitByKind, SeparableReachesFullAccuracy) {
  const auto data = regime(500, 2, false, 0);
  // Brute-force separability: a threshold on feature 0 labels every sample.
  EXPECT_TRUE(std::all_of(data.begin(), data.end(), [](const auto& s) { return s.good == (s.features[0] > 50.0); }));
  const FitResult r = fit_classifier(data, GetParam(), 7);
  EXPECT_EQ(r.heldout.size(), 100u);
  EXPECT_EQ(r.heldout_accuracy, 100.0);
  EXPECT_EQ(classifier_accuracy(r.model, r.heldout), 100.0);
}

TEST_P(FitByKind, ShuffledLabelsNearChance) {
  auto data = regime(2000, 3, false, 0);
  Rng rng(4);
  for (auto& s : data) s.good = rng.below(2) == 1;
  const FitResult r = fit_classifier(data, GetParam(), 7);
  EXPECT_NEAR(r.heldout_accuracy, 50.0, 10.0);
}

TEST_P(FitByKind, DeterministicPerSeed) {
  const auto data = regime(300, 5, false, 0);
  const FitResult a = fit_classifier(data, GetParam(), 11);
  const FitResult b = fit_classifier(data, GetParam(), 11);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.heldout, b.heldout);
}

TEST_P(FitByKind, FinetuneFreezesHiddenAndAdaptsToShift) {
  const auto a = regime(400, 6, false, 40);
  const auto b_train = regime(300, 7, true, 50);
  const auto b_test = regime(200, 8, true, 50);
  const FitResult fit = fit_classifier(a, GetParam(), 13);
  const Classifier tuned = finetune_classifier(fit.model, b_train, FinetuneOptions{600, 0.1, 1e-4});

  EXPECT_EQ(tuned.hidden_checksum(), fit.model.hidden_checksum());
  EXPECT_EQ(tuned.hidden_weights, fit.model.hidden_weights);
  EXPECT_EQ(tuned.hidden_bias, fit.model.hidden_bias);
  EXPECT_EQ(tuned.mean, fit.model.mean);
  EXPECT_EQ(tuned.scale, fit.model.scale);
  EXPECT_NE(tuned.out_weights, fit.model.out_weights);

  const double frozen = classifier_accuracy(fit.model, b_test);
  const double adapted = classifier_accuracy(tuned, b_test);
  EXPECT_GT(adapted, frozen);
}

TEST_P(FitByKind, EmptyFinetuneIsNoOp) {
  const FitResult fit = fit_classifier(regime(100, 9, false, 0), GetParam(), 1);
  EXPECT_EQ(finetune_classifier(fit.model, {}), fit.model);
}

TEST_P(FitByKind, JsonRoundTripAndPredictionsStable) {
  const FitResult fit = fit_classifier(regime(200, 10, false, 0), GetParam(), 2);
  const Classifier back = Classifier::from_json(fit.model.to_json());
  EXPECT_EQ(back, fit.model);
  const auto probe = regime(50, 11, false, 0);
  // Stateless: order of queries does not matter.
  std::vector<bool> forward;
  std::vector<bool> backward;
  for (const auto& s : probe) forward.push_back(back.predict(s.features));
  for (auto it = probe.rbegin(); it != probe.rend(); ++it) backward.push_back(back.predict(it->features));
  std::reverse(backward.begin(), backward.end());
  EXPECT_EQ(forward, backward);
}

INSTANTIATE_TEST_SUITE_P(Kinds, FitByKind, ::testing::Values(ClassifierKind::Logistic, ClassifierKind::SmallMlp),
                         [](const auto& info) { return info.param == ClassifierKind::Logistic ? "Logistic" : "Mlp"; });

TEST(Classifier, LogisticHasNoHiddenLayer) {
  const FitResult fit = fit_classifier(regime(100, 12, false, 0), ClassifierKind::Logistic, 1);
  EXPECT_EQ(fit.model.hidden, 0u);
  EXPECT_TRUE(fit.model.hidden_weights.empty());
  EXPECT_EQ(fit.model.out_weights.size(), kFeatureCount);
}

TEST(Classifier, FromJsonChecksShapes) {
  const FitResult fit = fit_classifier(regime(100, 13, false, 0), ClassifierKind::SmallMlp, 1);
  auto j = fit.model.to_json();
  j["out_weights"].erase(0);
  EXPECT_ANY_THROW(Classifier::from_json(j));
}

}  // namespace
}  // namespace gnnpf
