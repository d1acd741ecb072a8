#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnpf/metrics.hpp"
#include "gnnpf/types.hpp"

namespace gnnpf {

struct LabeledSample {
  FeatureVector features{};
  bool good = false;
  // Provenance, so labels can be recomputed from a trace.
  std::uint32_t trainer = 0;
  std::uint64_t pre_minibatch = 0;
  std::uint64_t post_minibatch = 0;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

void to_json(nlohmann::json& j, const LabeledSample& s);
void from_json(const nlohmann::json& j, LabeledSample& s);

/// S' = delta %-Hits (points) - delta T_COMM (percent change of simulated
/// fetch cost). Good iff S' > 0. Features come from the pre snapshot.
/// Throws std::invalid_argument unless pre precedes post.
LabeledSample label_sample(const RuntimeMetrics& pre, const RuntimeMetrics& post);

enum class ClassifierKind { Logistic, SmallMlp };

std::string_view to_string(ClassifierKind k) noexcept;
ClassifierKind parse_classifier_kind(std::string_view name);

/// Binary replacement classifier over z-normalized metric features.
/// Logistic models have no hidden layer; their head is the whole model.
class Classifier {
 public:
  ClassifierKind kind = ClassifierKind::Logistic;
  FeatureVector mean{};
  FeatureVector scale{};
  std::size_t hidden = 0;
  std::vector<double> hidden_weights;  // hidden x kFeatureCount, row-major
  std::vector<double> hidden_bias;     // hidden
  std::vector<double> out_weights;     // hidden (mlp) or kFeatureCount (logistic)
  double out_bias = 0.0;

  double predict_proba(const FeatureVector& x) const;
  bool predict(const FeatureVector& x) const { return predict_proba(x) >= 0.5; }

  /// Bitwise FNV-1a over the hidden-layer parameters.
  std::uint64_t hidden_checksum() const;

  nlohmann::json to_json() const;
  static Classifier from_json(const nlohmann::json& j);

  /// What the output head sees: the normalized input for logistic models,
  /// the frozen hidden activations otherwise.
  std::vector<double> head_inputs(const FeatureVector& x) const;

  friend bool operator==(const Classifier&, const Classifier&) = default;
};

struct FitOptions {
  std::size_t hidden_units = 16;
  std::size_t iterations = 0;  // 0 picks a per-kind default
  double learning_rate = 0.0;  // 0 picks a per-kind default
  double l2 = 1e-4;
  double heldout_fraction = 0.2;
};

struct FitResult {
  Classifier model;
  double heldout_accuracy = 0.0;
  std::vector<LabeledSample> heldout;
};

/// Deterministic per seed. Throws DegenerateDataError on fewer than two
/// samples or a single label class.
FitResult fit_classifier(std::span<const LabeledSample> samples, ClassifierKind kind, Seed seed,
                         const FitOptions& options = {});

struct FinetuneOptions {
  std::size_t iterations = 200;
  double learning_rate = 0.05;
  double l2 = 1e-4;
};

/// Updates only the output layer on `buffered`; hidden parameters and the
/// normalization statistics are left untouched. Empty input is a no-op.
Classifier finetune_classifier(const Classifier& model, std::span<const LabeledSample> buffered,
                               const FinetuneOptions& options = {});

}  // namespace gnnpf
