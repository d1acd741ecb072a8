#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnpf/classifier.hpp"
#include "gnnpf/metrics.hpp"

namespace gnnpf {

/// Observed direction of a %-Hits change: within +-epsilon is flat.
Expectation observed_direction(double delta_hits, double epsilon) noexcept;

struct PassAt1 {
  std::size_t passes = 0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  // no stated expectation or no post snapshot
  /// Empty when nothing could be evaluated.
  std::optional<double> rate;
};

PassAt1 pass_at_1(std::span<const DecisionRecord> ledger, double epsilon = 0.5);

/// Exact (Clopper-Pearson) 95% binomial interval in percent. The deltas are
/// signed offsets from the point rate (lo_delta <= 0 <= hi_delta).
struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double lo_delta = 0.0;
  double hi_delta = 0.0;
  bool defined = false;
};

/// Throws std::invalid_argument when passes > n. n == 0 gives an undefined
/// interval.
ConfidenceInterval confidence_interval(std::size_t passes, std::size_t n, double level = 0.95);

/// Percent of correctly predicted labels. Throws on an empty set.
double classifier_accuracy(const Classifier& model, std::span<const LabeledSample> heldout);

struct DecisionStats {
  std::size_t n_decisions = 0;
  std::optional<double> r_mean;  // needs two decisions from one trainer
  double valid_pct = 0.0;
  double invalid_pct = 0.0;
  double positive_pct = 0.0;  // Replace share of valid decisions
  double negative_pct = 0.0;
};

DecisionStats decision_stats(std::span<const DecisionRecord> ledger);

struct CostInputs {
  double samples = 0.0;  // S
  double minibatches = 0.0;  // M
  double epochs = 0.0;  // e
  double t_sampling = 0.0;
  double t_train_theta = 0.0;
  double t_train_psi = 0.0;
  double t_test_theta = 0.0;
};

struct CostEstimate {
  double t_sl = 0.0;
  double t_icl = 0.0;
  CostInputs inputs;
};

/// Supervised bootstrapping pays an offline term S*(t_sampling +
/// t_train_theta); both pay M*e*max(t_train_psi, t_test_theta) online.
/// Throws std::invalid_argument on negative inputs.
CostEstimate estimate_costs(const CostInputs& in);

struct EvalReport {
  PassAt1 pass;
  ConfidenceInterval ci;
  DecisionStats stats;
  double epsilon = 0.5;
};

EvalReport evaluate_ledger(std::span<const DecisionRecord> ledger, double epsilon = 0.5);

nlohmann::json eval_report_json(const EvalReport& r);
nlohmann::json cost_estimate_json(const CostEstimate& c);

/// One row per variant; `columns` name numeric fields of each report.
std::string compare_csv(const std::vector<std::string>& variants, const std::vector<nlohmann::json>& reports,
                        const std::vector<std::string>& columns);

}  // namespace gnnpf
