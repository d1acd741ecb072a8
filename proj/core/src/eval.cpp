#include "gnnpf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

namespace gnnpf {

Expectation observed_direction(double delta_hits, double epsilon) noexcept {
  if (delta_hits > epsilon) return Expectation::Up;
  if (delta_hits < -epsilon) return Expectation::Down;
  return Expectation::Flat;
}

PassAt1 pass_at_1(std::span<const DecisionRecord> ledger, double epsilon) {
  PassAt1 out;
  for (const auto& rec : ledger) {
    if (rec.decision.expected == Expectation::None || !rec.post) {
      ++out.excluded;
      continue;
    }
    ++out.evaluated;
    if (observed_direction(rec.post->pct_hits - rec.pre.pct_hits, epsilon) == rec.decision.expected) ++out.passes;
  }
  if (out.evaluated) out.rate = 100.0 * static_cast<double>(out.passes) / static_cast<double>(out.evaluated);
  return out;
}

ConfidenceInterval confidence_interval(std::size_t passes, std::size_t n, double level) {
  if (passes > n) throw std::invalid_argument("confidence_interval: passes exceeds n");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence_interval: level must be in (0, 1)");
  ConfidenceInterval ci;
  if (n == 0) return ci;
  const double alpha = 1.0 - level;
  const double x = static_cast<double>(passes);
  const double nn = static_cast<double>(n);
  const double lo = passes == 0 ? 0.0 : boost::math::ibeta_inv(x, nn - x + 1.0, alpha / 2.0);
  const double hi = passes == n ? 1.0 : boost::math::ibeta_inv(x + 1.0, nn - x, 1.0 - alpha / 2.0);
  const double point = 100.0 * x / nn;
  ci.lo = 100.0 * lo;
  ci.hi = 100.0 * hi;
  ci.lo_delta = ci.lo - point;
  ci.hi_delta = ci.hi - point;
  ci.defined = true;
  return ci;
}

double classifier_accuracy(const Classifier& model, std::span<const LabeledSample> heldout) {
  if (heldout.empty()) throw std::invalid_argument("classifier_accuracy: empty held-out set");
  const auto correct = std::count_if(heldout.begin(), heldout.end(),
                                     [&](const LabeledSample& s) { return model.predict(s.features) == s.good; });
  return 100.0 * static_cast<double>(correct) / static_cast<double>(heldout.size());
}

DecisionStats decision_stats(std::span<const DecisionRecord> ledger) {
  DecisionStats st;
  st.n_decisions = ledger.size();
  std::size_t valid = 0;
  std::size_t replace = 0;
  std::map<std::uint32_t, std::uint64_t> last;
  std::uint64_t gap_sum = 0;
  std::size_t gaps = 0;
  for (const auto& rec : ledger) {
    if (rec.decision.valid) {
      ++valid;
      if (rec.decision.action == Action::Replace) ++replace;
    }
    if (auto it = last.find(rec.trainer); it != last.end()) {
      gap_sum += rec.consumed_minibatch - it->second;
      ++gaps;
    }
    last[rec.trainer] = rec.consumed_minibatch;
  }
  if (gaps) st.r_mean = static_cast<double>(gap_sum) / static_cast<double>(gaps);
  if (st.n_decisions) {
    st.valid_pct = 100.0 * static_cast<double>(valid) / static_cast<double>(st.n_decisions);
    st.invalid_pct = 100.0 - st.valid_pct;
  }
  if (valid) {
    st.positive_pct = 100.0 * static_cast<double>(replace) / static_cast<double>(valid);
    st.negative_pct = 100.0 - st.positive_pct;
  }
  return st;
}

CostEstimate estimate_costs(const CostInputs& in) {
  for (double v : {in.samples, in.minibatches, in.epochs, in.t_sampling, in.t_train_theta, in.t_train_psi,
                   in.t_test_theta}) {
    if (!(v >= 0.0)) throw std::invalid_argument("estimate_costs: inputs must be >= 0");
  }
  CostEstimate c;
  c.inputs = in;
  c.t_icl = in.minibatches * in.epochs * std::max(in.t_train_psi, in.t_test_theta);
  c.t_sl = in.samples * (in.t_sampling + in.t_train_theta) + c.t_icl;
  return c;
}

EvalReport evaluate_ledger(std::span<const DecisionRecord> ledger, double epsilon) {
  EvalReport r;
  r.epsilon = epsilon;
  r.pass = pass_at_1(ledger, epsilon);
  r.ci = confidence_interval(r.pass.passes, r.pass.evaluated);
  r.stats = decision_stats(ledger);
  return r;
}

nlohmann::json eval_report_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json ci = nullptr;
  if (r.ci.defined) ci = {{"lo", r.ci.lo}, {"hi", r.ci.hi}, {"lo_delta", r.ci.lo_delta}, {"hi_delta", r.ci.hi_delta}};
  return {{"pass_at_1", opt(r.pass.rate)},
          {"pass_at_1_defined", r.pass.rate.has_value()},
          {"passes", r.pass.passes},
          {"evaluated", r.pass.evaluated},
          {"excluded", r.pass.excluded},
          {"epsilon", r.epsilon},
          {"ci95", ci},
          {"r_mean", opt(r.stats.r_mean)},
          {"n_decisions", r.stats.n_decisions},
          {"valid_pct", r.stats.valid_pct},
          {"invalid_pct", r.stats.invalid_pct},
          {"positive_pct", r.stats.positive_pct},
          {"negative_pct", r.stats.negative_pct}};
}

nlohmann::json cost_estimate_json(const CostEstimate& c) {
  const auto& in = c.inputs;
  return {{"t_sl", c.t_sl},
          {"t_icl", c.t_icl},
          {"inputs",
           {{"S", in.samples},
            {"M", in.minibatches},
            {"e", in.epochs},
            {"t_sampling", in.t_sampling},
            {"t_train_theta", in.t_train_theta},
            {"t_train_psi", in.t_train_psi},
            {"t_test_theta", in.t_test_theta}}}};
}

std::string compare_csv(const std::vector<std::string>& variants, const std::vector<nlohmann::json>& reports,
                        const std::vector<std::string>& columns) {
  if (variants.size() != reports.size()) throw std::invalid_argument("compare_csv: one name per report");
  std::string out = "variant";
  for (const auto& c : columns) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out += variants[i];
    for (const auto& c : columns) {
      out += ",";
      const auto it = reports[i].find(c);
      if (it != reports[i].end() && it->is_number()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", it->get<double>());
        out += buf;
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace gnnpf
