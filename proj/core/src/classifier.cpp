#include "gnnpf/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "gnnpf/error.hpp"

namespace gnnpf {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Plain Adam over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + 1e-8);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

// Trains a logistic head (weights..., bias) on fixed inputs.
void train_head(std::vector<double>& weights, double& bias, const std::vector<std::vector<double>>& inputs,
                const std::vector<bool>& labels, std::size_t iterations, double lr, double l2) {
  const std::size_t d = weights.size();
  std::vector<double> params(weights);
  params.push_back(bias);
  std::vector<double> grad(d + 1);
  Adam opt(d + 1, lr);
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      double z = params[d];
      for (std::size_t k = 0; k < d; ++k) z += params[k] * inputs[s][k];
      const double err = sigmoid(z) - (labels[s] ? 1.0 : 0.0);
      for (std::size_t k = 0; k < d; ++k) grad[k] += err * inputs[s][k];
      grad[d] += err;
    }
    for (std::size_t k = 0; k < d; ++k) grad[k] = grad[k] * inv_n + l2 * params[k];
    grad[d] *= inv_n;
    opt.step(params, grad);
  }
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d), weights.begin());
  bias = params[d];
}

FeatureVector normalize(const Classifier& c, const FeatureVector& x) {
  FeatureVector z{};
  for (std::size_t k = 0; k < kFeatureCount; ++k) z[k] = (x[k] - c.mean[k]) / c.scale[k];
  return z;
}

void train_mlp(Classifier& c, const std::vector<FeatureVector>& inputs, const std::vector<bool>& labels,
               std::size_t iterations, double lr, double l2) {
  const std::size_t h = c.hidden;
  const std::size_t d = kFeatureCount;
  // Layout: W1 (h*d) | b1 (h) | w2 (h) | b2
  std::vector<double> params;
  params.insert(params.end(), c.hidden_weights.begin(), c.hidden_weights.end());
  params.insert(params.end(), c.hidden_bias.begin(), c.hidden_bias.end());
  params.insert(params.end(), c.out_weights.begin(), c.out_weights.end());
  params.push_back(c.out_bias);
  const std::size_t b1 = h * d;
  const std::size_t w2 = b1 + h;
  const std::size_t b2 = w2 + h;
  std::vector<double> grad(params.size());
  std::vector<double> act(h);
  Adam opt(params.size(), lr);
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      const auto& x = inputs[s];
      double z = params[b2];
      for (std::size_t j = 0; j < h; ++j) {
        double a = params[b1 + j];
        for (std::size_t k = 0; k < d; ++k) a += params[j * d + k] * x[k];
        act[j] = std::tanh(a);
        z += params[w2 + j] * act[j];
      }
      const double err = sigmoid(z) - (labels[s] ? 1.0 : 0.0);
      grad[b2] += err;
      for (std::size_t j = 0; j < h; ++j) {
        grad[w2 + j] += err * act[j];
        const double back = err * params[w2 + j] * (1.0 - act[j] * act[j]);
        grad[b1 + j] += back;
        for (std::size_t k = 0; k < d; ++k) grad[j * d + k] += back * x[k];
      }
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] *= inv_n;
      const bool is_weight = i < b1 || (i >= w2 && i < b2);
      if (is_weight) grad[i] += l2 * params[i];
    }
    opt.step(params, grad);
  }
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(b1), c.hidden_weights.begin());
  std::copy(params.begin() + static_cast<std::ptrdiff_t>(b1), params.begin() + static_cast<std::ptrdiff_t>(w2),
            c.hidden_bias.begin());
  std::copy(params.begin() + static_cast<std::ptrdiff_t>(w2), params.begin() + static_cast<std::ptrdiff_t>(b2),
            c.out_weights.begin());
  c.out_bias = params[b2];
}

}  // namespace

void to_json(nlohmann::json& j, const LabeledSample& s) {
  j = {{"features", s.features},
       {"label", s.good ? "good" : "bad"},
       {"trainer", s.trainer},
       {"pre_minibatch", s.pre_minibatch},
       {"post_minibatch", s.post_minibatch}};
}

void from_json(const nlohmann::json& j, LabeledSample& s) {
  j.at("features").get_to(s.features);
  s.good = j.at("label").get<std::string>() == "good";
  s.trainer = j.value("trainer", 0U);
  s.pre_minibatch = j.value("pre_minibatch", std::uint64_t{0});
  s.post_minibatch = j.value("post_minibatch", std::uint64_t{0});
}

LabeledSample label_sample(const RuntimeMetrics& pre, const RuntimeMetrics& post) {
  if (!(pre.minibatch_index < post.minibatch_index)) {
    throw std::invalid_argument("label_sample: pre snapshot must precede post snapshot");
  }
  LabeledSample s;
  s.features = pre.features();
  s.good = hits_minus_comm(pre, post) > 0.0;
  s.trainer = pre.trainer;
  s.pre_minibatch = pre.minibatch_index;
  s.post_minibatch = post.minibatch_index;
  return s;
}

std::string_view to_string(ClassifierKind k) noexcept { return k == ClassifierKind::Logistic ? "logistic" : "small-mlp"; }

ClassifierKind parse_classifier_kind(std::string_view name) {
  if (name == "logistic") return ClassifierKind::Logistic;
  if (name == "small-mlp" || name == "mlp") return ClassifierKind::SmallMlp;
  throw std::invalid_argument("unknown classifier kind '" + std::string(name) + "' (expected logistic or small-mlp)");
}

std::vector<double> Classifier::head_inputs(const FeatureVector& x) const {
  const FeatureVector z = normalize(*this, x);
  if (kind == ClassifierKind::Logistic) return {z.begin(), z.end()};
  std::vector<double> act(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    double a = hidden_bias[j];
    for (std::size_t k = 0; k < kFeatureCount; ++k) a += hidden_weights[j * kFeatureCount + k] * z[k];
    act[j] = std::tanh(a);
  }
  return act;
}

double Classifier::predict_proba(const FeatureVector& x) const {
  const auto in = head_inputs(x);
  double z = out_bias;
  for (std::size_t k = 0; k < in.size(); ++k) z += out_weights[k] * in[k];
  return sigmoid(z);
}

std::uint64_t Classifier::hidden_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::vector<double>& v) {
    for (double x : v) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &x, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    }
  };
  feed(hidden_weights);
  feed(hidden_bias);
  return h;
}

nlohmann::json Classifier::to_json() const {
  return {{"kind", gnnpf::to_string(kind)},
          {"mean", mean},
          {"scale", scale},
          {"hidden", hidden},
          {"hidden_weights", hidden_weights},
          {"hidden_bias", hidden_bias},
          {"out_weights", out_weights},
          {"out_bias", out_bias}};
}

Classifier Classifier::from_json(const nlohmann::json& j) {
  Classifier c;
  c.kind = parse_classifier_kind(j.at("kind").get<std::string>());
  j.at("mean").get_to(c.mean);
  j.at("scale").get_to(c.scale);
  j.at("hidden").get_to(c.hidden);
  j.at("hidden_weights").get_to(c.hidden_weights);
  j.at("hidden_bias").get_to(c.hidden_bias);
  j.at("out_weights").get_to(c.out_weights);
  j.at("out_bias").get_to(c.out_bias);
  const std::size_t head = c.kind == ClassifierKind::Logistic ? kFeatureCount : c.hidden;
  if (c.out_weights.size() != head || c.hidden_weights.size() != c.hidden * kFeatureCount ||
      c.hidden_bias.size() != c.hidden) {
    throw std::invalid_argument("classifier model has inconsistent parameter shapes");
  }
  return c;
}

FitResult fit_classifier(std::span<const LabeledSample> samples, ClassifierKind kind, Seed seed,
                         const FitOptions& options) {
  if (samples.size() < 2) throw DegenerateDataError("fit_classifier: need at least two samples");
  const auto goods = std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.good; });
  if (goods == 0 || goods == static_cast<std::ptrdiff_t>(samples.size())) {
    throw DegenerateDataError("fit_classifier: samples carry a single label class");
  }

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(seed, 1));
  split_rng.shuffle(order);
  auto held = static_cast<std::size_t>(std::floor(options.heldout_fraction * static_cast<double>(samples.size())));
  held = std::clamp<std::size_t>(held, 1, samples.size() - 1);
  const std::size_t train_n = samples.size() - held;

  Classifier c;
  c.kind = kind;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < train_n; ++i) sum += samples[order[i]].features[k];
    const double mean = sum / static_cast<double>(train_n);
    double var = 0.0;
    for (std::size_t i = 0; i < train_n; ++i) {
      const double dlt = samples[order[i]].features[k] - mean;
      var += dlt * dlt;
    }
    const double sd = std::sqrt(var / static_cast<double>(train_n));
    c.mean[k] = mean;
    c.scale[k] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<bool> labels(train_n);
  for (std::size_t i = 0; i < train_n; ++i) labels[i] = samples[order[i]].good;

  Rng init(derive_seed(seed, 2));
  if (kind == ClassifierKind::Logistic) {
    c.out_weights.assign(kFeatureCount, 0.0);
    std::vector<std::vector<double>> inputs(train_n);
    for (std::size_t i = 0; i < train_n; ++i) inputs[i] = c.head_inputs(samples[order[i]].features);
    train_head(c.out_weights, c.out_bias, inputs, labels, options.iterations ? options.iterations : 500,
               options.learning_rate > 0 ? options.learning_rate : 0.1, options.l2);
  } else {
    c.hidden = std::max<std::size_t>(1, options.hidden_units);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(kFeatureCount));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(c.hidden));
    c.hidden_weights.resize(c.hidden * kFeatureCount);
    for (auto& w : c.hidden_weights) w = (2.0 * init.uniform() - 1.0) * a1;
    c.hidden_bias.assign(c.hidden, 0.0);
    c.out_weights.resize(c.hidden);
    for (auto& w : c.out_weights) w = (2.0 * init.uniform() - 1.0) * a2;
    std::vector<FeatureVector> inputs(train_n);
    for (std::size_t i = 0; i < train_n; ++i) inputs[i] = normalize(c, samples[order[i]].features);
    train_mlp(c, inputs, labels, options.iterations ? options.iterations : 1500,
              options.learning_rate > 0 ? options.learning_rate : 0.01, options.l2);
  }

  FitResult result;
  result.model = std::move(c);
  std::size_t correct = 0;
  for (std::size_t i = train_n; i < samples.size(); ++i) {
    const auto& s = samples[order[i]];
    result.heldout.push_back(s);
    if (result.model.predict(s.features) == s.good) ++correct;
  }
  result.heldout_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(held);
  return result;
}

Classifier finetune_classifier(const Classifier& model, std::span<const LabeledSample> buffered,
                               const FinetuneOptions& options) {
  Classifier out = model;
  if (buffered.empty()) return out;
  std::vector<std::vector<double>> inputs;
  std::vector<bool> labels;
  inputs.reserve(buffered.size());
  for (const auto& s : buffered) {
    inputs.push_back(model.head_inputs(s.features));
    labels.push_back(s.good);
  }
  train_head(out.out_weights, out.out_bias, inputs, labels, options.iterations, options.learning_rate, options.l2);
  return out;
}

}  // namespace gnnpf
