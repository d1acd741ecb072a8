#include "gnnpf/controller.hpp"

#include <chrono>
#include <fstream>
#include <stdexcept>

namespace gnnpf {

std::string_view to_string(ControllerKind k) noexcept {
  switch (k) {
    case ControllerKind::Never: return "never";
    case ControllerKind::Fixed: return "fixed";
    case ControllerKind::Once: return "once";
    case ControllerKind::Selective: return "selective";
    case ControllerKind::Classifier: return "classifier";
    case ControllerKind::Agent: return "agent";
  }
  return "unknown";
}

ControllerKind parse_controller_kind(std::string_view name) {
  for (auto k : {ControllerKind::Never, ControllerKind::Fixed, ControllerKind::Once, ControllerKind::Selective,
                 ControllerKind::Classifier, ControllerKind::Agent}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown controller kind '" + std::string(name) +
                              "' (valid: never, fixed, once, selective, classifier, agent)");
}

Decision Controller::decide(const RuntimeMetrics& m) {
  Decision d;
  try {
    d = decide_impl(m);
  } catch (const std::exception& e) {
    d = Decision::invalid("", std::string("controller failure: ") + e.what());
  } catch (...) {
    d = Decision::invalid("", "controller failure");
  }
  if (!d.valid) d.action = Action::Skip;
  d.source_minibatch = m.minibatch_index;
  return d;
}

Decision NeverController::decide_impl(const RuntimeMetrics&) { return Decision{}; }

Decision FixedController::decide_impl(const RuntimeMetrics&) {
  Decision d;
  d.action = Action::Replace;
  return d;
}

Decision OnceController::decide_impl(const RuntimeMetrics&) {
  Decision d;
  if (!fired_) {
    fired_ = true;
    d.action = Action::Replace;
    d.expected = Expectation::Up;
  } else {
    d.expected = Expectation::Flat;
  }
  return d;
}

SelectiveController::SelectiveController(std::size_t window, double min_gain)
    : window_(std::max<std::size_t>(2, window)), min_gain_(min_gain) {}

Decision SelectiveController::decide_impl(const RuntimeMetrics& m) {
  hits_.push_back(m.pct_hits);
  while (hits_.size() > window_) hits_.pop_front();
  Decision d;
  d.expected = Expectation::Flat;
  if (hits_.size() == window_ && hits_.back() - hits_.front() < min_gain_) {
    d.action = Action::Replace;
    d.expected = Expectation::Up;
    // A refresh restarts the observation window.
    hits_.clear();
  }
  return d;
}

ClassifierController::ClassifierController(Classifier model, std::size_t finetune_every, FinetuneOptions options)
    : model_(std::move(model)), every_(finetune_every), options_(options) {}

Decision ClassifierController::decide_impl(const RuntimeMetrics& m) {
  if (every_ > 0) {
    if (previous_ && previous_->minibatch_index < m.minibatch_index) {
      buffered_.push_back(label_sample(*previous_, m));
    }
    previous_ = m;
    const std::uint64_t bucket = m.minibatch_index / every_;
    if (bucket > last_bucket_) {
      last_bucket_ = bucket;
      model_ = finetune_classifier(model_, buffered_, options_);
      buffered_.clear();
      finetune_log_.push_back(m.minibatch_index);
    }
  }
  Decision d;
  d.action = model_.predict(m.features()) ? Action::Replace : Action::Skip;
  return d;
}

AgentController::AgentController(std::unique_ptr<ChatEndpoint> endpoint, PromptStatic info, PromptOptions options,
                                 ContextWindow context)
    : endpoint_(std::move(endpoint)), info_(std::move(info)), options_(options), ctx_(std::move(context)) {
  if (!endpoint_) throw std::invalid_argument("agent controller needs an endpoint");
}

Decision AgentController::decide_impl(const RuntimeMetrics& m) {
  if (DecisionRecord* prev = ctx_.pending()) evaluate_previous(*prev, m);
  const std::string prompt = build_prompt(m, ctx_, info_, options_);
  ctx_.take_note();
  const ChatReply reply = endpoint_->complete({{"user", prompt}});

  Decision d;
  switch (reply.status) {
    case ChatReply::Status::Ok:
      d = parse_response(reply.text);
      if (!d.valid) ctx_.set_note(std::string(kMalformedNote));
      break;
    case ChatReply::Status::Timeout:
      d = Decision::invalid("", "decision timed out: " + reply.error);
      d.timed_out = true;
      ++timeouts_;
      break;
    default:
      d = Decision::invalid("", "endpoint failure: " + reply.error);
      break;
  }
  if (!d.valid) ++invalid_;
  d.source_minibatch = m.minibatch_index;

  DecisionRecord rec;
  rec.trainer = m.trainer;
  rec.pre = m;
  rec.decision = d;
  ctx_.append(std::move(rec));
  return d;
}

std::unique_ptr<Controller> make_controller(const ControllerConfig& cfg, const PromptStatic& info) {
  switch (cfg.kind) {
    case ControllerKind::Never: return std::make_unique<NeverController>();
    case ControllerKind::Fixed: return std::make_unique<FixedController>();
    case ControllerKind::Once: return std::make_unique<OnceController>();
    case ControllerKind::Selective: return std::make_unique<SelectiveController>(cfg.window, cfg.min_gain);
    case ControllerKind::Classifier: {
      std::ifstream in(cfg.model_path);
      if (!in) throw std::runtime_error("cannot read classifier model " + cfg.model_path);
      return std::make_unique<ClassifierController>(Classifier::from_json(nlohmann::json::parse(in)),
                                                    cfg.finetune_every);
    }
    case ControllerKind::Agent: {
      std::unique_ptr<ChatEndpoint> endpoint;
      if (!cfg.fixture.empty()) {
        endpoint = std::make_unique<ScriptedEndpoint>(ScriptedEndpoint::from_file(cfg.fixture));
      } else {
        const auto ms = std::chrono::milliseconds(static_cast<long long>(cfg.timeout * 1000.0));
        endpoint = std::make_unique<HttpChatEndpoint>(cfg.endpoint_url, cfg.model, ms);
      }
      PromptOptions opts;
      opts.max_chars = cfg.max_prompt_chars;
      opts.chain_of_thought = cfg.chain_of_thought;
      return std::make_unique<AgentController>(std::move(endpoint), info, opts);
    }
  }
  throw std::invalid_argument("unknown controller kind");
}

}  // namespace gnnpf
