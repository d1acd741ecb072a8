#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gnnpf/agent.hpp"
#include "gnnpf/chat.hpp"
#include "gnnpf/classifier.hpp"
#include "gnnpf/metrics.hpp"

namespace gnnpf {

/// never/fixed are the baselines; once and selective are scripted
/// references used to check that adaptive timing pays off.
enum class ControllerKind { Never, Fixed, Once, Selective, Classifier, Agent };

std::string_view to_string(ControllerKind k) noexcept;
/// Throws std::invalid_argument listing the valid kinds.
ControllerKind parse_controller_kind(std::string_view name);

/// Decides, once per consumed request, whether the trainer's buffer should
/// be refreshed. One instance per trainer.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControllerKind kind() const noexcept = 0;

  /// Never throws: any failure yields an invalid Skip. source_minibatch is
  /// always m.minibatch_index.
  Decision decide(const RuntimeMetrics& m);

  /// Decisions that cost no simulated inference time.
  virtual bool instantaneous() const noexcept { return false; }

 protected:
  virtual Decision decide_impl(const RuntimeMetrics& m) = 0;
};

class NeverController final : public Controller {
 public:
  ControllerKind kind() const noexcept override { return ControllerKind::Never; }
  bool instantaneous() const noexcept override { return true; }

 protected:
  Decision decide_impl(const RuntimeMetrics& m) override;
};

class FixedController final : public Controller {
 public:
  ControllerKind kind() const noexcept override { return ControllerKind::Fixed; }
  bool instantaneous() const noexcept override { return true; }

 protected:
  Decision decide_impl(const RuntimeMetrics& m) override;
};

/// Replace on the first decision, Skip forever after.
class OnceController final : public Controller {
 public:
  ControllerKind kind() const noexcept override { return ControllerKind::Once; }

 protected:
  Decision decide_impl(const RuntimeMetrics& m) override;

 private:
  bool fired_ = false;
};

/// Replace when %-Hits gained less than `min_gain` points over the last
/// `window` observed requests.
class SelectiveController final : public Controller {
 public:
  explicit SelectiveController(std::size_t window = 5, double min_gain = 1.0);
  ControllerKind kind() const noexcept override { return ControllerKind::Selective; }

 protected:
  Decision decide_impl(const RuntimeMetrics& m) override;

 private:
  std::size_t window_;
  double min_gain_;
  std::deque<double> hits_;
};

/// Stateless prediction; optional head fine-tuning every `finetune_every`
/// minibatches on labels built from consecutive observed requests.
class ClassifierController final : public Controller {
 public:
  explicit ClassifierController(Classifier model, std::size_t finetune_every = 0, FinetuneOptions options = {});
  ControllerKind kind() const noexcept override { return ControllerKind::Classifier; }

  const Classifier& model() const noexcept { return model_; }
  /// Minibatch indices at which fine-tuning ran.
  const std::vector<std::uint64_t>& finetune_log() const noexcept { return finetune_log_; }

 protected:
  Decision decide_impl(const RuntimeMetrics& m) override;

 private:
  Classifier model_;
  std::size_t every_;
  FinetuneOptions options_;
  std::optional<RuntimeMetrics> previous_;
  std::vector<LabeledSample> buffered_;
  std::uint64_t last_bucket_ = 0;
  std::vector<std::uint64_t> finetune_log_;
};

/// Metrics collector -> context builder -> decision maker over a chat
/// endpoint.
class AgentController final : public Controller {
 public:
  AgentController(std::unique_ptr<ChatEndpoint> endpoint, PromptStatic info, PromptOptions options = {},
                  ContextWindow context = ContextWindow{});
  ControllerKind kind() const noexcept override { return ControllerKind::Agent; }

  const ContextWindow& context() const noexcept { return ctx_; }
  ChatEndpoint& endpoint() noexcept { return *endpoint_; }
  std::size_t invalid_count() const noexcept { return invalid_; }
  std::size_t timeout_count() const noexcept { return timeouts_; }

 protected:
  Decision decide_impl(const RuntimeMetrics& m) override;

 private:
  std::unique_ptr<ChatEndpoint> endpoint_;
  PromptStatic info_;
  PromptOptions options_;
  ContextWindow ctx_;
  std::size_t invalid_ = 0;
  std::size_t timeouts_ = 0;
};

inline constexpr std::string_view kMalformedNote =
    "Your previous reply was malformed and was treated as skip. Reply with exactly one JSON object in the "
    "required format.";

struct ControllerConfig {
  ControllerKind kind = ControllerKind::Fixed;
  std::string model_path;  // classifier
  std::size_t finetune_every = 0;
  std::string endpoint_url;  // agent, live
  std::string fixture;       // agent, scripted replies
  std::string model = "qwen2.5:7b";
  double timeout = 30.0;  // simulated units; wall seconds for live endpoints
  bool chain_of_thought = false;
  std::size_t max_prompt_chars = 6000;
  std::size_t window = 5;  // selective
  double min_gain = 1.0;   // selective
};

/// Builds one trainer's controller. Classifier models and fixtures are read
/// from disk on every call.
std::unique_ptr<Controller> make_controller(const ControllerConfig& cfg, const PromptStatic& info);

}  // namespace gnnpf
