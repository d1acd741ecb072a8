#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gnnpf {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatReply {
  enum class Status { Ok, Timeout, Unreachable, BadReply };
  Status status = Status::Ok;
  std::string text;
  std::string error;
};

/// Anything that turns a message list into assistant text.
class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  virtual ChatReply complete(const std::vector<ChatMessage>& messages) = 0;
};

/// {model, messages: [{role, content}], stream: false}
nlohmann::json make_chat_request(const std::string& model, const std::vector<ChatMessage>& messages);

/// Pulls the assistant text out of an Ollama (`message.content`),
/// OpenAI-style (`choices[0].message.content`) or generate-style
/// (`response`) reply body.
std::optional<std::string> extract_reply_text(const nlohmann::json& body);

/// Blocking HTTP client for a chat endpoint such as a local llama.cpp or
/// Ollama server, e.g. "http://127.0.0.1:11434/api/chat".
class HttpChatEndpoint final : public ChatEndpoint {
 public:
  HttpChatEndpoint(std::string url, std::string model, std::chrono::milliseconds timeout);
  ChatReply complete(const std::vector<ChatMessage>& messages) override;

 private:
  std::string base_;
  std::string path_;
  std::string model_;
  std::chrono::milliseconds timeout_;
};

/// Replays canned replies in order; used for offline deterministic runs.
/// Two reply strings are special: "__TIMEOUT__" yields a Timeout status and
/// "__UNREACHABLE__" an Unreachable one.
///
/// Fixture file: {"replies": ["...", ...], "cycle": true}
class ScriptedEndpoint final : public ChatEndpoint {
 public:
  explicit ScriptedEndpoint(std::vector<std::string> replies, bool cycle = true);
  static ScriptedEndpoint from_file(const std::filesystem::path& fixture);

  ChatReply complete(const std::vector<ChatMessage>& messages) override;

  std::size_t calls() const noexcept { return calls_; }
  const std::vector<std::string>& prompts() const noexcept { return prompts_; }

 private:
  std::vector<std::string> replies_;
  bool cycle_;
  std::size_t calls_ = 0;
  std::vector<std::string> prompts_;
};

}  // namespace gnnpf
