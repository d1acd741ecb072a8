#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace gnnpf::testing {

/// Local chat server answering POST <path> with canned replies in an
/// Ollama-shaped body. Replies cycle. Runs on a background thread until
/// destroyed.
class MockChatServer {
 public:
  struct Options {
    std::string path = "/api/chat";
    std::vector<std::string> replies;
    /// Raw body override, e.g. to send invalid JSON.
    std::string raw_body;
    int status = 200;
    std::chrono::milliseconds delay{0};
  };

  explicit MockChatServer(Options options);
  ~MockChatServer();
  MockChatServer(const MockChatServer&) = delete;
  MockChatServer& operator=(const MockChatServer&) = delete;

  int port() const noexcept;
  std::string url() const;
  std::size_t requests() const;
  /// Bodies of every request received, in arrival order.
  std::vector<std::string> bodies() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gnnpf::testing
