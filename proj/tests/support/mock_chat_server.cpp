#include "mock_chat_server.hpp"

#include <mutex>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace gnnpf::testing {

struct MockChatServer::Impl {
  Options options;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  mutable std::mutex mu;
  std::vector<std::string> bodies;
  std::size_t next = 0;
};

MockChatServer::MockChatServer(Options options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  Impl* impl = impl_.get();
  impl->server.Post(impl->options.path, [impl](const httplib::Request& req, httplib::Response& res) {
    std::string reply;
    {
      std::lock_guard lock(impl->mu);
      impl->bodies.push_back(req.body);
      if (!impl->options.replies.empty()) {
        reply = impl->options.replies[impl->next % impl->options.replies.size()];
        ++impl->next;
      }
    }
    if (impl->options.delay.count() > 0) std::this_thread::sleep_for(impl->options.delay);
    res.status = impl->options.status;
    if (!impl->options.raw_body.empty()) {
      res.set_content(impl->options.raw_body, "application/json");
      return;
    }
    nlohmann::json body = {{"model", "mock"}, {"message", {{"role", "assistant"}, {"content", reply}}}, {"done", true}};
    res.set_content(body.dump(), "application/json");
  });
  impl->port = impl->server.bind_to_any_port("127.0.0.1");
  if (impl->port <= 0) throw std::runtime_error("mock chat server: bind failed");
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

MockChatServer::~MockChatServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int MockChatServer::port() const noexcept { return impl_->port; }

std::string MockChatServer::url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port) + impl_->options.path;
}

std::size_t MockChatServer::requests() const {
  std::lock_guard lock(impl_->mu);
  return impl_->bodies.size();
}

std::vector<std::string> MockChatServer::bodies() const {
  std::lock_guard lock(impl_->mu);
  return impl_->bodies;
}

}  // namespace gnnpf::testing
