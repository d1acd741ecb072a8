#include "gnnpf/chat.hpp"

#include <fstream>
#include <stdexcept>

#include <httplib.h>

namespace gnnpf {

nlohmann::json make_chat_request(const std::string& model, const std::vector<ChatMessage>& messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", model}, {"messages", std::move(msgs)}, {"stream", false}};
}

std::optional<std::string> extract_reply_text(const nlohmann::json& body) {
  if (!body.is_object()) return std::nullopt;
  if (auto it = body.find("message"); it != body.end() && it->is_object()) {
    if (auto c = it->find("content"); c != it->end() && c->is_string()) return c->get<std::string>();
  }
  if (auto it = body.find("choices"); it != body.end() && it->is_array() && !it->empty()) {
    const auto& first = (*it)[0];
    if (first.contains("message") && first["message"].contains("content") && first["message"]["content"].is_string()) {
      return first["message"]["content"].get<std::string>();
    }
    if (first.contains("text") && first["text"].is_string()) return first["text"].get<std::string>();
  }
  if (auto it = body.find("response"); it != body.end() && it->is_string()) return it->get<std::string>();
  return std::nullopt;
}

HttpChatEndpoint::HttpChatEndpoint(std::string url, std::string model, std::chrono::milliseconds timeout)
    : model_(std::move(model)), timeout_(timeout) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_ = url;
    path_ = "/api/chat";
  } else {
    base_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
}

ChatReply HttpChatEndpoint::complete(const std::vector<ChatMessage>& messages) {
  httplib::Client client(base_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const auto res = client.Post(path_, make_chat_request(model_, messages).dump(), "application/json");
  ChatReply reply;
  if (!res) {
    const auto err = res.error();
    reply.status = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                       ? ChatReply::Status::Timeout
                       : ChatReply::Status::Unreachable;
    reply.error = httplib::to_string(err);
    return reply;
  }
  if (res->status != 200) {
    reply.status = ChatReply::Status::BadReply;
    reply.error = "http status " + std::to_string(res->status);
    return reply;
  }
  const auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (auto text = extract_reply_text(body)) {
    reply.text = std::move(*text);
  } else {
    reply.status = ChatReply::Status::BadReply;
    reply.error = "reply carries no assistant text";
  }
  return reply;
}

ScriptedEndpoint::ScriptedEndpoint(std::vector<std::string> replies, bool cycle)
    : replies_(std::move(replies)), cycle_(cycle) {}

ScriptedEndpoint ScriptedEndpoint::from_file(const std::filesystem::path& fixture) {
  std::ifstream in(fixture);
  if (!in) throw std::runtime_error("cannot read chat fixture " + fixture.string());
  const auto doc = nlohmann::json::parse(in);
  return ScriptedEndpoint(doc.at("replies").get<std::vector<std::string>>(), doc.value("cycle", true));
}

ChatReply ScriptedEndpoint::complete(const std::vector<ChatMessage>& messages) {
  prompts_.push_back(messages.empty() ? std::string{} : messages.back().content);
  const std::size_t i = calls_++;
  ChatReply reply;
  if (replies_.empty() || (!cycle_ && i >= replies_.size())) {
    reply.status = ChatReply::Status::Unreachable;
    reply.error = "script exhausted";
    return reply;
  }
  const std::string& text = replies_[i % replies_.size()];
  if (text == "__TIMEOUT__") {
    reply.status = ChatReply::Status::Timeout;
    reply.error = "scripted timeout";
  } else if (text == "__UNREACHABLE__") {
    reply.status = ChatReply::Status::Unreachable;
    reply.error = "scripted unreachable endpoint";
  } else {
    reply.text = text;
  }
  return reply;
}

}  // namespace gnnpf
