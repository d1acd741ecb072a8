#include "gnnpf/agent.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gnnpf {

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string signed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  return buf;
}

std::string describe(const DecisionRecord& r) {
  std::string line = "- minibatch " + std::to_string(r.decision.source_minibatch) + ": ";
  if (!r.decision.valid) {
    line += "invalid reply, treated as skip";
  } else {
    line += r.decision.action == Action::Replace ? "replace" : "skip";
    line += " (expected ";
    line += to_string(r.decision.expected);
    line += ")";
  }
  if (!r.post) return line + "; outcome pending";
  const RuntimeMetrics& pre = r.pre;
  const RuntimeMetrics& post = *r.post;
  if (r.decision.action == Action::Replace) {
    if (post.nodes_replaced_pct == 0.0) {
      line += "; unsuccessful attempt, no stale entries to evict";
    } else {
      line += "; replaced " + fixed2(post.nodes_replaced_pct) + "% of buffer";
    }
  }
  const double dh = post.pct_hits - pre.pct_hits;
  line += "; %-Hits " + fixed2(pre.pct_hits) + " -> " + fixed2(post.pct_hits) + " (" + signed2(dh) + ")";
  if (std::abs(dh) < 0.5) line += " no measurable change";
  line += "; comm " + std::to_string(pre.comm_volume) + " -> " + std::to_string(post.comm_volume) + " nodes";
  if (r.effectiveness) line += "; effectiveness " + signed2(*r.effectiveness);
  return line;
}

// Returns the end (one past the closing brace) of the object starting at
// `start`, or npos when braces never balance.
std::size_t match_object(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

ContextWindow::ContextWindow(std::size_t max_chars, std::size_t max_records)
    : max_chars_(max_chars), max_records_(std::max<std::size_t>(1, max_records)) {}

DecisionRecord* ContextWindow::pending() {
  if (records_.empty() || records_.back().post) return nullptr;
  return &records_.back();
}

void ContextWindow::append(DecisionRecord record) {
  records_.push_back(std::move(record));
  while (records_.size() > max_records_) records_.pop_front();
}

std::optional<std::string> ContextWindow::take_note() {
  auto n = std::move(note_);
  note_.reset();
  return n;
}

std::string ContextWindow::serialize(std::size_t budget) const {
  if (records_.empty()) return std::string(kNoHistorySentinel).substr(0, budget);
  std::vector<std::string> kept;
  std::size_t used = 0;
  const std::string elided = "- (older decisions elided)";
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    std::string line = describe(*it);
    // Reserve room for the elision marker in case older records remain.
    const std::size_t reserve = (std::next(it) != records_.rend()) ? elided.size() + 1 : 0;
    if (used + line.size() + 1 + reserve > budget) break;
    used += line.size() + 1;
    kept.push_back(std::move(line));
  }
  std::string out;
  if (kept.size() < records_.size() && used + elided.size() + 1 <= budget) out += elided + "\n";
  for (auto it = kept.rbegin(); it != kept.rend(); ++it) out += *it + "\n";
  if (out.size() > budget) out.resize(budget);
  return out;
}

double evaluate_previous(DecisionRecord& rec, const RuntimeMetrics& post) {
  if (rec.post) throw std::logic_error("evaluate_previous: record already evaluated");
  rec.post = post;
  rec.effectiveness = hits_minus_comm(rec.pre, post);
  return *rec.effectiveness;
}

std::string build_prompt(const RuntimeMetrics& m, const ContextWindow& ctx, const PromptStatic& info,
                         const PromptOptions& options) {
  std::string fanouts;
  for (std::size_t i = 0; i < info.fanouts.size(); ++i) {
    if (i) fanouts += ",";
    fanouts += std::to_string(info.fanouts[i]);
  }
  std::string head;
  head += "## Role\n";
  head += "You decide when trainer " + std::to_string(m.trainer) + " (of " + std::to_string(info.trainers) +
          ") refreshes its persistent buffer during distributed GNN training. The buffer holds features of "
          "remote nodes so they need not be fetched over the network. Each entry has a score: +1 when the node "
          "is sampled, x0.95 for every minibatch in which it is not. Entries scoring below 0.95 are stale. A "
          "replacement evicts every stale entry and refills the freed slots with remote nodes sampled in the "
          "latest minibatch; if nothing is stale and the buffer is full it changes nothing.\n\n";
  head += "## Task\nDecide whether to trigger a replacement before the next minibatch and state what you expect "
          "to happen to %-Hits.\n\n";
  head += "## Metric definitions\n";
  head += "- %-Hits: share of the minibatch's sampled remote nodes already in the buffer. Higher is better; this "
          "is the main objective.\n";
  head += "- Communication volume: remote node features fetched for the minibatch. Lower is better.\n";
  head += "- Nodes replaced: entries evicted by the last replacement, as % of buffer capacity. Replacements cost "
          "network transfers.\n";
  head += "- Progress: minibatches and epochs left. A replacement close to the end has little time to pay off.\n\n";
  head += "## Graph and training setup\n";
  head += "- Graph: " + std::to_string(info.graph.num_nodes) + " nodes, " + std::to_string(info.graph.num_edges) +
          " directed edges\n";
  head += "- This partition: " + std::to_string(info.graph.partition_nodes) + " nodes, " +
          std::to_string(info.graph.partition_edges) + " local edges\n";
  head += "- Buffer capacity: " + std::to_string(info.buffer_capacity) + " remote nodes; batch size " +
          std::to_string(info.batch_size) + "; fanouts " + fanouts + "\n\n";
  head += "## Current metrics (minibatch " + std::to_string(m.minibatch_index) + ", epoch " +
          std::to_string(m.epoch) + ")\n";
  head += "- %-Hits: " + fixed2(m.pct_hits) + (m.no_sample ? " (no remote nodes sampled)" : "") + "\n";
  head += "- Communication volume: " + std::to_string(m.comm_volume) + " nodes (fetch cost " +
          fixed2(m.comm_time) + ")\n";
  head += "- Nodes replaced: " + fixed2(m.nodes_replaced_pct) + "%\n";
  head += "- Remote nodes sampled: " + std::to_string(m.sampled_remote) + "\n\n";
  head += "## Decision history (oldest first)\n";

  std::string tail = "\n## Progress\n";
  tail += std::to_string(m.minibatches_remaining) + " minibatches and " + std::to_string(m.epochs_remaining) +
          " further epochs remain. Avoid replacements near completion.\n\n";
  if (const auto& note = ctx.note()) tail += "## Note\n" + *note + "\n\n";
  tail += "## Output format\n";
  if (options.chain_of_thought) {
    tail += "Reason about the metrics step by step in a few sentences, then give exactly one JSON object:\n";
  } else {
    tail += "Reply with exactly one JSON object and no other text:\n";
  }
  tail += "{\"replace\": true|false, \"expect\": \"hits_up\"|\"hits_down\"|\"hits_flat\"}\n";

  const std::size_t fixed_len = head.size() + tail.size();
  const std::size_t budget = options.max_chars > fixed_len ? options.max_chars - fixed_len : 0;
  std::string prompt = head + ctx.serialize(std::min(budget, ctx.max_chars())) + tail;
  if (prompt.size() > options.max_chars) prompt.resize(options.max_chars);
  return prompt;
}

Decision parse_response(std::string_view text) {
  const std::string raw(text);
  nlohmann::json obj;
  bool found = false;
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    const std::size_t end = match_object(text, start);
    if (end == std::string_view::npos) break;
    auto parsed = nlohmann::json::parse(text.substr(start, end - start), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) {
      obj = std::move(parsed);
      found = true;
      break;
    }
  }
  if (!found) return Decision::invalid(raw, "no JSON object in reply");

  const auto replace = obj.find("replace");
  if (replace == obj.end()) return Decision::invalid(raw, "missing field 'replace'");
  if (!replace->is_boolean()) return Decision::invalid(raw, "field 'replace' must be a boolean");
  const auto expect = obj.find("expect");
  if (expect == obj.end()) return Decision::invalid(raw, "missing field 'expect'");
  if (!expect->is_string()) return Decision::invalid(raw, "field 'expect' must be a string");
  const auto value = expect->get<std::string>();
  if (value != "hits_up" && value != "hits_down" && value != "hits_flat") {
    return Decision::invalid(raw, "field 'expect' must be hits_up, hits_down or hits_flat");
  }
  const bool do_replace = replace->get<bool>();
  if (const auto action = obj.find("action"); action != obj.end()) {
    const bool says_replace = action->is_string() && action->get<std::string>() == "replace";
    const bool says_skip = action->is_string() && action->get<std::string>() == "skip";
    if ((!says_replace && !says_skip) || says_replace != do_replace) {
      return Decision::invalid(raw, "contradictory fields 'action' and 'replace'");
    }
  }
  Decision d;
  d.action = do_replace ? Action::Replace : Action::Skip;
  d.expected = parse_expectation(value);
  d.raw_response = raw;
  return d;
}

}  // namespace gnnpf
