#include "gnnpf/metrics.hpp"

#include <stdexcept>

namespace gnnpf {

FeatureVector RuntimeMetrics::features() const {
  return {pct_hits,
          static_cast<double>(comm_volume),
          nodes_replaced_pct,
          static_cast<double>(minibatch_index),
          static_cast<double>(minibatches_remaining),
          static_cast<double>(epochs_remaining),
          static_cast<double>(graph.partition_nodes),
          static_cast<double>(graph.partition_edges)};
}

void to_json(nlohmann::json& j, const GraphStatic& g) {
  j = {{"num_nodes", g.num_nodes},
       {"num_edges", g.num_edges},
       {"partition_nodes", g.partition_nodes},
       {"partition_edges", g.partition_edges}};
}

void from_json(const nlohmann::json& j, GraphStatic& g) {
  j.at("num_nodes").get_to(g.num_nodes);
  j.at("num_edges").get_to(g.num_edges);
  j.at("partition_nodes").get_to(g.partition_nodes);
  j.at("partition_edges").get_to(g.partition_edges);
}

void to_json(nlohmann::json& j, const RuntimeMetrics& m) {
  j = {{"trainer", m.trainer},
       {"pct_hits", m.pct_hits},
       {"no_sample", m.no_sample},
       {"sampled_remote", m.sampled_remote},
       {"comm_volume", m.comm_volume},
       {"comm_time", m.comm_time},
       {"nodes_replaced_pct", m.nodes_replaced_pct},
       {"minibatch_index", m.minibatch_index},
       {"epoch", m.epoch},
       {"minibatches_remaining", m.minibatches_remaining},
       {"epochs_remaining", m.epochs_remaining},
       {"graph", m.graph}};
}

void from_json(const nlohmann::json& j, RuntimeMetrics& m) {
  j.at("trainer").get_to(m.trainer);
  j.at("pct_hits").get_to(m.pct_hits);
  j.at("no_sample").get_to(m.no_sample);
  j.at("sampled_remote").get_to(m.sampled_remote);
  j.at("comm_volume").get_to(m.comm_volume);
  j.at("comm_time").get_to(m.comm_time);
  j.at("nodes_replaced_pct").get_to(m.nodes_replaced_pct);
  j.at("minibatch_index").get_to(m.minibatch_index);
  j.at("epoch").get_to(m.epoch);
  j.at("minibatches_remaining").get_to(m.minibatches_remaining);
  j.at("epochs_remaining").get_to(m.epochs_remaining);
  j.at("graph").get_to(m.graph);
}

double percent_change(double before, double after) noexcept {
  if (before == 0.0) return after == 0.0 ? 0.0 : 100.0;
  return 100.0 * (after - before) / before;
}

double hits_minus_comm(const RuntimeMetrics& pre, const RuntimeMetrics& post) noexcept {
  return (post.pct_hits - pre.pct_hits) - percent_change(pre.comm_time, post.comm_time);
}

std::string_view to_string(Action a) noexcept { return a == Action::Replace ? "replace" : "skip"; }

std::string_view to_string(Expectation e) noexcept {
  switch (e) {
    case Expectation::Up:
      return "hits_up";
    case Expectation::Down:
      return "hits_down";
    case Expectation::Flat:
      return "hits_flat";
    case Expectation::None:
      break;
  }
  return "none";
}

Expectation parse_expectation(std::string_view s) {
  if (s == "hits_up") return Expectation::Up;
  if (s == "hits_down") return Expectation::Down;
  if (s == "hits_flat") return Expectation::Flat;
  if (s == "none") return Expectation::None;
  throw std::invalid_argument("unknown expectation '" + std::string(s) + "'");
}

Decision Decision::invalid(std::string raw, std::string error, std::uint64_t source) {
  Decision d;
  d.action = Action::Skip;
  d.expected = Expectation::None;
  d.raw_response = std::move(raw);
  d.valid = false;
  d.error = std::move(error);
  d.source_minibatch = source;
  return d;
}

void to_json(nlohmann::json& j, const Decision& d) {
  j = {{"action", to_string(d.action)},
       {"expect", to_string(d.expected)},
       {"raw", d.raw_response},
       {"valid", d.valid},
       {"timed_out", d.timed_out},
       {"error", d.error},
       {"source_minibatch", d.source_minibatch}};
}

void from_json(const nlohmann::json& j, Decision& d) {
  d.action = j.at("action").get<std::string>() == "replace" ? Action::Replace : Action::Skip;
  d.expected = parse_expectation(j.at("expect").get<std::string>());
  j.at("raw").get_to(d.raw_response);
  j.at("valid").get_to(d.valid);
  j.at("timed_out").get_to(d.timed_out);
  j.at("error").get_to(d.error);
  j.at("source_minibatch").get_to(d.source_minibatch);
}

void to_json(nlohmann::json& j, const DecisionRecord& r) {
  j = {{"trainer", r.trainer},
       {"pre", r.pre},
       {"decision", r.decision},
       {"consumed_minibatch", r.consumed_minibatch},
       {"replacement_skipped", r.replacement_skipped}};
  j["post"] = r.post ? nlohmann::json(*r.post) : nlohmann::json(nullptr);
  j["effectiveness"] = r.effectiveness ? nlohmann::json(*r.effectiveness) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, DecisionRecord& r) {
  j.at("trainer").get_to(r.trainer);
  j.at("pre").get_to(r.pre);
  j.at("decision").get_to(r.decision);
  j.at("consumed_minibatch").get_to(r.consumed_minibatch);
  j.at("replacement_skipped").get_to(r.replacement_skipped);
  if (!j.at("post").is_null()) r.post = j.at("post").get<RuntimeMetrics>();
  if (!j.at("effectiveness").is_null()) r.effectiveness = j.at("effectiveness").get<double>();
}

}  // namespace gnnpf
