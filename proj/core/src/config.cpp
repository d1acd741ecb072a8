#include "gnnpf/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "gnnpf/error.hpp"

namespace gnnpf {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
  const std::set<std::string> names(known.begin(), known.end());
  for (const auto& [key, _] : obj.items()) {
    if (!names.contains(key)) throw ConfigError(prefix + key, "unknown key");
  }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& prefix, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, Seed>) {
      if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<long long>() >= 0)) {
        throw ConfigError(prefix + key, "expected a non-negative integer");
      }
    }
    out = it->template get<T>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(prefix + key, "wrong type");
  }
}

std::string read_string(const json& obj, const char* key, const std::string& prefix, std::string fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) throw ConfigError(prefix + key, "expected a string");
  return it->get<std::string>();
}

const json& object_at(const json& doc, const char* key) {
  static const json empty = json::object();
  const auto it = doc.find(key);
  if (it == doc.end()) return empty;
  if (!it->is_object()) throw ConfigError(key, "expected an object");
  return *it;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("(root)", "config must be a JSON object");
  reject_unknown(doc, "", {"graph", "P", "partition_strategy", "train_fraction", "buffer_pct", "fanouts", "batch_size",
                           "epochs", "mode", "controller", "clock", "seed", "output_dir", "deadband",
                           "max_trace_events"});
  RunConfig cfg;
  read(doc, "seed", "", cfg.seed);
  cfg.graph.seed = cfg.seed;

  if (!doc.contains("graph")) throw ConfigError("graph", "required");
  const json& g = object_at(doc, "graph");
  reject_unknown(g, "graph.", {"path", "partition_path", "nodes", "avg_degree", "skew", "seed"});
  cfg.graph.path = read_string(g, "path", "graph.", "");
  cfg.graph.partition_path = read_string(g, "partition_path", "graph.", "");
  read(g, "nodes", "graph.", cfg.graph.nodes);
  read(g, "avg_degree", "graph.", cfg.graph.avg_degree);
  read(g, "skew", "graph.", cfg.graph.skew);
  read(g, "seed", "graph.", cfg.graph.seed);

  read(doc, "P", "", cfg.partitions);
  if (doc.contains("partition_strategy")) {
    try {
      cfg.partition_strategy = parse_partition_strategy(read_string(doc, "partition_strategy", "", ""));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("partition_strategy", e.what());
    }
  }
  read(doc, "train_fraction", "", cfg.train_fraction);
  read(doc, "buffer_pct", "", cfg.buffer_pct);
  read(doc, "fanouts", "", cfg.fanouts);
  read(doc, "batch_size", "", cfg.batch_size);
  read(doc, "epochs", "", cfg.epochs);
  if (doc.contains("mode")) {
    try {
      cfg.mode = parse_mode(read_string(doc, "mode", "", ""));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("mode", e.what());
    }
  }

  const json& c = object_at(doc, "controller");
  reject_unknown(c, "controller.", {"kind", "model_path", "finetune_every", "endpoint_url", "fixture", "model",
                                    "timeout", "cot", "max_prompt_chars", "window", "min_gain"});
  if (c.contains("kind")) {
    try {
      cfg.controller.kind = parse_controller_kind(read_string(c, "kind", "controller.", ""));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("controller.kind", e.what());
    }
  }
  cfg.controller.model_path = read_string(c, "model_path", "controller.", "");
  read(c, "finetune_every", "controller.", cfg.controller.finetune_every);
  cfg.controller.endpoint_url = read_string(c, "endpoint_url", "controller.", "");
  cfg.controller.fixture = read_string(c, "fixture", "controller.", "");
  cfg.controller.model = read_string(c, "model", "controller.", cfg.controller.model);
  read(c, "timeout", "controller.", cfg.controller.timeout);
  read(c, "cot", "controller.", cfg.controller.chain_of_thought);
  read(c, "max_prompt_chars", "controller.", cfg.controller.max_prompt_chars);
  read(c, "window", "controller.", cfg.controller.window);
  read(c, "min_gain", "controller.", cfg.controller.min_gain);

  const json& k = object_at(doc, "clock");
  reject_unknown(k, "clock.", {"alpha", "beta", "gamma", "t_infer"});
  read(k, "alpha", "clock.", cfg.clock.alpha);
  read(k, "beta", "clock.", cfg.clock.beta);
  read(k, "gamma", "clock.", cfg.clock.gamma);
  read(k, "t_infer", "clock.", cfg.clock.t_infer);

  cfg.output_dir = read_string(doc, "output_dir", "", cfg.output_dir);
  read(doc, "deadband", "", cfg.deadband);
  read(doc, "max_trace_events", "", cfg.max_trace_events);

  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot read " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("(file)", "malformed JSON in " + path.string());
  return parse_config(doc);
}

void validate_config(const RunConfig& cfg) {
  if (cfg.graph.path.empty()) {
    if (cfg.graph.nodes < 2) throw ConfigError("graph.nodes", "must be >= 2");
    if (cfg.graph.avg_degree < 1) throw ConfigError("graph.avg_degree", "must be >= 1");
    if (!(cfg.graph.skew > 1.0)) throw ConfigError("graph.skew", "must be > 1");
  }
  if (cfg.partitions < 1) throw ConfigError("P", "must be >= 1");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) {
    throw ConfigError("train_fraction", "must be in (0, 1]");
  }
  if (!(cfg.buffer_pct > 0.0 && cfg.buffer_pct <= 100.0)) throw ConfigError("buffer_pct", "must be in (0, 100]");
  if (cfg.fanouts.empty()) throw ConfigError("fanouts", "must list at least one hop");
  for (auto f : cfg.fanouts) {
    if (f < 1) throw ConfigError("fanouts", "every fanout must be >= 1");
  }
  if (cfg.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("epochs", "must be >= 1");
  try {
    cfg.clock.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    throw ConfigError("clock." + what.substr(0, what.find(' ')), e.what());
  }
  if (!(cfg.deadband >= 0.0)) throw ConfigError("deadband", "must be >= 0");
  if (cfg.max_trace_events < 1) throw ConfigError("max_trace_events", "must be >= 1");
  const auto& c = cfg.controller;
  if (!(c.timeout > 0.0)) throw ConfigError("controller.timeout", "must be > 0");
  if (c.kind == ControllerKind::Classifier && c.model_path.empty()) {
    throw ConfigError("controller.model_path", "classifier controller needs a model file");
  }
  if (c.kind == ControllerKind::Agent) {
    if (c.endpoint_url.empty() && c.fixture.empty()) {
      throw ConfigError("controller.endpoint_url", "agent controller needs an endpoint_url or a fixture");
    }
    if (c.max_prompt_chars < 256) throw ConfigError("controller.max_prompt_chars", "must be >= 256");
  }
  if (c.kind == ControllerKind::Selective && c.window < 2) throw ConfigError("controller.window", "must be >= 2");
}

std::vector<std::string> config_warnings(const RunConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.mode == Mode::Sync && cfg.controller.kind == ControllerKind::Never) {
    out.emplace_back("sync mode with the never controller only adds decision waits");
  }
  if (cfg.controller.kind == ControllerKind::Never) {
    out.emplace_back("buffer stays empty under the never controller");
  }
  if (cfg.partitions == 1) out.emplace_back("a single partition has no remote nodes");
  return out;
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* url = std::getenv("GNNPF_ENDPOINT_URL"); url && *url) cfg.controller.endpoint_url = url;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  const auto& c = cfg.controller;
  json g = {{"nodes", cfg.graph.nodes}, {"avg_degree", cfg.graph.avg_degree}, {"skew", cfg.graph.skew},
            {"seed", cfg.graph.seed}};
  if (!cfg.graph.path.empty()) g["path"] = cfg.graph.path;
  if (!cfg.graph.partition_path.empty()) g["partition_path"] = cfg.graph.partition_path;
  return {{"graph", g},
          {"P", cfg.partitions},
          {"partition_strategy", to_string(cfg.partition_strategy)},
          {"train_fraction", cfg.train_fraction},
          {"buffer_pct", cfg.buffer_pct},
          {"fanouts", cfg.fanouts},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"mode", to_string(cfg.mode)},
          {"controller",
           {{"kind", to_string(c.kind)},
            {"model_path", c.model_path},
            {"finetune_every", c.finetune_every},
            {"endpoint_url", c.endpoint_url},
            {"fixture", c.fixture},
            {"model", c.model},
            {"timeout", c.timeout},
            {"cot", c.chain_of_thought},
            {"max_prompt_chars", c.max_prompt_chars},
            {"window", c.window},
            {"min_gain", c.min_gain}}},
          {"clock",
           {{"alpha", cfg.clock.alpha}, {"beta", cfg.clock.beta}, {"gamma", cfg.clock.gamma},
            {"t_infer", cfg.clock.t_infer}}},
          {"seed", cfg.seed},
          {"output_dir", cfg.output_dir},
          {"deadband", cfg.deadband},
          {"max_trace_events", cfg.max_trace_events}};
}

std::string config_hash(const RunConfig& cfg) {
  json j = config_to_json(cfg);
  // Where results land does not change them.
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gnnpf
