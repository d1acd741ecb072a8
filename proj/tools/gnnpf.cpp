// gnnpf: command-line front end for the prefetching simulator.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gnnpf/classifier.hpp"
#include "gnnpf/config.hpp"
#include "gnnpf/error.hpp"
#include "gnnpf/eval.hpp"
#include "gnnpf/graph.hpp"
#include "gnnpf/pipeline.hpp"
#include "gnnpf/trace.hpp"

namespace fs = std::filesystem;
using namespace gnnpf;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;

int fail(int code, const std::string& kind, const std::string& message, const std::string& field = {}) {
  json err = {{"error", kind}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  std::cerr << err.dump() << "\n";
  return code;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct Workload {
  Graph graph;
  PartitionMap partition;
};

Workload load_workload(const RunConfig& cfg) {
  Workload w;
  if (!cfg.graph.path.empty()) {
    w.graph = read_edge_list(cfg.graph.path);
  } else {
    w.graph = generate_graph(cfg.graph.nodes, cfg.graph.avg_degree, cfg.graph.skew, cfg.graph.seed);
  }
  if (!cfg.graph.partition_path.empty()) {
    w.partition = read_partition(cfg.graph.partition_path);
  } else {
    w.partition = partition_graph(w.graph, cfg.partitions, cfg.partition_strategy);
  }
  return w;
}

std::vector<LabeledSample> read_samples(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<LabeledSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line).get<LabeledSample>());
  }
  return out;
}

std::string samples_jsonl(const std::vector<LabeledSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += json(s).dump() + "\n";
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive prefetch simulator for partitioned GNN training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gnnpf 0.1.0");

  // gen-graph
  auto* gen = app.add_subcommand("gen-graph", "Generate a power-law graph edge list");
  GeneratorParams gp{10000, 10, 2.1, 1};
  std::string gen_out;
  gen->add_option("--nodes", gp.nodes, "Node count")->capture_default_str();
  gen->add_option("--avg-degree", gp.avg_degree, "Target mean degree")->capture_default_str();
  gen->add_option("--skew", gp.skew, "Pareto exponent of the degree distribution (> 1)")->capture_default_str();
  gen->add_option("--seed", gp.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Edge-list path")->required();

  // partition
  auto* part = app.add_subcommand("partition", "Partition a graph across trainers");
  std::string part_graph, part_out, part_strategy = "greedy";
  std::size_t part_p = 4;
  part->add_option("--graph", part_graph, "Edge-list path")->required();
  part->add_option("-P,--parts", part_p, "Number of trainers")->capture_default_str();
  part->add_option("--strategy", part_strategy, "hash, range or greedy")->capture_default_str();
  part->add_option("--out", part_out, "Partition file path")->required();

  // run
  auto* run = app.add_subcommand("run", "Run a simulated training job");
  std::string run_config, run_controller, run_out, run_mode;
  std::optional<Seed> run_seed;
  run->add_option("--config", run_config, "Run configuration JSON")->required();
  run->add_option("--controller", run_controller, "Override controller.kind");
  run->add_option("--mode", run_mode, "Override mode (async or sync)");
  run->add_option("--seed", run_seed, "Override the run seed");
  run->add_option("--out", run_out, "Override output_dir");

  // trace-collect
  auto* collect = app.add_subcommand("trace-collect", "Harvest labeled samples in trace-only mode");
  std::string collect_config, collect_out, collect_trace;
  collect->add_option("--config", collect_config, "Run configuration JSON")->required();
  collect->add_option("--out", collect_out, "Samples JSONL path")->required();
  collect->add_option("--trace", collect_trace, "Also export the collection trace here");

  // train-clf
  auto* train = app.add_subcommand("train-clf", "Fit a replacement classifier on labeled samples");
  std::string train_samples, train_out, train_kind = "logistic", train_heldout;
  Seed train_seed = 0;
  std::size_t train_hidden = 16;
  train->add_option("--samples", train_samples, "Samples JSONL")->required();
  train->add_option("--kind", train_kind, "logistic or small-mlp")->capture_default_str();
  train->add_option("--seed", train_seed, "Training seed")->capture_default_str();
  train->add_option("--hidden", train_hidden, "Hidden units (small-mlp)")->capture_default_str();
  train->add_option("--out", train_out, "Model JSON path")->required();
  train->add_option("--heldout-out", train_heldout, "Write the held-out split as JSONL");

  // eval
  auto* ev = app.add_subcommand("eval", "Pass@1, confidence interval and decision statistics of a trace");
  std::string eval_trace, eval_out, eval_model, eval_samples, eval_hash;
  double eval_eps = 0.5;
  ev->add_option("--trace", eval_trace, "Trace JSONL")->required();
  ev->add_option("--epsilon", eval_eps, "Dead-band for flat %-Hits changes (points)")->capture_default_str();
  ev->add_option("--expect-hash", eval_hash, "Warn when the trace's config hash differs");
  ev->add_option("--model", eval_model, "Classifier model for an accuracy report");
  ev->add_option("--samples", eval_samples, "Held-out samples for --model");
  ev->add_option("--out", eval_out, "Write the report here instead of stdout");

  // compare
  auto* cmp = app.add_subcommand("compare", "Tabulate several runs as CSV");
  std::string cmp_runs, cmp_out;
  cmp->add_option("--runs", cmp_runs, "Comma-separated run directories or report.json files")->required();
  cmp->add_option("--out", cmp_out, "CSV path (stdout when omitted)");

  // cost-model
  auto* cost = app.add_subcommand("cost-model", "Bootstrapping cost of supervised vs in-context controllers");
  CostInputs ci;
  cost->add_option("--samples,-S", ci.samples, "Offline sample count")->required();
  cost->add_option("--minibatches,-M", ci.minibatches, "Minibatches per epoch")->required();
  cost->add_option("--epochs,-e", ci.epochs, "Epochs")->required();
  cost->add_option("--t-sampling", ci.t_sampling, "Cost per offline sample")->capture_default_str();
  cost->add_option("--t-train-theta", ci.t_train_theta, "Offline training cost per sample")->capture_default_str();
  cost->add_option("--t-train-psi", ci.t_train_psi, "Online training cost per minibatch")->capture_default_str();
  cost->add_option("--t-test-theta", ci.t_test_theta, "Online inference cost per minibatch")->capture_default_str();

  // trace-validate
  auto* validate = app.add_subcommand("trace-validate", "Check a trace file against its schema and invariants");
  std::string val_trace, val_report;
  validate->add_option("--trace", val_trace, "Trace JSONL")->required();
  validate->add_option("--report", val_report, "report.json to reconcile communication volume against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    return fail(kExitUsage, "usage", e.what());
  }

  try {
    if (*gen) {
      const Graph g = generate_graph(gp);
      write_edge_list(g, gen_out, &gp);
      std::cout << json{{"nodes", g.num_nodes()}, {"edges", g.num_edges() / 2}, {"path", gen_out}}.dump() << "\n";
    } else if (*part) {
      const auto strategy = parse_partition_strategy(part_strategy);
      const Graph g = read_edge_list(part_graph);
      const PartitionMap pm = partition_graph(g, part_p, strategy);
      write_partition(pm, part_out, strategy);
      std::cout << json{{"parts", pm.parts}, {"sizes", pm.sizes()}, {"edge_cut", edge_cut(g, pm)}}.dump() << "\n";
    } else if (*run) {
      const auto json_doc = read_json(run_config);
      json doc = json_doc;
      if (!run_controller.empty()) doc["controller"]["kind"] = run_controller;
      if (!run_mode.empty()) doc["mode"] = run_mode;
      if (run_seed) doc["seed"] = *run_seed;
      RunConfig cfg = parse_config(doc);
      if (!run_out.empty()) cfg.output_dir = run_out;
      apply_env_overrides(cfg);
      for (const auto& w : config_warnings(cfg)) std::cerr << json{{"warning", w}}.dump() << "\n";

      const auto started = iso_now();
      const auto t0 = std::chrono::steady_clock::now();
      const Workload w = load_workload(cfg);
      const RunReport report = run_training(cfg, w.graph, w.partition);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_report(report, cfg.output_dir,
                   {{"started_at", started}, {"finished_at", iso_now()}, {"wall_seconds", wall},
                    {"config", config_to_json(cfg)}});
      std::cout << json{{"output_dir", cfg.output_dir},
                        {"config_hash", report.config_hash},
                        {"steady_pct_hits", report.steady_pct_hits},
                        {"comm_volume", report.comm_volume},
                        {"total_time", report.total_time}}
                       .dump()
                << "\n";
    } else if (*collect) {
      const RunConfig cfg = load_config(collect_config);
      const Workload w = load_workload(cfg);
      const CollectResult res = collect_training_samples(cfg, w.graph, w.partition);
      write_text(collect_out, samples_jsonl(res.samples));
      if (!collect_trace.empty()) export_trace(res.trace, collect_trace);
      std::cout << json{{"samples", res.samples.size()},
                        {"low_signal", res.low_signal},
                        {"t_sampling", res.t_sampling},
                        {"offline_cost", res.offline_cost}}
                       .dump()
                << "\n";
    } else if (*train) {
      const auto samples = read_samples(train_samples);
      FitOptions opts;
      opts.hidden_units = train_hidden;
      const FitResult fit = fit_classifier(samples, parse_classifier_kind(train_kind), train_seed, opts);
      write_text(train_out, fit.model.to_json().dump(2) + "\n");
      if (!train_heldout.empty()) write_text(train_heldout, samples_jsonl(fit.heldout));
      std::cout << json{{"heldout_accuracy", fit.heldout_accuracy}, {"heldout", fit.heldout.size()},
                        {"model", train_out}}
                       .dump()
                << "\n";
    } else if (*ev) {
      const ImportResult imported = import_trace(eval_trace, eval_hash);
      for (const auto& wmsg : imported.warnings) std::cerr << json{{"warning", wmsg}}.dump() << "\n";
      const auto ledger = ledger_from_trace(imported.trace);
      json out = eval_report_json(evaluate_ledger(ledger, eval_eps));
      out["config_hash"] = imported.trace.config_hash();
      if (!eval_model.empty()) {
        if (eval_samples.empty()) throw CLI::ValidationError("--model needs --samples");
        const Classifier model = Classifier::from_json(read_json(eval_model));
        out["classifier_accuracy"] = classifier_accuracy(model, read_samples(eval_samples));
      }
      if (eval_out.empty()) {
        std::cout << out.dump(2) << "\n";
      } else {
        write_text(eval_out, out.dump(2) + "\n");
      }
    } else if (*cmp) {
      std::vector<std::string> names;
      std::vector<json> reports;
      for (const auto& item : split_csv(cmp_runs)) {
        fs::path p(item);
        if (fs::is_directory(p)) p /= "report.json";
        json r = read_json(p);
        r["epoch_time"] = r.value("mean_epoch_time", 0.0);
        r["pct_hits"] = r.value("steady_pct_hits", 0.0);
        names.push_back(r.value("controller", std::string("?")) + ":" + fs::path(item).filename().string());
        reports.push_back(std::move(r));
      }
      const std::string csv = compare_csv(names, reports, {"epoch_time", "pct_hits", "comm_volume", "r_mean"});
      if (cmp_out.empty()) {
        std::cout << csv;
      } else {
        write_text(cmp_out, csv);
      }
    } else if (*cost) {
      std::cout << cost_estimate_json(estimate_costs(ci)).dump(2) << "\n";
    } else if (*validate) {
      const ImportResult imported = import_trace(val_trace);
      const Trace& t = imported.trace;
      json out = {{"events", t.size()}, {"config_hash", t.config_hash()}};
      std::vector<std::string> problems;
      auto add = [&](const char* name, const AuditResult& r) {
        out[name] = r.ok();
        problems.insert(problems.end(), r.violations.begin(), r.violations.end());
      };
      add("no_stale_decisions", audit_no_stale_decisions(t));
      add("single_outstanding", audit_single_outstanding(t));
      std::vector<std::uint64_t> reported = fetch_volume_per_epoch(t);
      if (!val_report.empty()) {
        reported.clear();
        const json rep = read_json(val_report);
        for (const auto& e : rep.at("epochs")) reported.push_back(e.at("comm_volume").get<std::uint64_t>());
      }
      add("comm_conservation", audit_comm_conservation(t, reported));
      const bool replay_ok = derive_metrics(t) == recorded_metrics(t);
      out["metrics_replay"] = replay_ok;
      if (!replay_ok) problems.emplace_back("re-derived metrics differ from recorded ones");
      out["violations"] = problems;
      std::cout << out.dump(2) << "\n";
      if (!problems.empty()) return kExitFailure;
    }
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config", e.what(), e.field());
  } catch (const CLI::ValidationError& e) {
    return fail(kExitUsage, "usage", e.what());
  } catch (const TraceError& e) {
    json err = {{"error", "trace"}, {"message", e.what()}, {"last_good_seq", e.last_good_seq()}};
    std::cerr << err.dump() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    return fail(kExitFailure, "runtime", e.what());
  }
  return 0;
}
