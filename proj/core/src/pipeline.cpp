#include "gnnpf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gnnpf/buffer.hpp"
#include "gnnpf/error.hpp"

namespace gnnpf {

std::optional<RuntimeMetrics> Queues::take_newest_request(std::size_t* dropped) {
  if (dropped) *dropped = 0;
  if (requests_.empty()) return std::nullopt;
  RuntimeMetrics newest = requests_.back();
  if (dropped) *dropped = requests_.size() - 1;
  requests_.clear();
  return newest;
}

std::size_t Queues::clear_requests() {
  const std::size_t n = requests_.size();
  requests_.clear();
  return n;
}

void Queues::push_decision(PendingDecision d) {
  if (decision_) throw std::logic_error("response queue already holds a decision");
  decision_ = std::move(d);
}

std::optional<PendingDecision> Queues::poll(double now, Mode mode) {
  if (!decision_) return std::nullopt;
  if (mode == Mode::Async && decision_->ready_time > now) return std::nullopt;
  auto d = std::move(decision_);
  decision_.reset();
  return d;
}

namespace {

struct Trainer {
  PartitionId id = 0;
  std::vector<NodeId> train;
  std::unique_ptr<PersistentBuffer> buffer;
  std::unique_ptr<Controller> controller;
  Queues q;
  GraphStatic graph;
  double clock = 0.0;
  std::uint64_t step = 0;
  std::optional<std::uint64_t> last_consumed;
  std::size_t stalled = 0;
  double nominal_latency = 0.0;
};

struct EpochAccumulator {
  double hits_sum = 0.0;
  std::size_t hits_n = 0;
  double step_sum = 0.0;
  std::size_t steps = 0;
  std::uint64_t comm = 0;
  std::size_t replacements = 0;
  std::size_t decisions = 0;
  std::uint64_t interval_sum = 0;
  std::size_t intervals = 0;
};

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

RunReport run_training(const RunConfig& cfg, const Graph& g, const PartitionMap& pm, const RunHooks& hooks) {
  validate_config(cfg);
  if (pm.parts != cfg.partitions) throw ConfigError("P", "partition map has " + std::to_string(pm.parts) + " parts");
  if (pm.num_nodes() != g.num_nodes()) throw std::invalid_argument("partition map does not match the graph");

  RunReport report;
  report.config_hash = config_hash(cfg);
  report.controller = cfg.controller.kind;
  report.mode = cfg.mode;
  report.trainers = cfg.partitions;
  report.warnings = config_warnings(cfg);

  const ScoringPolicy policy{};
  std::vector<Trainer> trainers(cfg.partitions);
  nlohmann::json graph_meta = nlohmann::json::array();
  for (PartitionId p = 0; p < cfg.partitions; ++p) {
    Trainer& tr = trainers[p];
    tr.id = p;
    tr.train = select_train_nodes(pm, p, cfg.train_fraction, derive_seed(cfg.seed, 11, p));
    const std::size_t halo = halo_size(g, pm, p);
    auto capacity = static_cast<std::size_t>(std::llround(static_cast<double>(halo) * cfg.buffer_pct / 100.0));
    if (capacity == 0 && halo > 0) capacity = 1;
    report.buffer_capacity.push_back(capacity);
    tr.buffer = std::make_unique<PersistentBuffer>(capacity, policy, [&pm, p](NodeId v) { return pm.is_remote(v, p); });
    tr.graph = GraphStatic{g.num_nodes(), g.num_edges(), pm.owned_by(p).size(), partition_edge_count(g, pm, p)};
    PromptStatic info{tr.graph, cfg.partitions, capacity, cfg.batch_size, cfg.fanouts};
    tr.controller = hooks.controller_factory ? hooks.controller_factory(p, info) : make_controller(cfg.controller, info);
    if (!tr.controller) throw std::invalid_argument("controller factory returned null");
    tr.nominal_latency = tr.controller->instantaneous() ? 0.0 : cfg.clock.t_infer;
    graph_meta.push_back(tr.graph);
  }

  nlohmann::json meta = {
      {"trainers", cfg.partitions},
      {"epochs", cfg.epochs},
      {"mode", to_string(cfg.mode)},
      {"controller", to_string(cfg.controller.kind)},
      {"clock",
       {{"alpha", cfg.clock.alpha}, {"beta", cfg.clock.beta}, {"gamma", cfg.clock.gamma},
        {"t_infer", cfg.clock.t_infer}}},
      {"graph", graph_meta},
      {"buffer_capacity", report.buffer_capacity}};
  report.trace = Trace(report.config_hash, meta, cfg.max_trace_events);
  Trace& trace = report.trace;

  const Seed sample_base = derive_seed(cfg.seed, 0x5a17);
  std::vector<EpochAccumulator> acc(cfg.epochs);
  double steady_sum = 0.0;
  std::size_t steady_n = 0;
  double all_hits_sum = 0.0;
  std::size_t all_hits_n = 0;
  double step_sum = 0.0;
  std::size_t step_n = 0;

  auto emit = [&](EventKind kind, const Trainer& tr, std::uint64_t epoch, std::uint64_t mb, double t,
                  nlohmann::json payload) {
    TraceEvent ev;
    ev.kind = kind;
    ev.trainer = tr.id;
    ev.epoch = epoch;
    ev.minibatch = mb;
    ev.sim_time = t;
    ev.payload = std::move(payload);
    return trace.record(std::move(ev));
  };

  // Prefetcher, then the inference task, for one minibatch of one trainer.
  auto run_step = [&](Trainer& tr, std::size_t e, std::size_t i, std::size_t n_batches,
                      const std::vector<NodeId>& seeds) {
    const std::uint64_t k = tr.step++;
    const double now = tr.clock;
    EpochAccumulator& ea = acc[e];

    Rng rng(derive_seed(sample_base, tr.id, e, i));
    const SampleBatch batch = sample_neighbors(g, seeds, cfg.fanouts, rng);
    const LocalRemoteSplit split = split_local_remote(batch, pm, tr.id);
    PersistentBuffer& buf = *tr.buffer;

    std::vector<NodeId> hits;
    for (NodeId v : split.remote) {
      if (buf.contains(v)) hits.push_back(v);
    }
    const HitRate hr = buf.hit_rate(split.remote);
    buf.record_access(hits);
    const std::uint64_t mb_left = n_batches - i - 1;
    const std::uint64_t ep_left = cfg.epochs - e - 1;
    emit(EventKind::Sample, tr, e, k, now,
         {{"seeds", seeds.size()},
          {"nodes", batch.all_nodes.size()},
          {"remote", split.remote.size()},
          {"hits", hr.hits},
          {"minibatches_remaining", mb_left},
          {"epochs_remaining", ep_left}});

    ReplacementOutcome outcome;
    bool replaced = false;
    if (auto pd = tr.q.poll(now, cfg.mode)) {
      const Decision& d = pd->decision;
      emit(EventKind::Decision, tr, e, k, now,
           {{"request_seq", pd->request_seq},
            {"decision", d},
            {"ready_time", pd->ready_time},
            {"latency", pd->latency}});
      ++report.decisions;
      ++ea.decisions;
      if (!d.valid) ++report.invalid_decisions;
      if (tr.last_consumed) {
        const std::uint64_t gap = k - *tr.last_consumed;
        report.replacement_intervals.push_back(gap);
        ea.interval_sum += gap;
        ++ea.intervals;
      }
      tr.last_consumed = k;

      if (d.action == Action::Replace) {
        std::vector<std::size_t> order;
        for (std::size_t j = 0; j < split.remote.size(); ++j) {
          if (!buf.contains(split.remote[j])) order.push_back(j);
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          if (split.remote_multiplicity[a] != split.remote_multiplicity[b]) {
            return split.remote_multiplicity[a] > split.remote_multiplicity[b];
          }
          return split.remote[a] < split.remote[b];
        });
        std::vector<NodeId> incoming;
        incoming.reserve(order.size());
        for (std::size_t j : order) incoming.push_back(split.remote[j]);
        outcome = buf.apply_replacement(incoming);
        replaced = true;
        const std::size_t cleared = tr.q.clear_requests();
        if (!outcome.skipped && (!outcome.evicted.empty() || !outcome.inserted.empty())) {
          ++report.replacements;
          ++ea.replacements;
        }
        emit(EventKind::Replacement, tr, e, k, now,
             {{"evicted", outcome.evicted.size()},
              {"inserted", outcome.inserted.size()},
              {"skipped", outcome.skipped},
              {"replaced_pct", outcome.replaced_pct},
              {"cleared_requests", cleared}});
      }
      // Skip resumes inference too; otherwise a Skip would stall it forever.
      if (!hooks.drop_notifies) tr.q.notify();
    }

    std::uint64_t missed = 0;
    for (NodeId v : split.remote) {
      if (!buf.contains(v)) ++missed;
    }
    const std::uint64_t rep_fetch = outcome.inserted.size();
    const std::uint64_t total = missed + rep_fetch;
    emit(EventKind::Fetch, tr, e, k, now, {{"missed", missed}, {"replacement", rep_fetch}, {"total", total}});

    std::vector<NodeId> accessed = hits;
    accessed.insert(accessed.end(), outcome.inserted.begin(), outcome.inserted.end());
    buf.decay_unaccessed(accessed);

    RuntimeMetrics m;
    m.trainer = tr.id;
    m.pct_hits = hr.pct;
    m.no_sample = hr.no_sample;
    m.sampled_remote = hr.sampled;
    m.comm_volume = total;
    m.comm_time = cfg.clock.comm_time(total);
    m.nodes_replaced_pct = replaced ? outcome.replaced_pct : 0.0;
    m.minibatch_index = k;
    m.epoch = e;
    m.minibatches_remaining = mb_left;
    m.epochs_remaining = ep_left;
    m.graph = tr.graph;
    emit(EventKind::Metrics, tr, e, k, now, m);
    tr.q.push_request(m);

    double issued_latency = 0.0;
    if (!tr.q.paused() && !tr.q.has_decision()) {
      std::size_t dropped = 0;
      const auto req = tr.q.take_newest_request(&dropped);
      const std::uint64_t seq = emit(EventKind::Request, tr, e, k, now,
                                     {{"source_minibatch", req->minibatch_index}, {"dropped", dropped}});
      Decision d = tr.controller->decide(*req);
      issued_latency = tr.controller->instantaneous() ? 0.0 : (d.timed_out ? cfg.controller.timeout : tr.nominal_latency);
      tr.q.push_decision(PendingDecision{std::move(d), now + issued_latency, issued_latency, seq});
      tr.q.pause();
    }
    if (tr.q.paused() && !tr.q.has_decision()) {
      if (++tr.stalled > hooks.stall_guard) {
        throw PipelineStall("trainer " + std::to_string(tr.id) + ": inference paused without a pending decision for " +
                            std::to_string(tr.stalled) + " minibatches (last decision consumed at minibatch " +
                            (tr.last_consumed ? std::to_string(*tr.last_consumed) : std::string("none")) + ")");
      }
    } else {
      tr.stalled = 0;
    }

    const double t_ddp = cfg.clock.ddp_time(batch.all_nodes.size());
    const double t_infer = cfg.mode == Mode::Sync ? issued_latency : tr.nominal_latency;
    const double elapsed = advance_clock(cfg.mode, t_ddp, m.comm_time, t_infer);
    tr.clock += elapsed;

    ea.step_sum += elapsed;
    ++ea.steps;
    step_sum += elapsed;
    ++step_n;
    ea.comm += total;
    if (!m.no_sample) {
      ea.hits_sum += m.pct_hits;
      ++ea.hits_n;
      all_hits_sum += m.pct_hits;
      ++all_hits_n;
      if (e >= 1) {
        steady_sum += m.pct_hits;
        ++steady_n;
      }
    }
  };

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double epoch_start = trainers.empty() ? 0.0 : trainers.front().clock;
    std::vector<std::vector<std::vector<NodeId>>> batches(trainers.size());
    std::size_t max_steps = 0;
    for (auto& tr : trainers) {
      batches[tr.id] = make_minibatches(tr.train, cfg.batch_size, derive_seed(cfg.seed, 21, tr.id, e));
      max_steps = std::max(max_steps, batches[tr.id].size());
    }
    for (std::size_t i = 0; i < max_steps; ++i) {
      std::vector<Trainer*> active;
      for (auto& tr : trainers) {
        if (i < batches[tr.id].size()) {
          run_step(tr, e, i, batches[tr.id].size(), batches[tr.id][i]);
          active.push_back(&tr);
        }
      }
      std::vector<double> clocks;
      for (auto* tr : active) clocks.push_back(tr->clock);
      const double aligned = barrier(clocks);
      for (auto* tr : active) {
        emit(EventKind::Barrier, *tr, e, tr->step - 1, aligned, {{"before", tr->clock}, {"after", aligned}});
        tr->clock = aligned;
      }
    }
    std::vector<double> clocks;
    for (auto& tr : trainers) clocks.push_back(tr.clock);
    const double end = barrier(clocks);
    for (auto& tr : trainers) {
      tr.clock = end;
      nlohmann::json snap = nlohmann::json::array();
      for (const auto& [v, score] : tr.buffer->snapshot()) snap.push_back({v, score});
      emit(EventKind::EpochMark, tr, e, tr.step - 1, end, {{"epoch_time", end - epoch_start}, {"buffer", std::move(snap)}});
    }

    const EpochAccumulator& ea = acc[e];
    EpochStats es;
    es.epoch = e;
    es.epoch_time = end - epoch_start;
    es.mean_step_time = ea.steps ? ea.step_sum / static_cast<double>(ea.steps) : 0.0;
    es.pct_hits = ea.hits_n ? ea.hits_sum / static_cast<double>(ea.hits_n) : 0.0;
    es.comm_volume = ea.comm;
    es.replacements = ea.replacements;
    es.decisions = ea.decisions;
    if (ea.intervals) es.r_mean = static_cast<double>(ea.interval_sum) / static_cast<double>(ea.intervals);
    report.epochs.push_back(es);
    report.comm_volume += ea.comm;
  }

  report.total_time = trainers.empty() ? 0.0 : trainers.front().clock;
  report.mean_step_time = step_n ? step_sum / static_cast<double>(step_n) : 0.0;
  if (steady_n) {
    report.steady_pct_hits = steady_sum / static_cast<double>(steady_n);
  } else if (all_hits_n && cfg.epochs == 1) {
    report.steady_pct_hits = all_hits_sum / static_cast<double>(all_hits_n);
  }
  if (!report.replacement_intervals.empty()) {
    const auto sum = std::accumulate(report.replacement_intervals.begin(), report.replacement_intervals.end(),
                                     std::uint64_t{0});
    report.r_mean = static_cast<double>(sum) / static_cast<double>(report.replacement_intervals.size());
  }
  report.ledger = ledger_from_trace(trace);
  return report;
}

nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"epoch_time", e.epoch_time},
                      {"mean_step_time", e.mean_step_time},
                      {"pct_hits", e.pct_hits},
                      {"comm_volume", e.comm_volume},
                      {"replacements", e.replacements},
                      {"decisions", e.decisions},
                      {"r_mean", optional_number(e.r_mean)}});
  }
  return {{"config_hash", r.config_hash},
          {"controller", to_string(r.controller)},
          {"mode", to_string(r.mode)},
          {"trainers", r.trainers},
          {"buffer_capacity", r.buffer_capacity},
          {"epochs", epochs},
          {"total_time", r.total_time},
          {"mean_epoch_time", r.epochs.empty() ? 0.0 : r.total_time / static_cast<double>(r.epochs.size())},
          {"mean_step_time", r.mean_step_time},
          {"steady_pct_hits", r.steady_pct_hits},
          {"comm_volume", r.comm_volume},
          {"decisions", r.decisions},
          {"invalid_decisions", r.invalid_decisions},
          {"replacements", r.replacements},
          {"replacement_intervals", r.replacement_intervals},
          {"r_mean", optional_number(r.r_mean)},
          {"warnings", r.warnings},
          {"ledger", r.ledger},
          {"trace_events", r.trace.size()}};
}

std::string report_csv(const RunReport& r) {
  std::string out = "epoch,mean_time,pct_hits,comm_volume,replacements,r_mean\n";
  for (const auto& e : r.epochs) {
    out += std::to_string(e.epoch) + "," + fmt(e.epoch_time) + "," + fmt(e.pct_hits) + "," +
           std::to_string(e.comm_volume) + "," + std::to_string(e.replacements) + "," +
           (e.r_mean ? fmt(*e.r_mean) : std::string{}) + "\n";
  }
  return out;
}

void write_report(const RunReport& r, const std::filesystem::path& dir, const nlohmann::json& meta) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  write("report.json", report_to_json(r).dump(2) + "\n");
  write("epochs.csv", report_csv(r));
  export_trace(r.trace, dir / "trace.jsonl");
  if (!meta.is_null()) write("run.meta.json", meta.dump(2) + "\n");
}

}  // namespace gnnpf
