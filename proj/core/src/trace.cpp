#include "gnnpf/trace.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>

#include "gnnpf/clock.hpp"
#include "gnnpf/error.hpp"
#include "gnnpf/pipeline.hpp"

namespace gnnpf {

namespace {

constexpr EventKind kAllKinds[] = {EventKind::Sample,   EventKind::Metrics,     EventKind::Request,
                                   EventKind::Decision, EventKind::Replacement, EventKind::Fetch,
                                   EventKind::Barrier,  EventKind::EpochMark};

using StepKey = std::pair<std::uint32_t, std::uint64_t>;  // (trainer, minibatch)

std::map<StepKey, RuntimeMetrics> metrics_by_step(const Trace& t) {
  std::map<StepKey, RuntimeMetrics> out;
  for (const auto& ev : t.events()) {
    if (ev.kind == EventKind::Metrics) out[{ev.trainer, ev.minibatch}] = ev.payload.get<RuntimeMetrics>();
  }
  return out;
}

}  // namespace

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::Sample: return "sample";
    case EventKind::Metrics: return "metrics";
    case EventKind::Request: return "request";
    case EventKind::Decision: return "decision";
    case EventKind::Replacement: return "replacement";
    case EventKind::Fetch: return "fetch";
    case EventKind::Barrier: return "barrier";
    case EventKind::EpochMark: return "epoch-mark";
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view name) {
  for (auto k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown event kind '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const TraceEvent& e) {
  j = {{"seq", e.seq},
       {"kind", to_string(e.kind)},
       {"trainer", e.trainer},
       {"epoch", e.epoch},
       {"minibatch", e.minibatch},
       {"sim_time", e.sim_time},
       {"payload", e.payload}};
}

void from_json(const nlohmann::json& j, TraceEvent& e) {
  j.at("seq").get_to(e.seq);
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  j.at("trainer").get_to(e.trainer);
  j.at("epoch").get_to(e.epoch);
  j.at("minibatch").get_to(e.minibatch);
  j.at("sim_time").get_to(e.sim_time);
  e.payload = j.at("payload");
  if (!e.payload.is_object()) throw std::invalid_argument("payload must be an object");
}

Trace::Trace(std::string config_hash, nlohmann::json meta, std::size_t max_events)
    : config_hash_(std::move(config_hash)), meta_(std::move(meta)), max_events_(max_events) {}

std::uint64_t Trace::record(TraceEvent e) {
  if (events_.size() >= max_events_) {
    throw TraceError(TraceError::Kind::Capacity,
                     "trace is full (" + std::to_string(max_events_) + " events); raise max_trace_events",
                     events_.size());
  }
  const std::uint64_t seq = events_.size() + 1;
  Cursor& c = cursors_[e.trainer];
  if (std::tie(e.epoch, e.minibatch) < std::tie(c.epoch, c.minibatch)) {
    throw TraceError(TraceError::Kind::Ordering,
                     "trainer " + std::to_string(e.trainer) + ": event at epoch " + std::to_string(e.epoch) +
                         " minibatch " + std::to_string(e.minibatch) + " after epoch " + std::to_string(c.epoch) +
                         " minibatch " + std::to_string(c.minibatch),
                     events_.size());
  }
  if (e.kind == EventKind::Decision) {
    auto it = c.open_requests.end();
    if (const auto rs = e.payload.find("request_seq"); rs != e.payload.end() && rs->is_number_unsigned()) {
      it = std::find(c.open_requests.begin(), c.open_requests.end(), rs->get<std::uint64_t>());
    } else if (!c.open_requests.empty()) {
      it = c.open_requests.begin();
    }
    if (it == c.open_requests.end()) {
      throw TraceError(TraceError::Kind::Ordering,
                       "trainer " + std::to_string(e.trainer) + ": decision without an earlier unanswered request",
                       events_.size());
    }
    c.open_requests.erase(it);
  } else if (e.kind == EventKind::Request) {
    c.open_requests.push_back(seq);
  }
  c.epoch = e.epoch;
  c.minibatch = e.minibatch;
  e.seq = seq;
  events_.push_back(std::move(e));
  return seq;
}

void write_trace(const Trace& t, std::ostream& out) {
  const nlohmann::json header = {{"schema", kTraceSchema},
                                 {"version", kTraceVersion},
                                 {"config_hash", t.config_hash()},
                                 {"meta", t.meta()}};
  out << header.dump() << '\n';
  for (const auto& ev : t.events()) out << nlohmann::json(ev).dump() << '\n';
}

std::string serialize_trace(const Trace& t) {
  std::ostringstream out;
  write_trace(t, out);
  return out.str();
}

void export_trace(const Trace& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError(TraceError::Kind::Io, "cannot write " + path.string());
  write_trace(t, out);
  if (!out) throw TraceError(TraceError::Kind::Io, "write failed for " + path.string());
}

ImportResult read_trace(std::istream& in, std::string_view expected_hash) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (text.empty()) throw TraceError(TraceError::Kind::Truncated, "empty trace file", 0);

  std::vector<std::string_view> lines;
  bool last_terminated = true;
  for (std::size_t pos = 0; pos < text.size();) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      lines.emplace_back(text.data() + pos, text.size() - pos);
      last_terminated = false;
      break;
    }
    lines.emplace_back(text.data() + pos, nl - pos);
    pos = nl + 1;
  }

  const auto header = nlohmann::json::parse(lines[0], nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw TraceError(lines.size() == 1 && !last_terminated ? TraceError::Kind::Truncated : TraceError::Kind::Corrupt,
                     "unreadable trace header", 0);
  }
  if (header.value("schema", std::string{}) != kTraceSchema) {
    throw TraceError(TraceError::Kind::Schema, "not a gnnpf trace (schema '" + header.value("schema", std::string{}) +
                                                   "')");
  }
  if (header.value("version", -1) != kTraceVersion) {
    throw TraceError(TraceError::Kind::Schema, "unsupported trace version " + header.value("version", nlohmann::json()).dump() +
                                                   " (expected " + std::to_string(kTraceVersion) + ")");
  }

  ImportResult result{Trace(header.value("config_hash", std::string{}), header.value("meta", nlohmann::json::object()),
                            std::numeric_limits<std::size_t>::max()),
                      {}};
  if (!expected_hash.empty() && result.trace.config_hash() != expected_hash) {
    result.warnings.push_back("config hash mismatch: trace has " + result.trace.config_hash() + ", expected " +
                              std::string(expected_hash) + "; replay is read-only");
  }

  std::uint64_t last_good = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const bool is_tail = i + 1 == lines.size() && !last_terminated;
    const auto fail = [&](const std::string& why) {
      const auto kind = is_tail ? TraceError::Kind::Truncated : TraceError::Kind::Corrupt;
      const std::string where = " trace at event line " + std::to_string(i) + " (file line " + std::to_string(i + 1) + ")";
      throw TraceError(kind,
                       std::string(is_tail ? "truncated" : "corrupt") + where + ": " + why + " (last good sequence " +
                           std::to_string(last_good) + ")",
                       last_good);
    };
    const auto doc = nlohmann::json::parse(lines[i], nullptr, false);
    if (doc.is_discarded()) fail("malformed JSON");
    TraceEvent ev;
    try {
      ev = doc.get<TraceEvent>();
    } catch (const std::exception& e) {
      fail(e.what());
    }
    if (ev.seq != last_good + 1) fail("sequence " + std::to_string(ev.seq) + " breaks numbering");
    try {
      result.trace.record(ev);
    } catch (const TraceError& e) {
      throw TraceError(TraceError::Kind::Ordering, std::string(e.what()) + " (last good sequence " +
                                                       std::to_string(last_good) + ")",
                       last_good);
    }
    last_good = ev.seq;
  }
  return result;
}

ImportResult import_trace(const std::filesystem::path& path, std::string_view expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(TraceError::Kind::Io, "cannot read " + path.string());
  return read_trace(in, expected_hash);
}

std::vector<RuntimeMetrics> recorded_metrics(const Trace& t) {
  std::vector<RuntimeMetrics> out;
  for (const auto& ev : t.events()) {
    if (ev.kind == EventKind::Metrics) out.push_back(ev.payload.get<RuntimeMetrics>());
  }
  return out;
}

std::vector<RuntimeMetrics> derive_metrics(const Trace& t) {
  const auto& meta = t.meta();
  ClockModel clock;
  clock.beta = meta.at("clock").at("beta").get<double>();
  clock.gamma = meta.at("clock").at("gamma").get<double>();
  const auto graphs = meta.at("graph").get<std::vector<GraphStatic>>();
  const auto capacity = meta.at("buffer_capacity").get<std::vector<std::size_t>>();

  struct Step {
    nlohmann::json sample;
    std::uint64_t evicted = 0;
    bool replaced = false;
    std::uint64_t fetched = 0;
  };
  std::map<std::uint32_t, Step> open;
  std::vector<RuntimeMetrics> out;
  for (const auto& ev : t.events()) {
    Step& s = open[ev.trainer];
    switch (ev.kind) {
      case EventKind::Sample:
        s = Step{ev.payload};
        break;
      case EventKind::Replacement:
        s.replaced = true;
        s.evicted = ev.payload.at("evicted").get<std::uint64_t>();
        break;
      case EventKind::Fetch:
        s.fetched = ev.payload.at("missed").get<std::uint64_t>() + ev.payload.at("replacement").get<std::uint64_t>();
        break;
      case EventKind::Metrics: {
        RuntimeMetrics m;
        const auto remote = s.sample.at("remote").get<std::uint64_t>();
        const auto hits = s.sample.at("hits").get<std::uint64_t>();
        m.trainer = ev.trainer;
        m.sampled_remote = remote;
        m.no_sample = remote == 0;
        m.pct_hits = remote == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(remote);
        m.comm_volume = s.fetched;
        m.comm_time = clock.comm_time(s.fetched);
        const std::size_t cap = capacity.at(ev.trainer);
        m.nodes_replaced_pct =
            s.replaced && cap > 0 ? 100.0 * static_cast<double>(s.evicted) / static_cast<double>(cap) : 0.0;
        m.minibatch_index = ev.minibatch;
        m.epoch = ev.epoch;
        m.minibatches_remaining = s.sample.at("minibatches_remaining").get<std::uint64_t>();
        m.epochs_remaining = s.sample.at("epochs_remaining").get<std::uint64_t>();
        m.graph = graphs.at(ev.trainer);
        out.push_back(m);
        break;
      }
      default:
        break;
    }
  }
  return out;
}

std::vector<DecisionRecord> ledger_from_trace(const Trace& t) {
  const auto metrics = metrics_by_step(t);
  std::map<StepKey, bool> skipped;
  for (const auto& ev : t.events()) {
    if (ev.kind == EventKind::Replacement) skipped[{ev.trainer, ev.minibatch}] = ev.payload.at("skipped").get<bool>();
  }
  std::vector<DecisionRecord> out;
  for (const auto& ev : t.events()) {
    if (ev.kind != EventKind::Decision) continue;
    DecisionRecord rec;
    rec.trainer = ev.trainer;
    rec.decision = ev.payload.at("decision").get<Decision>();
    rec.consumed_minibatch = ev.minibatch;
    if (auto it = metrics.find({ev.trainer, ev.minibatch}); it != metrics.end()) rec.pre = it->second;
    if (auto it = metrics.find({ev.trainer, ev.minibatch + 1}); it != metrics.end()) {
      rec.post = it->second;
      rec.effectiveness = hits_minus_comm(rec.pre, it->second);
    }
    if (auto it = skipped.find({ev.trainer, ev.minibatch}); it != skipped.end()) rec.replacement_skipped = it->second;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<LabeledSample> labels_from_trace(const Trace& t) {
  std::map<std::uint32_t, std::vector<RuntimeMetrics>> per_trainer;
  for (const auto& ev : t.events()) {
    if (ev.kind == EventKind::Metrics) per_trainer[ev.trainer].push_back(ev.payload.get<RuntimeMetrics>());
  }
  std::vector<LabeledSample> out;
  for (const auto& [trainer, ms] : per_trainer) {
    for (std::size_t i = 1; i < ms.size(); ++i) out.push_back(label_sample(ms[i - 1], ms[i]));
  }
  return out;
}

std::vector<std::uint64_t> fetch_volume_per_epoch(const Trace& t) {
  std::vector<std::uint64_t> out;
  for (const auto& ev : t.events()) {
    if (ev.kind != EventKind::Fetch) continue;
    if (out.size() <= ev.epoch) out.resize(ev.epoch + 1, 0);
    out[ev.epoch] += ev.payload.at("total").get<std::uint64_t>();
  }
  return out;
}

AuditResult audit_no_stale_decisions(const Trace& t) {
  AuditResult r;
  std::map<std::uint32_t, std::uint64_t> last_clear;
  for (const auto& ev : t.events()) {
    if (ev.kind == EventKind::Replacement) {
      last_clear[ev.trainer] = ev.minibatch;
    } else if (ev.kind == EventKind::Decision) {
      const auto src = ev.payload.at("decision").at("source_minibatch").get<std::uint64_t>();
      const auto it = last_clear.find(ev.trainer);
      if (it != last_clear.end() && src < it->second) {
        r.violations.push_back("seq " + std::to_string(ev.seq) + ": trainer " + std::to_string(ev.trainer) +
                               " consumed a decision from minibatch " + std::to_string(src) +
                               " after the request queue was cleared at " + std::to_string(it->second));
      }
    }
  }
  return r;
}

AuditResult audit_single_outstanding(const Trace& t) {
  AuditResult r;
  std::map<std::uint32_t, std::optional<std::uint64_t>> open;
  for (const auto& ev : t.events()) {
    if (ev.kind == EventKind::Request) {
      if (open[ev.trainer]) {
        r.violations.push_back("seq " + std::to_string(ev.seq) + ": trainer " + std::to_string(ev.trainer) +
                               " issued a request while decision for seq " + std::to_string(*open[ev.trainer]) +
                               " is outstanding");
      }
      open[ev.trainer] = ev.seq;
    } else if (ev.kind == EventKind::Decision) {
      const auto req = ev.payload.at("request_seq").get<std::uint64_t>();
      if (open[ev.trainer] != req) {
        r.violations.push_back("seq " + std::to_string(ev.seq) + ": decision answers request " + std::to_string(req) +
                               " which is not the outstanding one");
      }
      open[ev.trainer].reset();
    }
  }
  return r;
}

AuditResult audit_comm_conservation(const Trace& t, std::span<const std::uint64_t> reported_per_epoch) {
  AuditResult r;
  std::map<StepKey, std::uint64_t> fetched;
  std::map<StepKey, std::uint64_t> inserted;
  for (const auto& ev : t.events()) {
    const StepKey key{ev.trainer, ev.minibatch};
    if (ev.kind == EventKind::Replacement) {
      inserted[key] = ev.payload.at("inserted").get<std::uint64_t>();
    } else if (ev.kind == EventKind::Fetch) {
      const auto missed = ev.payload.at("missed").get<std::uint64_t>();
      const auto rep = ev.payload.at("replacement").get<std::uint64_t>();
      const auto total = ev.payload.at("total").get<std::uint64_t>();
      if (missed + rep != total) r.violations.push_back("seq " + std::to_string(ev.seq) + ": missed + replacement != total");
      const auto ins = inserted.contains(key) ? inserted[key] : 0;
      if (rep != ins) {
        r.violations.push_back("seq " + std::to_string(ev.seq) + ": replacement fetch " + std::to_string(rep) +
                               " != inserted " + std::to_string(ins));
      }
      fetched[key] += total;
    } else if (ev.kind == EventKind::Metrics) {
      const auto vol = ev.payload.at("comm_volume").get<std::uint64_t>();
      if (fetched[key] != vol) {
        r.violations.push_back("seq " + std::to_string(ev.seq) + ": comm_volume " + std::to_string(vol) +
                               " != fetched " + std::to_string(fetched[key]));
      }
    }
  }
  const auto per_epoch = fetch_volume_per_epoch(t);
  if (per_epoch.size() != reported_per_epoch.size()) {
    r.violations.push_back("trace covers " + std::to_string(per_epoch.size()) + " epochs, report " +
                           std::to_string(reported_per_epoch.size()));
  } else {
    for (std::size_t e = 0; e < per_epoch.size(); ++e) {
      if (per_epoch[e] != reported_per_epoch[e]) {
        r.violations.push_back("epoch " + std::to_string(e) + ": fetched " + std::to_string(per_epoch[e]) +
                               " != reported " + std::to_string(reported_per_epoch[e]));
      }
    }
  }
  return r;
}

ReplayResult replay_decisions(const Trace& t, const std::function<std::unique_ptr<Controller>(std::uint32_t)>& make) {
  ReplayResult r;
  const auto metrics = metrics_by_step(t);
  std::map<std::uint64_t, Decision> answered;
  for (const auto& ev : t.events()) {
    if (ev.kind == EventKind::Decision) {
      answered[ev.payload.at("request_seq").get<std::uint64_t>()] = ev.payload.at("decision").get<Decision>();
    }
  }
  std::map<std::uint32_t, std::unique_ptr<Controller>> controllers;
  for (const auto& ev : t.events()) {
    if (ev.kind != EventKind::Request) continue;
    auto& c = controllers[ev.trainer];
    if (!c) c = make(ev.trainer);
    const auto src = ev.payload.at("source_minibatch").get<std::uint64_t>();
    const auto m = metrics.find({ev.trainer, src});
    if (m == metrics.end()) {
      r.mismatches.push_back("request seq " + std::to_string(ev.seq) + " has no recorded metrics");
      continue;
    }
    const Decision replayed = c->decide(m->second);
    const auto rec = answered.find(ev.seq);
    if (rec == answered.end()) continue;  // still in flight when the run ended
    ++r.compared;
    if (replayed.action == rec->second.action && replayed.valid == rec->second.valid) {
      ++r.matched;
    } else {
      r.mismatches.push_back("request seq " + std::to_string(ev.seq) + ": recorded " +
                             std::string(to_string(rec->second.action)) + ", replayed " +
                             std::string(to_string(replayed.action)));
    }
  }
  return r;
}

CollectResult collect_training_samples(const RunConfig& cfg, const Graph& g, const PartitionMap& pm) {
  RunConfig c = cfg;
  c.clock.alpha = 0.0;
  c.controller = ControllerConfig{};
  c.controller.kind = ControllerKind::Fixed;
  RunReport report = run_training(c, g, pm);

  CollectResult out;
  out.samples = labels_from_trace(report.trace);
  out.trace = std::move(report.trace);
  const bool any_comm = std::any_of(out.samples.begin(), out.samples.end(),
                                    [](const LabeledSample& s) { return s.features[1] > 0.0; });
  const auto goods = std::count_if(out.samples.begin(), out.samples.end(), [](const auto& s) { return s.good; });
  out.low_signal = !any_comm || goods == 0 || goods == static_cast<std::ptrdiff_t>(out.samples.size());
  out.t_sampling = report.mean_step_time;
  out.offline_cost = static_cast<double>(out.samples.size()) * out.t_sampling;
  return out;
}

}  // namespace gnnpf
