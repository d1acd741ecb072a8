#include "gnnpf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "gnnpf/error.hpp"

namespace gnnpf {

namespace {

std::uint64_t edge_key(NodeId a, NodeId b) noexcept {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller id wins so roots are stable across runs.
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::filesystem::path sidecar_path(const std::filesystem::path& p) {
  std::filesystem::path s = p;
  s += ".meta.json";
  return s;
}

}  // namespace

Graph Graph::from_edges(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges) {
  std::vector<std::uint64_t> keys;
  keys.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a >= num_nodes || b >= num_nodes) throw std::out_of_range("edge endpoint out of range");
    if (a == b) continue;
    keys.push_back(edge_key(a, b));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  Graph g;
  g.offsets.assign(num_nodes + 1, 0);
  for (std::uint64_t k : keys) {
    ++g.offsets[(k >> 32) + 1];
    ++g.offsets[(k & 0xffffffffULL) + 1];
  }
  std::partial_sum(g.offsets.begin(), g.offsets.end(), g.offsets.begin());
  g.neighbors.resize(keys.size() * 2);
  std::vector<std::uint64_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
  for (std::uint64_t k : keys) {
    const auto a = static_cast<NodeId>(k >> 32);
    const auto b = static_cast<NodeId>(k & 0xffffffffULL);
    g.neighbors[cursor[a]++] = b;
    g.neighbors[cursor[b]++] = a;
  }
  for (std::size_t v = 0; v < num_nodes; ++v) {
    std::sort(g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[v]),
              g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[v + 1]));
  }
  return g;
}

void Graph::validate() const {
  if (offsets.empty() || offsets.front() != 0) throw std::logic_error("offsets must start at 0");
  if (!std::is_sorted(offsets.begin(), offsets.end())) throw std::logic_error("offsets must be non-decreasing");
  if (offsets.back() != neighbors.size()) throw std::logic_error("offsets[num_nodes] != num_edges");
  const std::size_t n = num_nodes();
  for (std::size_t v = 0; v < n; ++v) {
    for (NodeId u : adjacent(static_cast<NodeId>(v))) {
      if (u >= n) throw std::logic_error("neighbor id out of range");
      if (u == v) throw std::logic_error("self-loop");
    }
  }
}

Graph generate_graph(const GeneratorParams& params) {
  const std::size_t n = params.nodes;
  if (n < 2) throw std::invalid_argument("generate_graph: nodes must be >= 2");
  if (params.avg_degree < 1) throw std::invalid_argument("generate_graph: avg_degree must be >= 1");
  if (!(params.skew > 1.0) || !std::isfinite(params.skew)) {
    throw std::invalid_argument("generate_graph: skew exponent must be finite and > 1");
  }
  std::size_t target = 0;
  if (__builtin_mul_overflow(n, params.avg_degree, &target)) {
    throw SizeError("generate_graph: nodes * avg_degree overflows");
  }
  if (n > std::numeric_limits<NodeId>::max() || target > (std::size_t{1} << 40)) {
    throw SizeError("generate_graph: graph too large for 32-bit node ids");
  }
  target = std::max<std::size_t>(2, target & ~std::size_t{1});

  Rng rng(params.seed);
  const double exponent = -1.0 / (params.skew - 1.0);
  const double cap = static_cast<double>(n - 1);
  std::vector<double> weight(n);
  double weight_sum = 0.0;
  for (auto& w : weight) {
    w = std::min(cap, std::pow(1.0 - rng.uniform(), exponent));
    weight_sum += w;
  }
  const double scale = static_cast<double>(target) / weight_sum;
  std::vector<std::uint64_t> degree(n);
  std::uint64_t stubs_total = 0;
  for (std::size_t v = 0; v < n; ++v) {
    const double x = weight[v] * scale;
    auto d = static_cast<std::uint64_t>(std::floor(x));
    if (rng.uniform() < x - std::floor(x)) ++d;
    degree[v] = std::clamp<std::uint64_t>(d, 1, n - 1);
    stubs_total += degree[v];
  }
  if (stubs_total % 2 == 1) {
    for (std::size_t v = 0; v < n; ++v) {
      if (degree[v] < n - 1) {
        ++degree[v];
        ++stubs_total;
        break;
      }
    }
  }

  std::vector<NodeId> stubs;
  stubs.reserve(stubs_total);
  for (std::size_t v = 0; v < n; ++v) stubs.insert(stubs.end(), degree[v], static_cast<NodeId>(v));
  rng.shuffle(stubs);

  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(stubs.size() / 2 + n);
  std::unordered_set<std::uint64_t> present;
  present.reserve(stubs.size());
  auto try_add = [&](NodeId a, NodeId b) {
    if (a == b) return false;
    if (!present.insert(edge_key(a, b)).second) return false;
    edges.emplace_back(a, b);
    return true;
  };
  for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) try_add(stubs[i], stubs[i + 1]);

  // Attach every stray component to the largest one.
  UnionFind uf(n);
  for (auto [a, b] : edges) uf.unite(a, b);
  std::vector<std::size_t> comp_size(n, 0);
  for (std::size_t v = 0; v < n; ++v) ++comp_size[uf.find(v)];
  std::size_t giant = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (comp_size[v] > comp_size[giant]) giant = v;
  }
  std::vector<NodeId> giant_nodes;
  std::vector<std::size_t> representative(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t r = uf.find(v);
    if (r == giant) {
      giant_nodes.push_back(static_cast<NodeId>(v));
    } else if (representative[r] == n || degree[v] > degree[representative[r]]) {
      representative[r] = v;
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (representative[r] == n) continue;
    const NodeId anchor = giant_nodes[rng.below(giant_nodes.size())];
    try_add(static_cast<NodeId>(representative[r]), anchor);
  }

  // Degree-proportional top-up towards the edge target.
  std::vector<std::uint64_t> cumulative(n);
  std::partial_sum(degree.begin(), degree.end(), cumulative.begin());
  auto pick = [&]() {
    const std::uint64_t r = rng.below(cumulative.back());
    return static_cast<NodeId>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
  };
  const std::size_t wanted = target / 2;
  for (std::size_t attempts = 0; edges.size() < wanted && attempts < 20 * target + 100; ++attempts) {
    const NodeId a = pick();
    const NodeId b = pick();
    try_add(a, b);
  }

  return Graph::from_edges(n, edges);
}

std::vector<std::size_t> component_sizes(const Graph& g) {
  const std::size_t n = g.num_nodes();
  UnionFind uf(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (NodeId u : g.adjacent(static_cast<NodeId>(v))) uf.unite(v, u);
  }
  std::unordered_map<std::size_t, std::size_t> counts;
  for (std::size_t v = 0; v < n; ++v) ++counts[uf.find(v)];
  std::vector<std::size_t> sizes;
  sizes.reserve(counts.size());
  for (const auto& [root, c] : counts) sizes.push_back(c);
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

std::string_view to_string(PartitionStrategy s) noexcept {
  switch (s) {
    case PartitionStrategy::Hash:
      return "hash";
    case PartitionStrategy::Range:
      return "range";
    case PartitionStrategy::GreedyEdgeCut:
      return "greedy-edge-cut";
  }
  return "unknown";
}

PartitionStrategy parse_partition_strategy(std::string_view name) {
  if (name == "hash") return PartitionStrategy::Hash;
  if (name == "range") return PartitionStrategy::Range;
  if (name == "greedy-edge-cut" || name == "greedy") return PartitionStrategy::GreedyEdgeCut;
  throw std::invalid_argument("unknown partition strategy '" + std::string(name) +
                              "' (expected hash, range or greedy-edge-cut)");
}

std::vector<NodeId> PartitionMap::owned_by(PartitionId p) const {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < owner.size(); ++v) {
    if (owner[v] == p) out.push_back(static_cast<NodeId>(v));
  }
  return out;
}

std::vector<std::size_t> PartitionMap::sizes() const {
  std::vector<std::size_t> out(parts, 0);
  for (PartitionId p : owner) ++out[p];
  return out;
}

PartitionMap partition_graph(const Graph& g, std::size_t parts, PartitionStrategy strategy) {
  const std::size_t n = g.num_nodes();
  if (parts == 0) throw std::invalid_argument("partition_graph: parts must be >= 1");
  if (parts > n) throw std::invalid_argument("partition_graph: more parts than nodes");

  PartitionMap pm;
  pm.parts = static_cast<PartitionId>(parts);
  pm.owner.assign(n, 0);
  switch (strategy) {
    case PartitionStrategy::Hash: {
      for (std::size_t v = 0; v < n; ++v) pm.owner[v] = static_cast<PartitionId>(mix64(v) % parts);
      // Hashing can leave a partition empty on tiny graphs; borrow the
      // highest id from the largest partition.
      for (;;) {
        auto sizes = pm.sizes();
        auto empty = std::find(sizes.begin(), sizes.end(), 0);
        if (empty == sizes.end()) break;
        const auto largest = static_cast<PartitionId>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
        for (std::size_t v = n; v-- > 0;) {
          if (pm.owner[v] == largest) {
            pm.owner[v] = static_cast<PartitionId>(empty - sizes.begin());
            break;
          }
        }
      }
      break;
    }
    case PartitionStrategy::Range:
      for (std::size_t v = 0; v < n; ++v) pm.owner[v] = static_cast<PartitionId>(v * parts / n);
      break;
    case PartitionStrategy::GreedyEdgeCut: {
      constexpr PartitionId kUnassigned = std::numeric_limits<PartitionId>::max();
      pm.owner.assign(n, kUnassigned);
      std::size_t next_unassigned = 0;
      std::size_t assigned = 0;
      for (std::size_t p = 0; p < parts; ++p) {
        const std::size_t remaining_parts = parts - p;
        const std::size_t quota = (n - assigned + remaining_parts - 1) / remaining_parts;
        std::size_t size = 0;
        std::queue<NodeId> frontier;
        while (size < quota) {
          if (frontier.empty()) {
            while (pm.owner[next_unassigned] != kUnassigned) ++next_unassigned;
            pm.owner[next_unassigned] = static_cast<PartitionId>(p);
            frontier.push(static_cast<NodeId>(next_unassigned));
            ++size;
            continue;
          }
          const NodeId v = frontier.front();
          frontier.pop();
          for (NodeId u : g.adjacent(v)) {
            if (size >= quota) break;
            if (pm.owner[u] != kUnassigned) continue;
            pm.owner[u] = static_cast<PartitionId>(p);
            frontier.push(u);
            ++size;
          }
        }
        assigned += size;
      }
      break;
    }
  }
  return pm;
}

std::size_t edge_cut(const Graph& g, const PartitionMap& pm) {
  std::size_t cut = 0;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    for (NodeId u : g.adjacent(static_cast<NodeId>(v))) {
      if (v < u && pm.owner[v] != pm.owner[u]) ++cut;
    }
  }
  return cut;
}

std::size_t partition_edge_count(const Graph& g, const PartitionMap& pm, PartitionId p) {
  std::size_t count = 0;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (pm.owner[v] != p) continue;
    for (NodeId u : g.adjacent(static_cast<NodeId>(v))) {
      if (pm.owner[u] == p) ++count;
    }
  }
  return count;
}

std::size_t halo_size(const Graph& g, const PartitionMap& pm, PartitionId p) {
  std::vector<bool> seen(g.num_nodes(), false);
  std::size_t count = 0;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (pm.owner[v] != p) continue;
    for (NodeId u : g.adjacent(static_cast<NodeId>(v))) {
      if (pm.owner[u] != p && !seen[u]) {
        seen[u] = true;
        ++count;
      }
    }
  }
  return count;
}

std::vector<NodeId> select_train_nodes(const PartitionMap& pm, PartitionId p, double fraction, Seed seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("train fraction must be in (0, 1]");
  std::vector<NodeId> owned = pm.owned_by(p);
  if (owned.empty()) return owned;
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(owned.size()))), 1, owned.size());
  Rng rng(derive_seed(seed, 0x7472616eULL, p));
  rng.shuffle(owned);
  owned.resize(count);
  std::sort(owned.begin(), owned.end());
  return owned;
}

std::vector<std::vector<NodeId>> make_minibatches(std::span<const NodeId> train_nodes, std::size_t batch_size,
                                                  Seed epoch_seed) {
  if (batch_size == 0) throw std::invalid_argument("make_minibatches: batch_size must be >= 1");
  std::vector<NodeId> order(train_nodes.begin(), train_nodes.end());
  Rng rng(epoch_seed);
  rng.shuffle(order);
  std::vector<std::vector<NodeId>> batches;
  batches.reserve((order.size() + batch_size - 1) / batch_size);
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

SampleBatch sample_neighbors(const Graph& g, std::span<const NodeId> seeds, std::span<const std::size_t> fanouts,
                             Rng& rng) {
  if (fanouts.empty()) throw std::invalid_argument("sample_neighbors: fanouts must be non-empty");
  SampleBatch batch;
  std::unordered_map<NodeId, std::uint32_t> position;
  position.reserve(seeds.size() * 8);

  batch.layers.emplace_back();
  for (NodeId s : seeds) {
    if (s >= g.num_nodes()) throw std::out_of_range("sample_neighbors: seed out of range");
    if (position.emplace(s, static_cast<std::uint32_t>(batch.all_nodes.size())).second) {
      batch.seeds.push_back(s);
      batch.layers[0].push_back(s);
      batch.all_nodes.push_back(s);
      batch.multiplicity.push_back(1);
    }
  }

  std::vector<std::size_t> picked;
  for (std::size_t hop = 0; hop < fanouts.size(); ++hop) {
    std::vector<NodeId> next;
    std::unordered_set<NodeId> in_next;
    const std::size_t fanout = fanouts[hop];
    for (NodeId v : batch.layers[hop]) {
      const auto adj = g.adjacent(v);
      const std::size_t d = adj.size();
      picked.clear();
      if (d <= fanout) {
        for (std::size_t i = 0; i < d; ++i) picked.push_back(i);
      } else {
        // Floyd's subset sampling: uniform fanout-subset of [0, d).
        for (std::size_t j = d - fanout; j < d; ++j) {
          const auto r = static_cast<std::size_t>(rng.below(j + 1));
          if (std::find(picked.begin(), picked.end(), r) == picked.end()) {
            picked.push_back(r);
          } else {
            picked.push_back(j);
          }
        }
      }
      for (std::size_t i : picked) {
        const NodeId u = adj[i];
        auto [it, inserted] = position.emplace(u, static_cast<std::uint32_t>(batch.all_nodes.size()));
        if (inserted) {
          batch.all_nodes.push_back(u);
          batch.multiplicity.push_back(1);
        } else {
          ++batch.multiplicity[it->second];
        }
        if (in_next.insert(u).second) next.push_back(u);
      }
    }
    batch.layers.push_back(std::move(next));
  }
  return batch;
}

LocalRemoteSplit split_local_remote(const SampleBatch& s, const PartitionMap& pm, PartitionId local) {
  LocalRemoteSplit out;
  for (std::size_t i = 0; i < s.all_nodes.size(); ++i) {
    const NodeId v = s.all_nodes[i];
    if (pm.is_remote(v, local)) {
      out.remote.push_back(v);
      out.remote_multiplicity.push_back(s.multiplicity[i]);
    } else {
      out.local.push_back(v);
    }
  }
  return out;
}

std::vector<std::size_t> new_remote_per_minibatch(const Graph& g, const PartitionMap& pm, PartitionId local,
                                                  std::span<const std::vector<NodeId>> batches,
                                                  std::span<const std::size_t> fanouts, Seed seed) {
  std::vector<bool> seen(g.num_nodes(), false);
  std::vector<std::size_t> counts;
  counts.reserve(batches.size());
  for (std::size_t i = 0; i < batches.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    const auto split = split_local_remote(sample_neighbors(g, batches[i], fanouts, rng), pm, local);
    std::size_t fresh = 0;
    for (NodeId v : split.remote) {
      if (!seen[v]) {
        seen[v] = true;
        ++fresh;
      }
    }
    counts.push_back(fresh);
  }
  return counts;
}

Graph relabel(const Graph& g, std::span<const NodeId> perm) {
  const std::size_t n = g.num_nodes();
  if (perm.size() != n) throw std::invalid_argument("relabel: permutation size mismatch");
  std::vector<NodeId> inverse(n);
  for (std::size_t v = 0; v < n; ++v) inverse[perm[v]] = static_cast<NodeId>(v);
  Graph out;
  out.offsets.assign(n + 1, 0);
  for (std::size_t w = 0; w < n; ++w) out.offsets[w + 1] = out.offsets[w] + g.degree(inverse[w]);
  out.neighbors.reserve(g.num_edges());
  for (std::size_t w = 0; w < n; ++w) {
    for (NodeId u : g.adjacent(inverse[w])) out.neighbors.push_back(perm[u]);
  }
  return out;
}

void write_edge_list(const Graph& g, const std::filesystem::path& path, const GeneratorParams* params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    for (NodeId u : g.adjacent(static_cast<NodeId>(v))) {
      if (v < u) out << v << ' ' << u << '\n';
    }
  }
  nlohmann::json meta = {{"num_nodes", g.num_nodes()}, {"num_edges", g.num_edges()}, {"format", "edge-list/v1"}};
  if (params != nullptr) {
    meta["generator"] = {{"model", "configuration-power-law"},
                         {"nodes", params->nodes},
                         {"avg_degree", params->avg_degree},
                         {"skew", params->skew},
                         {"seed", params->seed}};
  }
  std::ofstream side(sidecar_path(path));
  side << meta.dump(2) << '\n';
}

Graph read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::size_t max_id = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    if (!(fields >> a >> b) || a > std::numeric_limits<NodeId>::max() || b > std::numeric_limits<NodeId>::max()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed edge");
    }
    edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
    max_id = std::max<std::size_t>(max_id, std::max(a, b));
  }
  std::size_t n = edges.empty() ? 0 : max_id + 1;
  if (std::ifstream side(sidecar_path(path)); side) {
    const auto meta = nlohmann::json::parse(side);
    n = std::max<std::size_t>(n, meta.at("num_nodes").get<std::size_t>());
  }
  return Graph::from_edges(n, edges);
}

void write_partition(const PartitionMap& pm, const std::filesystem::path& path, PartitionStrategy strategy) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t v = 0; v < pm.owner.size(); ++v) out << v << ' ' << pm.owner[v] << '\n';
  nlohmann::json meta = {{"parts", pm.parts}, {"strategy", to_string(strategy)}, {"num_nodes", pm.owner.size()}};
  std::ofstream side(sidecar_path(path));
  side << meta.dump(2) << '\n';
}

PartitionMap read_partition(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::pair<std::uint64_t, std::uint64_t>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::uint64_t v = 0;
    std::uint64_t p = 0;
    if (!(fields >> v >> p)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed partition row");
    }
    rows.emplace_back(v, p);
  }
  PartitionMap pm;
  pm.owner.assign(rows.size(), 0);
  PartitionId max_part = 0;
  for (auto [v, p] : rows) {
    if (v >= rows.size()) throw std::runtime_error(path.string() + ": node id out of range");
    pm.owner[v] = static_cast<PartitionId>(p);
    max_part = std::max<PartitionId>(max_part, static_cast<PartitionId>(p));
  }
  pm.parts = max_part + 1;
  if (std::ifstream side(sidecar_path(path)); side) {
    pm.parts = nlohmann::json::parse(side).at("parts").get<PartitionId>();
  }
  return pm;
}

}  // namespace gnnpf
