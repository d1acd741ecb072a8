#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gnnpf/types.hpp"

namespace gnnpf {

/// Undirected graph in compressed sparse row form. Every undirected edge is
/// stored once per direction, so `num_edges()` counts adjacency entries.
struct Graph {
  std::vector<std::uint64_t> offsets{0};
  std::vector<NodeId> neighbors;

  std::size_t num_nodes() const noexcept { return offsets.size() - 1; }
  std::size_t num_edges() const noexcept { return neighbors.size(); }
  std::size_t degree(NodeId v) const noexcept { return offsets[v + 1] - offsets[v]; }
  std::span<const NodeId> adjacent(NodeId v) const noexcept {
    return {neighbors.data() + offsets[v], degree(v)};
  }

  /// Builds CSR from an undirected edge list. Self-loops and duplicate
  /// edges are dropped; neighbor lists are sorted.
  static Graph from_edges(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges);

  /// Throws std::logic_error naming the violated CSR invariant.
  void validate() const;

  friend bool operator==(const Graph&, const Graph&) = default;
};

struct GeneratorParams {
  std::size_t nodes = 0;
  std::size_t avg_degree = 0;
  double skew = 2.1;
  Seed seed = 0;
};

/// Power-law graph via configuration-model stub matching. Self-loops and
/// multi-edges are removed, stray components are attached to the largest
/// one, and the edge count is topped up towards nodes*avg_degree entries.
/// Throws std::invalid_argument on bad parameters, SizeError when the edge
/// target overflows.
Graph generate_graph(const GeneratorParams& params);

inline Graph generate_graph(std::size_t n, std::size_t avg_degree, double skew, Seed seed) {
  return generate_graph(GeneratorParams{n, avg_degree, skew, seed});
}

/// Size of each connected component, largest first.
std::vector<std::size_t> component_sizes(const Graph& g);

enum class PartitionStrategy { Hash, Range, GreedyEdgeCut };

std::string_view to_string(PartitionStrategy s) noexcept;
PartitionStrategy parse_partition_strategy(std::string_view name);

struct PartitionMap {
  std::vector<PartitionId> owner;
  PartitionId parts = 1;

  std::size_t num_nodes() const noexcept { return owner.size(); }
  bool is_remote(NodeId v, PartitionId local) const noexcept { return owner[v] != local; }
  std::vector<NodeId> owned_by(PartitionId p) const;
  std::vector<std::size_t> sizes() const;

  friend bool operator==(const PartitionMap&, const PartitionMap&) = default;
};

/// Assigns every node to one of `parts` trainers. GreedyEdgeCut grows
/// balanced partitions by BFS, each capped at ceil(n / parts) nodes.
PartitionMap partition_graph(const Graph& g, std::size_t parts, PartitionStrategy strategy);

/// Number of undirected edges whose endpoints have different owners.
std::size_t edge_cut(const Graph& g, const PartitionMap& pm);

/// Directed adjacency entries with both endpoints owned by `p`.
std::size_t partition_edge_count(const Graph& g, const PartitionMap& pm, PartitionId p);

/// Distinct remote nodes adjacent to nodes owned by `p` (the partition's
/// halo). Buffer capacity is a percentage of this count.
std::size_t halo_size(const Graph& g, const PartitionMap& pm, PartitionId p);

/// Seeded draw of ceil(fraction * |owned|) training nodes from partition
/// `p`, returned in ascending id order.
std::vector<NodeId> select_train_nodes(const PartitionMap& pm, PartitionId p, double fraction, Seed seed);

/// Per-epoch shuffle of the training nodes split into batches of
/// `batch_size`; the last batch may be short.
std::vector<std::vector<NodeId>> make_minibatches(std::span<const NodeId> train_nodes, std::size_t batch_size,
                                                  Seed epoch_seed);

struct SampleBatch {
  std::vector<NodeId> seeds;
  /// layers[0] holds the seeds; layers[k + 1] the distinct neighbors drawn
  /// from layers[k]. Order is first-draw order.
  std::vector<std::vector<NodeId>> layers;
  /// Deduplicated union of all layers in first-seen order.
  std::vector<NodeId> all_nodes;
  /// How many times each all_nodes entry was drawn (seeds count once).
  std::vector<std::uint32_t> multiplicity;
  std::size_t epoch = 0;
  std::size_t minibatch_index = 0;

  friend bool operator==(const SampleBatch&, const SampleBatch&) = default;
};

/// Layered fanout sampling: each frontier node at hop k contributes
/// min(degree, fanouts[k]) neighbors drawn uniformly without replacement.
SampleBatch sample_neighbors(const Graph& g, std::span<const NodeId> seeds, std::span<const std::size_t> fanouts,
                             Rng& rng);

struct LocalRemoteSplit {
  std::vector<NodeId> local;
  std::vector<NodeId> remote;
  /// Draw multiplicity for each entry of `remote`.
  std::vector<std::uint32_t> remote_multiplicity;
};

LocalRemoteSplit split_local_remote(const SampleBatch& s, const PartitionMap& pm, PartitionId local);

/// Count of never-before-seen remote nodes in each minibatch of one epoch.
std::vector<std::size_t> new_remote_per_minibatch(const Graph& g, const PartitionMap& pm, PartitionId local,
                                                  std::span<const std::vector<NodeId>> batches,
                                                  std::span<const std::size_t> fanouts, Seed seed);

/// Applies a node relabeling: node v becomes perm[v]. Neighbor order within
/// each list is preserved (not re-sorted) so positional sampling commutes
/// with relabeling.
Graph relabel(const Graph& g, std::span<const NodeId> perm);

// Edge-list files: one "src dst" pair per line (each undirected edge once),
// plus a JSON sidecar at <path>.meta.json with the node count and generator
// parameters.
void write_edge_list(const Graph& g, const std::filesystem::path& path, const GeneratorParams* params = nullptr);
Graph read_edge_list(const std::filesystem::path& path);

// Partition files: one "node owner" pair per line, sidecar carries P and the
// strategy.
void write_partition(const PartitionMap& pm, const std::filesystem::path& path, PartitionStrategy strategy);
PartitionMap read_partition(const std::filesystem::path& path);

}  // namespace gnnpf
