#include "test_graphs.hpp"

namespace gnnpf::testing {

World make_world(const RunConfig& cfg) {
  World w;
  w.graph = generate_graph(cfg.graph.nodes, cfg.graph.avg_degree, cfg.graph.skew, cfg.graph.seed);
  w.partition = partition_graph(w.graph, cfg.partitions, cfg.partition_strategy);
  return w;
}

RunConfig small_config() {
  RunConfig cfg;
  cfg.graph.nodes = 600;
  cfg.graph.avg_degree = 6;
  cfg.graph.seed = 3;
  cfg.partitions = 2;
  cfg.partition_strategy = PartitionStrategy::Hash;
  cfg.train_fraction = 0.3;
  cfg.batch_size = 10;
  cfg.fanouts = {4, 4};
  cfg.epochs = 2;
  cfg.seed = 11;
  cfg.clock = ClockModel{1.0, 0.5, 1.0, 1.0};
  cfg.controller.kind = ControllerKind::Fixed;
  return cfg;
}

RunConfig acceptance_config() {
  RunConfig cfg;
  cfg.graph.nodes = 10'000;
  cfg.graph.avg_degree = 5;
  cfg.graph.skew = 3.0;
  cfg.graph.seed = 7;
  cfg.partitions = 4;
  cfg.partition_strategy = PartitionStrategy::Hash;
  cfg.train_fraction = 0.5;
  cfg.buffer_pct = 25.0;
  cfg.batch_size = 32;
  cfg.fanouts = {5, 10};
  cfg.epochs = 5;
  cfg.seed = 42;
  cfg.clock = ClockModel{1.0, 0.5, 1.0, 1.0};
  cfg.controller.window = 5;
  cfg.controller.min_gain = 1.0;
  return cfg;
}

Graph path_graph(std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(i + 1));
  return Graph::from_edges(n, edges);
}

Graph star_graph(std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back(0, static_cast<NodeId>(i));
  return Graph::from_edges(n, edges);
}

}  // namespace gnnpf::testing
