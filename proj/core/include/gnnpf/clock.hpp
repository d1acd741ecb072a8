#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace gnnpf {

enum class Mode { Async, Sync };

std::string_view to_string(Mode m) noexcept;
Mode parse_mode(std::string_view name);

/// Simulated cost coefficients, all >= 0.
struct ClockModel {
  double alpha = 0.01;   // per training node
  double beta = 0.02;    // per fetched remote node
  double gamma = 1.0;    // per fetch round with a nonzero volume
  double t_infer = 5.0;  // decision latency

  /// Throws std::invalid_argument naming the negative coefficient.
  void validate() const;

  double ddp_time(std::size_t minibatch_nodes) const noexcept { return alpha * static_cast<double>(minibatch_nodes); }
  double comm_time(std::uint64_t fetched) const noexcept {
    return fetched > 0 ? beta * static_cast<double>(fetched) + gamma : 0.0;
  }
};

/// Elapsed time of one minibatch.
///   async: max(t_ddp, t_comm, t_infer amortized over the minibatches it
///          spans)
///   sync:  max(t_ddp, t_infer + t_comm)
double advance_clock(Mode mode, double t_ddp, double t_comm, double t_infer) noexcept;

/// Aligns every clock to the slowest one and returns that time. Empty
/// input returns 0.
double barrier(std::span<double> clocks) noexcept;

}  // namespace gnnpf
