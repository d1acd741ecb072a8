#include "gnnpf/clock.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gnnpf {

std::string_view to_string(Mode m) noexcept { return m == Mode::Async ? "async" : "sync"; }

Mode parse_mode(std::string_view name) {
  if (name == "async") return Mode::Async;
  if (name == "sync") return Mode::Sync;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "' (valid: async, sync)");
}

void ClockModel::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
  };
  check(alpha, "alpha");
  check(beta, "beta");
  check(gamma, "gamma");
  check(t_infer, "t_infer");
}

double advance_clock(Mode mode, double t_ddp, double t_comm, double t_infer) noexcept {
  if (mode == Mode::Sync) return std::max(t_ddp, t_infer + t_comm);
  const double mb = std::max(t_ddp, t_comm);
  double amortized = t_infer;
  if (mb > 0.0 && t_infer > 0.0) amortized = t_infer / std::ceil(t_infer / mb);
  return std::max(mb, amortized);
}

double barrier(std::span<double> clocks) noexcept {
  if (clocks.empty()) return 0.0;
  const double t = *std::max_element(clocks.begin(), clocks.end());
  std::fill(clocks.begin(), clocks.end(), t);
  return t;
}

}  // namespace gnnpf
