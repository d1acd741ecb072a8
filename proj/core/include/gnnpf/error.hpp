#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace gnnpf {

/// Input rejected because it would not fit the in-memory representation.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Training data without enough signal (e.g. a single label class).
class DegenerateDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration field failed validation. `field()` names the offending
/// key using dotted paths, e.g. "controller.kind".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Trace could not be recorded or read back.
class TraceError : public std::runtime_error {
 public:
  enum class Kind { Ordering, Schema, Corrupt, Truncated, Capacity, Io };

  TraceError(Kind kind, const std::string& message, std::uint64_t last_good_seq = 0)
      : std::runtime_error(message), kind_(kind), last_good_seq_(last_good_seq) {}

  Kind kind() const noexcept { return kind_; }
  /// Sequence number of the last event read successfully (0 when none).
  std::uint64_t last_good_seq() const noexcept { return last_good_seq_; }

 private:
  Kind kind_;
  std::uint64_t last_good_seq_;
};

/// The simulated pipeline stopped making progress (e.g. the inference task
/// was never resumed).
class PipelineStall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gnnpf
