#pragma once

#include <stdexcept>
#include <string>

namespace mtvqa {

/// Incompatible tensor shapes. Messages name the offending shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sequence that must be nonempty (time axis, batch, context) was empty.
class EmptySequenceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Token id or element index out of range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Tensor of the wrong rank, e.g. a non-scalar passed to backward().
class RankError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Misuse of the autodiff graph (released graph, loss without parameters).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid configuration (schedule, generator, run config).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Checkpoint or dataset could not be loaded.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtvqa
