#pragma once

#include <stdexcept>
#include <string>

namespace degfair {

// Bad argument to a library call (sizes, ranges, shapes).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed input text (non-integer id, wrong field count).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Well-formed input files that disagree with each other.
struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Operation invoked in the wrong lifecycle state (double backward, missing grads).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorruptFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss during training.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace degfair
