#pragma once

#include <stdexcept>
#include <string>

namespace xorreach {

// Argument or index outside the valid domain.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// A size limit (word size, desk-scale cap, enumeration budget) was exceeded.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Operation invoked in the wrong lifecycle state (e.g. epochs out of order).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An edge labeling does not cover every edge of its graph.
class IncompleteLabelingError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// Too few Monte-Carlo samples to estimate a quantity.
class PrecisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xorreach
