#ifndef SUBNORM_ERRORS_HPP
#define SUBNORM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace subnorm {

// Mode index outside [0, K).
struct ModeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Incompatible dimensions between tensors, matrices or shapes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid scalar parameter (negative threshold, rank out of range, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed tensor file or config file. The message carries line/offset.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace subnorm

#endif  // SUBNORM_ERRORS_HPP
