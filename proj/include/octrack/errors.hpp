#pragma once

#include <stdexcept>
#include <string>

namespace octrack {

/// Base class for all octrack errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error { using Error::Error; };
struct UnknownNeighbor   : Error { using Error::Error; };
struct NegativeWeight    : Error { using Error::Error; };

// Synthesis failures.
struct NotSolvable     : Error { using Error::Error; };
struct NoConvergence   : Error { using Error::Error; };
struct ResonantSpectra : Error { using Error::Error; };
struct SingularSystem  : Error { using Error::Error; };
struct NotDetectable   : Error { using Error::Error; };

// Simulation failures.
struct NotInvertible     : Error { using Error::Error; };
struct NonfiniteInput    : Error { using Error::Error; };
struct NonfiniteState    : Error { using Error::Error; };
struct RequiresNoiseFree : Error { using Error::Error; };

/// Scenario/gain file parse failure with 1-based source location.
struct ParseError : Error {
  int line;
  int column;
  ParseError(const std::string& msg, int line_, int column_)
      : Error(msg + " (line " + std::to_string(line_) + ", column " +
              std::to_string(column_) + ")"),
        line(line_),
        column(column_) {}
};

}  // namespace octrack
