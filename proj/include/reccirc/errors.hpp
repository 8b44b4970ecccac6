#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reccirc {

using GateId = std::size_t;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised for arity/length mismatches between a call and the artifact it targets.
struct ArityError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct EvalError : Error {
  GateId gate;
  EvalError(GateId g, const std::string& what)
      : Error("gate " + std::to_string(g) + ": " + what), gate(g) {}
};

struct CompileError : Error {
  using Error::Error;
};

}  // namespace reccirc
