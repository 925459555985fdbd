#pragma once

#include <stdexcept>
#include <string>

namespace nhld {

enum class errc {
  invalid_spec,          // bad input: non-stochastic rows, malformed files, bad flags
  not_stochastic,        // row-sum check failed
  not_irreducible,       // operation requires an irreducible submatrix
  not_converged,         // iterative solver exhausted its budget
  out_of_range,          // index/time outside a table with no tail
  budget_exceeded,       // oracle memory/work budget exceeded
  unsupported_dimension  // observable dimension outside what the op supports
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::invalid_spec: return "invalid-spec";
    case errc::not_stochastic: return "not-stochastic";
    case errc::not_irreducible: return "not-irreducible";
    case errc::not_converged: return "not-converged";
    case errc::out_of_range: return "out-of-range";
    case errc::budget_exceeded: return "budget-exceeded";
    case errc::unsupported_dimension: return "unsupported-dimension";
  }
  return "unknown";
}

class error : public std::runtime_error {
 public:
  error(errc c, const std::string& what)
      : std::runtime_error(std::string("error[") + errc_name(c) + "]: " + what), code_(c) {}
  errc code() const { return code_; }

  // CLI contract: 1 = spec/validation, 2 = numerical non-convergence, 3 = budget.
  int exit_code() const {
    switch (code_) {
      case errc::not_converged: return 2;
      case errc::budget_exceeded: return 3;
      default: return 1;
    }
  }

 private:
  errc code_;
};

}  // namespace nhld
