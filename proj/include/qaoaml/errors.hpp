#pragma once

#include <stdexcept>
#include <string>

namespace qaoaml {

/// Precondition on an argument violated (bad parameter range, size mismatch).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Request exceeds a hard resource cap (qubit count, brute-force size).
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A metered objective was asked for more evaluations than its budget.
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration (config file, missing models).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qaoaml
