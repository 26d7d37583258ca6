#pragma once

#include <stdexcept>
#include <string>

namespace jbsde {

// Generator evaluated outside the set where it is finitely defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Numerical failure inside a solver: non-contracting Picard map, lattice
// over the size guard, rank-deficient regression, optimizer or quadrature
// non-convergence.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scenario configuration that does not parse or validate.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}

  int line() const { return line_; }

 private:
  int line_ = 0;
};

}  // namespace jbsde
