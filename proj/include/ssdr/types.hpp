#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssdr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Association statistic used as the projection objective.
enum class AssocKind { dcov, mdd, bcov };

const char* to_string(AssocKind kind);
AssocKind assoc_kind_from_string(const std::string& name);

enum class ErrorKind {
  invalid_input,
  numerical_error,
  oracle_size_exceeded,
  degenerate_design,
  degenerate_response,
  invalid_dimension,
  rank_deficient,
  no_valid_fit,
  invalid_truth,
  singular_fit,
  parse_error,
  invalid_column,
  empty_after_filter,
  invalid_spec,
};

const char* to_string(ErrorKind kind);

/// Thrown by all library entry points. `kind()` keeps failures
/// machine-distinguishable so the CLI can map them to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) fail(kind, message);
}

}  // namespace ssdr
