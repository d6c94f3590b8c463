#pragma once

#include <string>
#include <vector>

#include "ssdr/types.hpp"

namespace ssdr {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

struct CsvData {
  Matrix x;
  Matrix y;  // n x 1
  std::vector<std::string> x_names;
  std::string y_name;
};

/// Strict numeric CSV: header row, comma separated, every cell finite.
/// `response` is a header name or a 1-based column index.
CsvData read_csv(const std::string& path, const std::string& response);

/// Reads the whole file as one matrix (header row required).
Matrix read_matrix_csv(const std::string& path,
                       std::vector<std::string>* names = nullptr);

void write_matrix_csv(const std::string& path, const Eigen::Ref<const Matrix>& m,
                      const std::vector<std::string>& names);

enum class FilterOp { gt, lt, ge, le };

FilterOp filter_op_from_string(const std::string& name);
const char* to_string(FilterOp op);

/// Keeps the rows whose value in `column` satisfies (value op threshold);
/// x and y are filtered jointly. Column resolves against the predictor
/// names, then the response name.
void filter_rows(CsvData& data, const std::string& column, FilterOp op,
                 double threshold);

/// Keep-predicate row filter on explicit column values.
void apply_row_filter(Matrix& x, Matrix& y, const Vector& values, FilterOp op,
                      double threshold);

/// Marginal permutation screen: per predictor column, the permutation
/// p-value of its distance covariance with y; retains p < alpha
/// (alpha >= 1 retains everything).
IndexList screen_variables(const Eigen::Ref<const Matrix>& x,
                           const Eigen::Ref<const Matrix>& y, double alpha,
                           int n_perm, std::uint64_t seed);

}  // namespace ssdr
