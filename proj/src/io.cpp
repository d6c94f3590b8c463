#include "ssdr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ssdr/assoc.hpp"
#include "ssdr/parallel.hpp"
#include "ssdr/rng.hpp"

namespace ssdr {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_cell(const std::string& cell, std::size_t line_no,
                  const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    fail(ErrorKind::parse_error, "line " + std::to_string(line_no) + ", column '" +
                                     column + "': invalid numeric '" + cell + "'");
  return value;
}

struct Table {
  std::vector<std::string> names;
  Matrix values;
};

Table read_table(const std::string& path) {
  std::ifstream file(path);
  require(file.good(), ErrorKind::parse_error, "cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(file, line)), ErrorKind::parse_error,
          "'" + path + "': missing header row");
  Table table;
  table.names = split_line(line);
  require(!table.names.empty(), ErrorKind::parse_error,
          "'" + path + "': empty header row");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    require(fields.size() == table.names.size(), ErrorKind::parse_error,
            "line " + std::to_string(line_no) + ": expected " +
                std::to_string(table.names.size()) + " fields, got " +
                std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j)
      row[j] = parse_cell(fields[j], line_no, table.names[j]);
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorKind::parse_error, "'" + path + "': no data rows");

  table.values.resize(static_cast<Index>(rows.size()),
                      static_cast<Index>(table.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      table.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return table;
}

Index resolve_column(const std::vector<std::string>& names, const std::string& ref) {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == ref) return static_cast<Index>(j);
  // Fall back to a 1-based index.
  int idx = 0;
  const auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), idx);
  if (ec == std::errc() && ptr == ref.data() + ref.size() && idx >= 1 &&
      idx <= static_cast<int>(names.size()))
    return static_cast<Index>(idx - 1);
  fail(ErrorKind::invalid_column, "no column '" + ref + "'");
}

}  // namespace

std::string format_double(double value) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

CsvData read_csv(const std::string& path, const std::string& response) {
  const Table table = read_table(path);
  const Index y_col = resolve_column(table.names, response);
  require(table.names.size() >= 2, ErrorKind::parse_error,
          "'" + path + "': need at least one predictor besides the response");

  CsvData data;
  data.y = table.values.col(y_col);
  data.y_name = table.names[static_cast<std::size_t>(y_col)];
  data.x.resize(table.values.rows(), table.values.cols() - 1);
  Index out = 0;
  for (Index j = 0; j < table.values.cols(); ++j) {
    if (j == y_col) continue;
    data.x.col(out++) = table.values.col(j);
    data.x_names.push_back(table.names[static_cast<std::size_t>(j)]);
  }
  return data;
}

Matrix read_matrix_csv(const std::string& path, std::vector<std::string>* names) {
  Table table = read_table(path);
  if (names) *names = std::move(table.names);
  return std::move(table.values);
}

void write_matrix_csv(const std::string& path, const Eigen::Ref<const Matrix>& m,
                      const std::vector<std::string>& names) {
  require(static_cast<Index>(names.size()) == m.cols(), ErrorKind::invalid_input,
          "column name count mismatch");
  std::ofstream file(path);
  require(file.good(), ErrorKind::parse_error, "cannot write '" + path + "'");
  for (std::size_t j = 0; j < names.size(); ++j)
    file << (j ? "," : "") << names[j];
  file << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j)
      file << (j ? "," : "") << format_double(m(i, j));
    file << "\n";
  }
  require(file.good(), ErrorKind::parse_error, "write to '" + path + "' failed");
}

FilterOp filter_op_from_string(const std::string& name) {
  if (name == "gt") return FilterOp::gt;
  if (name == "lt") return FilterOp::lt;
  if (name == "ge") return FilterOp::ge;
  if (name == "le") return FilterOp::le;
  fail(ErrorKind::invalid_input, "unknown filter op '" + name + "'");
}

const char* to_string(FilterOp op) {
  switch (op) {
    case FilterOp::gt: return "gt";
    case FilterOp::lt: return "lt";
    case FilterOp::ge: return "ge";
    case FilterOp::le: return "le";
  }
  return "?";
}

void apply_row_filter(Matrix& x, Matrix& y, const Vector& values, FilterOp op,
                      double threshold) {
  require(values.size() == x.rows() && x.rows() == y.rows(),
          ErrorKind::invalid_input, "filter column length mismatch");
  std::vector<Index> keep;
  for (Index i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const bool ok = op == FilterOp::gt   ? v > threshold
                    : op == FilterOp::lt ? v < threshold
                    : op == FilterOp::ge ? v >= threshold
                                         : v <= threshold;
    if (ok) keep.push_back(i);
  }
  require(!keep.empty(), ErrorKind::empty_after_filter,
          "filter removed every row");
  Matrix xf(static_cast<Index>(keep.size()), x.cols());
  Matrix yf(static_cast<Index>(keep.size()), y.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    xf.row(static_cast<Index>(i)) = x.row(keep[i]);
    yf.row(static_cast<Index>(i)) = y.row(keep[i]);
  }
  x = std::move(xf);
  y = std::move(yf);
}

void filter_rows(CsvData& data, const std::string& column, FilterOp op,
                 double threshold) {
  Vector values;
  bool found = false;
  for (std::size_t j = 0; j < data.x_names.size(); ++j) {
    if (data.x_names[j] == column) {
      values = data.x.col(static_cast<Index>(j));
      found = true;
      break;
    }
  }
  if (!found && column == data.y_name) {
    values = data.y.col(0);
    found = true;
  }
  require(found, ErrorKind::invalid_column, "no column '" + column + "'");
  apply_row_filter(data.x, data.y, values, op, threshold);
}

IndexList screen_variables(const Eigen::Ref<const Matrix>& x,
                           const Eigen::Ref<const Matrix>& y, double alpha,
                           int n_perm, std::uint64_t seed) {
  require(n_perm >= 99, ErrorKind::invalid_input, "need n_perm >= 99");
  require(alpha > 0.0, ErrorKind::invalid_input, "alpha must be positive");
  const Index p = x.cols();
  std::vector<double> pvalues(static_cast<std::size_t>(p));
  parallel_for(p, [&](Index j) {
    Rng rng(Rng::mix(seed, 0x5C4EE0ULL + static_cast<std::uint64_t>(j)));
    pvalues[static_cast<std::size_t>(j)] = dcov_perm_pvalue(x.col(j), y, n_perm, rng);
  });
  IndexList retained;
  for (Index j = 0; j < p; ++j)
    if (alpha >= 1.0 || pvalues[static_cast<std::size_t>(j)] < alpha)
      retained.push_back(j);
  return retained;
}

}  // namespace ssdr
