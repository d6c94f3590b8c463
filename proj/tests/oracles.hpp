#pragma once

// Brute-force reference implementations, written symbol by symbol from the
// defining sums. They share no code with the library paths they check.

#include <cmath>
#include <vector>

#include "ssdr/rng.hpp"
#include "ssdr/types.hpp"

namespace oracle {

using ssdr::Index;
using ssdr::Matrix;
using ssdr::Vector;

inline double row_distance(const Matrix& m, Index k, Index l) {
  double acc = 0.0;
  for (Index j = 0; j < m.cols(); ++j) {
    const double d = m(k, j) - m(l, j);
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline Matrix distances_by_loop(const Matrix& m) {
  const Index n = m.rows();
  Matrix d(n, n);
  for (Index k = 0; k < n; ++k)
    for (Index l = 0; l < n; ++l) d(k, l) = row_distance(m, k, l);
  return d;
}

inline Matrix center_by_loop(const Matrix& a) {
  const Index n = a.rows();
  Matrix out(n, n);
  double grand = 0.0;
  std::vector<double> row_mean(static_cast<std::size_t>(n), 0.0);
  std::vector<double> col_mean(static_cast<std::size_t>(n), 0.0);
  for (Index k = 0; k < n; ++k)
    for (Index l = 0; l < n; ++l) {
      row_mean[static_cast<std::size_t>(k)] += a(k, l) / static_cast<double>(n);
      col_mean[static_cast<std::size_t>(l)] += a(k, l) / static_cast<double>(n);
      grand += a(k, l) / static_cast<double>(n * n);
    }
  for (Index k = 0; k < n; ++k)
    for (Index l = 0; l < n; ++l)
      out(k, l) = a(k, l) - row_mean[static_cast<std::size_t>(k)] -
                  col_mean[static_cast<std::size_t>(l)] + grand;
  return out;
}

/// (1/n^2) sum_kl A_kl C_kl with both sides centered by explicit loops.
inline double dcov_by_loop(const Matrix& x, const Matrix& y) {
  const Index n = x.rows();
  const Matrix a = center_by_loop(distances_by_loop(x));
  const Matrix c = center_by_loop(distances_by_loop(y));
  double acc = 0.0;
  for (Index k = 0; k < n; ++k)
    for (Index l = 0; l < n; ++l) acc += a(k, l) * c(k, l);
  return acc / static_cast<double>(n * n);
}

/// Four-term V-statistic route: E|dx||dy| + E|dx| E|dy| - 2 E_k[E_l|dx| E_m|dy|].
inline double dcov_by_vstat(const Matrix& x, const Matrix& y) {
  const Index n = x.rows();
  const double dn = static_cast<double>(n);
  double t1 = 0.0, ax = 0.0, ay = 0.0, t3 = 0.0;
  for (Index k = 0; k < n; ++k)
    for (Index l = 0; l < n; ++l) {
      const double dx = row_distance(x, k, l);
      const double dy = row_distance(y, k, l);
      t1 += dx * dy;
      ax += dx;
      ay += dy;
    }
  t1 /= dn * dn;
  ax /= dn * dn;
  ay /= dn * dn;
  for (Index k = 0; k < n; ++k) {
    double rx = 0.0, ry = 0.0;
    for (Index l = 0; l < n; ++l) {
      rx += row_distance(x, k, l);
      ry += row_distance(y, k, l);
    }
    t3 += (rx / dn) * (ry / dn);
  }
  t3 /= dn;
  return t1 + ax * ay - 2.0 * t3;
}

/// Conditional-mean divergence by explicit loops: the response side uses
/// half squared distances.
inline double mdd_by_loop(const Matrix& y, const Matrix& xb) {
  const Index n = y.rows();
  const Matrix a = center_by_loop(distances_by_loop(xb));
  Matrix g(n, n);
  for (Index k = 0; k < n; ++k)
    for (Index l = 0; l < n; ++l) {
      const double d = row_distance(y, k, l);
      g(k, l) = 0.5 * d * d;
    }
  const Matrix gc = center_by_loop(g);
  double acc = 0.0;
  for (Index k = 0; k < n; ++k)
    for (Index l = 0; l < n; ++l) acc += a(k, l) * gc(k, l);
  return acc / static_cast<double>(n * n);
}

inline std::vector<int> ball_by_loop(const Matrix& m) {
  const Index n = m.rows();
  std::vector<int> delta(static_cast<std::size_t>(n * n * n), 0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k)
        delta[static_cast<std::size_t>((i * n + j) * n + k)] =
            row_distance(m, k, i) <= row_distance(m, i, j) ? 1 : 0;
  return delta;
}

inline Matrix random_matrix(ssdr::Rng& rng, Index rows, Index cols,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace oracle
