#include "ssdr/assoc.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace ssdr {

namespace {

constexpr double kNegativeClamp = 1e-12;

void check_data(const Eigen::Ref<const Matrix>& m, const char* name) {
  require(m.rows() >= 1 && m.cols() >= 1, ErrorKind::invalid_input,
          std::string(name) + ": empty matrix");
  require(m.allFinite(), ErrorKind::invalid_input,
          std::string(name) + ": non-finite entries");
}

void check_pair(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y) {
  check_data(x, "x");
  check_data(y, "y");
  require(x.rows() == y.rows(), ErrorKind::invalid_input,
          "row-count mismatch: " + std::to_string(x.rows()) + " vs " +
              std::to_string(y.rows()));
  require(x.rows() >= 2, ErrorKind::invalid_input, "need at least 2 rows");
}

/// Nonnegative statistics may round off slightly negative; clamp the
/// harmless range and reject anything larger.
double clamp_nonnegative(double value, const char* what) {
  if (value >= 0.0) return value;
  require(value >= -kNegativeClamp, ErrorKind::numerical_error,
          std::string(what) + " evaluated to " + std::to_string(value));
  return 0.0;
}

/// (1/n^2) sum_kl center(dist(xb))_kl * centered_kl
double centered_product(const Matrix& xb, const Matrix& centered) {
  const Matrix a = double_center(pairwise_distances(xb));
  const double n = static_cast<double>(xb.rows());
  return a.cwiseProduct(centered).sum() / (n * n);
}

/// Half squared Euclidean distances of the rows of y (mdd response side).
Matrix half_sq_distances(const Eigen::Ref<const Matrix>& y) {
  const Index n = y.rows();
  Matrix g(n, n);
  for (Index k = 0; k < n; ++k) {
    g(k, k) = 0.0;
    for (Index l = k + 1; l < n; ++l) {
      const double d2 = (y.row(k) - y.row(l)).squaredNorm();
      g(k, l) = 0.5 * d2;
      g(l, k) = g(k, l);
    }
  }
  return g;
}

double bcov_from_coverage(const BallCoverage& bx, const BallCoverage& by) {
  const Index n = bx.n;
  const double dn = static_cast<double>(n);
  double acc = 0.0;
  const Index words = bx.words;
  for (Index slot = 0; slot < n * n; ++slot) {
    const std::uint64_t* wx = &bx.bits[static_cast<std::size_t>(slot * words)];
    const std::uint64_t* wy = &by.bits[static_cast<std::size_t>(slot * words)];
    Index joint = 0;
    for (Index w = 0; w < words; ++w) joint += std::popcount(wx[w] & wy[w]);
    const double dxy = static_cast<double>(joint) / dn;
    const double dx = bx.counts[slot] / dn;
    const double dy = by.counts[slot] / dn;
    const double diff = dxy - dx * dy;
    acc += diff * diff;
  }
  return acc / (dn * dn);
}

}  // namespace

const char* to_string(AssocKind kind) {
  switch (kind) {
    case AssocKind::dcov: return "dcov";
    case AssocKind::mdd: return "mdd";
    case AssocKind::bcov: return "bcov";
  }
  return "?";
}

AssocKind assoc_kind_from_string(const std::string& name) {
  if (name == "dcov") return AssocKind::dcov;
  if (name == "mdd") return AssocKind::mdd;
  if (name == "bcov") return AssocKind::bcov;
  fail(ErrorKind::invalid_input, "unknown statistic '" + name + "'");
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "InvalidInput";
    case ErrorKind::numerical_error: return "NumericalError";
    case ErrorKind::oracle_size_exceeded: return "OracleSizeExceeded";
    case ErrorKind::degenerate_design: return "DegenerateDesign";
    case ErrorKind::degenerate_response: return "DegenerateResponse";
    case ErrorKind::invalid_dimension: return "InvalidDimension";
    case ErrorKind::rank_deficient: return "RankDeficient";
    case ErrorKind::no_valid_fit: return "NoValidFit";
    case ErrorKind::invalid_truth: return "InvalidTruth";
    case ErrorKind::singular_fit: return "SingularFit";
    case ErrorKind::parse_error: return "ParseError";
    case ErrorKind::invalid_column: return "InvalidColumn";
    case ErrorKind::empty_after_filter: return "EmptyAfterFilter";
    case ErrorKind::invalid_spec: return "InvalidSpec";
  }
  return "Error";
}

Matrix pairwise_distances(const Eigen::Ref<const Matrix>& data) {
  check_data(data, "data");
  const Index n = data.rows();
  Matrix d(n, n);
  for (Index k = 0; k < n; ++k) {
    d(k, k) = 0.0;
    for (Index l = k + 1; l < n; ++l) {
      d(k, l) = (data.row(k) - data.row(l)).norm();
      d(l, k) = d(k, l);
    }
  }
  return d;
}

Matrix double_center(const Eigen::Ref<const Matrix>& dist) {
  require(dist.rows() == dist.cols(), ErrorKind::invalid_input,
          "double_center: matrix not square");
  check_data(dist, "dist");
  const Vector row_means = dist.rowwise().mean();
  const Eigen::RowVectorXd col_means = dist.colwise().mean();
  const double grand = dist.mean();
  Matrix out = dist;
  out.colwise() -= row_means;
  out.rowwise() -= col_means;
  out.array() += grand;
  return out;
}

double dcov_sq(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y) {
  check_pair(x, y);
  const Matrix c = double_center(pairwise_distances(y));
  return clamp_nonnegative(centered_product(x, c), "dcov_sq");
}

double mdd_sq(const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& xb) {
  check_pair(xb, y);
  const Matrix g = double_center(half_sq_distances(y));
  return clamp_nonnegative(centered_product(xb, g), "mdd_sq");
}

BallIndicators ball_indicators(const Eigen::Ref<const Matrix>& xb) {
  check_data(xb, "xb");
  require(xb.rows() >= 2, ErrorKind::invalid_input, "need at least 2 rows");
  const Matrix d = pairwise_distances(xb);
  const Index n = xb.rows();
  BallIndicators ind;
  ind.n = n;
  ind.delta.assign(static_cast<std::size_t>(n * n * n), 0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double radius = d(i, j);
      std::uint8_t* slot = &ind.delta[static_cast<std::size_t>((i * n + j) * n)];
      for (Index k = 0; k < n; ++k) slot[k] = d(k, i) <= radius ? 1 : 0;
    }
  return ind;
}

double bcov_sq_naive(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y) {
  check_pair(x, y);
  const Index n = x.rows();
  require(n <= 10, ErrorKind::oracle_size_exceeded,
          "bcov_sq_naive is O(n^6); n = " + std::to_string(n) + " > 10");
  const BallIndicators dx = ball_indicators(x);
  const BallIndicators dy = ball_indicators(y);
  double acc = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index l = 0; l < n; ++l)
          for (Index s = 0; s < n; ++s)
            for (Index t = 0; t < n; ++t) {
              const double xi_x =
                  0.5 * (dx(i, j, k) * dx(i, j, l) + dx(i, j, s) * dx(i, j, t) -
                         dx(i, j, k) * dx(i, j, s) - dx(i, j, l) * dx(i, j, t));
              const double xi_y =
                  0.5 * (dy(i, j, k) * dy(i, j, l) + dy(i, j, s) * dy(i, j, t) -
                         dy(i, j, k) * dy(i, j, s) - dy(i, j, l) * dy(i, j, t));
              acc += xi_x * xi_y;
            }
  const double dn = static_cast<double>(n);
  return clamp_nonnegative(acc / (dn * dn * dn * dn * dn * dn), "bcov_sq_naive");
}

BallCoverage ball_coverage(const Matrix& dist) {
  const Index n = dist.rows();
  BallCoverage cov;
  cov.n = n;
  cov.words = (n + 63) / 64;
  cov.bits.assign(static_cast<std::size_t>(n * n * cov.words), 0);
  cov.counts = Vector::Zero(n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double radius = dist(i, j);
      const Index slot = i * n + j;
      std::uint64_t* words = &cov.bits[static_cast<std::size_t>(slot * cov.words)];
      Index count = 0;
      for (Index k = 0; k < n; ++k) {
        if (dist(k, i) <= radius) {
          words[k >> 6] |= std::uint64_t(1) << (k & 63);
          ++count;
        }
      }
      cov.counts[slot] = static_cast<double>(count);
    }
  return cov;
}

double bcov_sq(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y) {
  check_pair(x, y);
  const BallCoverage bx = ball_coverage(pairwise_distances(x));
  const BallCoverage by = ball_coverage(pairwise_distances(y));
  return clamp_nonnegative(bcov_from_coverage(bx, by), "bcov_sq");
}

double assoc_sq(AssocKind kind, const Eigen::Ref<const Matrix>& xb,
                const Eigen::Ref<const Matrix>& y) {
  switch (kind) {
    case AssocKind::dcov: return dcov_sq(xb, y);
    case AssocKind::mdd: return mdd_sq(y, xb);
    case AssocKind::bcov: return bcov_sq(xb, y);
  }
  fail(ErrorKind::invalid_input, "bad AssocKind");
}

ResponseContext::ResponseContext(AssocKind kind, const Eigen::Ref<const Matrix>& y)
    : kind_(kind), n_(y.rows()) {
  check_data(y, "y");
  require(n_ >= 2, ErrorKind::invalid_input, "need at least 2 rows");
  switch (kind_) {
    case AssocKind::dcov:
      centered_ = double_center(pairwise_distances(y));
      break;
    case AssocKind::mdd:
      centered_ = double_center(half_sq_distances(y));
      break;
    case AssocKind::bcov:
      ball_ = ball_coverage(pairwise_distances(y));
      break;
  }
}

double ResponseContext::eval(const Matrix& xb) const {
  require(xb.rows() == n_, ErrorKind::invalid_input, "row-count mismatch");
  if (kind_ == AssocKind::bcov) {
    const BallCoverage bx = ball_coverage(pairwise_distances(xb));
    return clamp_nonnegative(bcov_from_coverage(bx, ball_), "bcov_sq");
  }
  return clamp_nonnegative(centered_product(xb, centered_),
                           kind_ == AssocKind::dcov ? "dcov_sq" : "mdd_sq");
}

Matrix ResponseContext::grad(const Matrix& x, const Matrix& xb, double eps) const {
  require(kind_ != AssocKind::bcov, ErrorKind::invalid_input,
          "no analytic gradient for bcov");
  const Index n = n_;
  // w_kl = M_kl / sqrt(|z_k - z_l|^2 + eps^2); gradient of the smoothed
  // objective is (2/n^2) X^T (diag(w 1) - w) Z.
  Matrix w(n, n);
  for (Index k = 0; k < n; ++k) {
    w(k, k) = 0.0;
    for (Index l = k + 1; l < n; ++l) {
      const double d2 = (xb.row(k) - xb.row(l)).squaredNorm();
      const double smooth = std::sqrt(d2 + eps * eps);
      w(k, l) = centered_(k, l) / smooth;
      w(l, k) = centered_(l, k) / smooth;
    }
  }
  const Vector row_sums = w.rowwise().sum();
  const Matrix scaled = row_sums.asDiagonal() * xb - w * xb;
  const double dn = static_cast<double>(n);
  return (2.0 / (dn * dn)) * (x.transpose() * scaled);
}

double dcov_perm_pvalue(const Eigen::Ref<const Matrix>& x,
                        const Eigen::Ref<const Matrix>& y, int n_perm, Rng& rng) {
  check_pair(x, y);
  require(n_perm >= 1, ErrorKind::invalid_input, "n_perm must be positive");
  const Index n = x.rows();
  const Matrix a = double_center(pairwise_distances(x));
  const Matrix c = double_center(pairwise_distances(y));
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  const double observed = a.cwiseProduct(c).sum() / n2;

  IndexList perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  int at_least = 0;
  for (int r = 0; r < n_perm; ++r) {
    rng.shuffle(perm);
    double acc = 0.0;
    for (Index k = 0; k < n; ++k) {
      const Index pk = perm[static_cast<std::size_t>(k)];
      for (Index l = 0; l < n; ++l)
        acc += a(k, l) * c(pk, perm[static_cast<std::size_t>(l)]);
    }
    if (acc / n2 >= observed) ++at_least;
  }
  return static_cast<double>(1 + at_least) / static_cast<double>(n_perm + 1);
}

}  // namespace ssdr
