#pragma once

#include <cstdint>
#include <vector>

#include "ssdr/rng.hpp"
#include "ssdr/types.hpp"

namespace ssdr {

/// n x n matrix of pairwise Euclidean row distances.
Matrix pairwise_distances(const Eigen::Ref<const Matrix>& data);

/// Double centering: d_kl - rowmean_k - colmean_l + grandmean.
/// Row and column means of the result vanish.
Matrix double_center(const Eigen::Ref<const Matrix>& dist);

/// Squared sample distance covariance between the rows of x and y.
/// Symmetric in its arguments; zero when either side is constant.
double dcov_sq(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y);

/// Squared sample martingale difference divergence of y given xb.
/// Asymmetric: measures departure from conditional mean independence
/// E(y | xb) = E(y).
double mdd_sq(const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& xb);

/// Closed-ball membership indicators: delta(i, j, k) = 1 iff row k lies in
/// the closed ball centered at row i with radius |row_i - row_j|.
struct BallIndicators {
  Index n = 0;
  std::vector<std::uint8_t> delta;  // (i * n + j) * n + k

  std::uint8_t operator()(Index i, Index j, Index k) const {
    return delta[static_cast<std::size_t>((i * n + j) * n + k)];
  }
};

BallIndicators ball_indicators(const Eigen::Ref<const Matrix>& xb);

/// Literal six-index sample ball covariance. O(n^6); oracle use only,
/// rejects n > 10.
double bcov_sq_naive(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y);

/// Squared sample ball covariance via per-pair ball-coverage averages:
///   (1/n^2) sum_ij (D_ij^xy - D_ij^x D_ij^y)^2
/// where D_ij^x is the fraction of points inside ball(i, |i-j|) in the
/// x space, D_ij^y likewise, and D_ij^xy the fraction inside both.
/// Agrees with bcov_sq_naive to machine precision; O(n^3).
double bcov_sq(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y);

/// Dispatch: dcov_sq(xb, y), mdd_sq(y, xb) or bcov_sq(xb, y).
double assoc_sq(AssocKind kind, const Eigen::Ref<const Matrix>& xb,
                const Eigen::Ref<const Matrix>& y);

/// Ball membership bitsets for one metric space, reused across pairings.
struct BallCoverage {
  Index n = 0;
  Index words = 0;                   // 64-bit words per (i, j) slot
  std::vector<std::uint64_t> bits;   // slot (i * n + j), k-th bit = membership
  Vector counts;                     // per-slot popcount
};

BallCoverage ball_coverage(const Matrix& dist);

/// Response-side precomputation for repeated statistic evaluations
/// against a fixed y. eval(xb) equals assoc_sq(kind, xb, y).
class ResponseContext {
 public:
  ResponseContext(AssocKind kind, const Eigen::Ref<const Matrix>& y);

  AssocKind kind() const { return kind_; }
  Index rows() const { return n_; }

  double eval(const Matrix& xb) const;

  /// Gradient of eval with respect to b at xb = x * b, using the smoothed
  /// norm sqrt(|.|^2 + eps^2) on the projected distances. dcov/mdd only.
  Matrix grad(const Matrix& x, const Matrix& xb, double eps = 1e-9) const;

  /// Centered response-side matrix (dcov/mdd only).
  const Matrix& centered() const { return centered_; }

 private:
  AssocKind kind_;
  Index n_;
  Matrix centered_;       // dcov: centered distance matrix; mdd: centered half squared distances
  BallCoverage ball_;     // bcov only
};

/// Permutation p-value of dcov_sq(x, y) under row shuffles of y.
/// p = (1 + #{permuted stat >= observed}) / (n_perm + 1).
double dcov_perm_pvalue(const Eigen::Ref<const Matrix>& x,
                        const Eigen::Ref<const Matrix>& y, int n_perm, Rng& rng);

}  // namespace ssdr
