#pragma once

#include <optional>
#include <vector>

#include "ssdr/manifold.hpp"
#include "ssdr/types.hpp"

namespace ssdr {

std::vector<double> make_theta_grid(double lo, double step, double hi);
inline std::vector<double> default_theta_grid() { return make_theta_grid(0.0, 0.01, 0.5); }

/// Adaptive-penalty exponent defaults per statistic.
double default_adaptive_exponent(AssocKind kind);

struct SvsConfig {
  std::vector<double> theta_grid = default_theta_grid();
  std::optional<double> a;   // adaptive exponent; per-statistic default when unset
  double tol = 1e-3;         // convergence / pruning threshold tau
  int max_outer = 200;       // outer iteration bound N
  SolverConfig solver;
  bool continuation = false; // warm-start each theta from the previous solution

  double exponent(AssocKind kind) const {
    return a ? *a : default_adaptive_exponent(kind);
  }
};

enum class SvsStatus { ok, all_variables_eliminated, insufficient_survivors, failed };

const char* to_string(SvsStatus status);

struct SvsResult {
  Matrix basis;                  // p x h; pruned rows are exactly zero
  IndexList active;              // surviving variable indices, ascending
  double theta = 0.0;
  double bic = 0.0;
  double objective = 0.0;        // P^2(X basis, Y)
  int iterations = 0;            // outer iterations used
  IndexList eliminated_order;    // pruned indices in elimination order
  SvsStatus status = SvsStatus::ok;
  bool converged = false;        // subspace angle dropped below tol
};

/// Row weights theta * |B_i|^(-a); near-zero rows get the capped weight.
Vector adaptive_weights(const Eigen::Ref<const Matrix>& b_nonsparse, double theta,
                        double a);

/// Diagonal of the local quadratic approximation of the adaptive row
/// penalty at the current iterate: H_jj = theta * |V_j|^(-a) / |V_j|.
Vector lqa_matrix(const Eigen::Ref<const Matrix>& v_current, double theta, double a);

/// One sparse fit at fixed theta: alternate LQA-penalized constrained
/// solves with row pruning until the subspace stabilizes, then scatter the
/// surviving rows into a p x h basis.
SvsResult svs_fit(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y, Index h, double theta,
                  const SvsConfig& cfg);
SvsResult svs_fit(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y, Index h, double theta,
                  const SvsConfig& cfg, const Matrix& b_nonsparse);

/// log(P^2) - log(n) (p_theta - h) h / n; -inf for failed or nonpositive fits.
double bic_criterion(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                     const Eigen::Ref<const Matrix>& y, const SvsResult& result,
                     Index h);

struct ThetaPathEntry {
  double theta = 0.0;
  double bic = 0.0;
  double objective = 0.0;
  Index active_count = 0;
  int iterations = 0;
  SvsStatus status = SvsStatus::ok;
};

struct ThetaSelection {
  double theta = 0.0;
  SvsResult result;
  std::vector<ThetaPathEntry> path;  // grid order
};

/// Fits every theta on the grid (warm-started from one nonsparse solve)
/// and keeps the BIC argmax; ties go to the larger theta.
ThetaSelection select_theta(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                            const Eigen::Ref<const Matrix>& y, Index h,
                            const SvsConfig& cfg);

struct SelectionMetrics {
  double tpr = 0.0;
  double fpr = 0.0;
  double f1 = 0.0;
};

SelectionMetrics selection_metrics(const IndexList& active, const IndexList& truth,
                                   Index p);

struct LinearPrediction {
  Vector coef;          // intercept followed by latent slopes
  Vector fitted_train;
  Vector predicted;
  double train_mae = 0.0;
  double test_mae = 0.0;  // NaN when no test response was supplied
};

/// OLS of y_train on the latent variables x_train * basis (with intercept),
/// applied to x_test. Errors are summarized by median absolute error.
LinearPrediction predict_linear(const Eigen::Ref<const Matrix>& basis,
                                const Eigen::Ref<const Matrix>& x_train,
                                const Eigen::Ref<const Matrix>& y_train,
                                const Eigen::Ref<const Matrix>& x_test,
                                const Matrix* y_test = nullptr);

}  // namespace ssdr
