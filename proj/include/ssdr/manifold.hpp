#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ssdr/assoc.hpp"
#include "ssdr/types.hpp"

namespace ssdr {

/// Change of variables turning the constraint B^T X^T X B = I_h into
/// orthonormality: B = transform * V with V^T V = I. `transform` is the
/// reduced p x r map built from the retained eigenpairs of X^T X.
struct WhitenedFrame {
  Matrix transform;   // p x r
  Index rank = 0;     // retained directions
  double ridge = 0.0; // regularization added to X^T X before factorization
};

struct SolverConfig {
  int max_iters = 300;
  double step_init = 1.0;
  double grad_tol = 1e-6;
  int restarts = 5;
  double fd_step = 1e-3;  // finite-difference half-step (bcov gradients)
  std::uint64_t seed = 0;
};

struct SolveDiagnostics {
  int iterations = 0;
  bool converged = false;         // projected gradient norm reached grad_tol
  bool stalled = false;           // line search could not improve
  double grad_norm = 0.0;
  double constraint_residual = 0.0;  // |B^T X^T X B - I|_F / sqrt(h)
  int start_index = 0;               // which restart produced the result
  std::vector<double> objective_trace;  // accepted objective values, ascending
};

struct SdrFit {
  Matrix basis;       // p x h, feasible
  double objective = 0.0;
  SolveDiagnostics diag;
};

WhitenedFrame whiten(const Eigen::Ref<const Matrix>& x);

/// P^2(x b, y) minus the quadratic row penalty (1/2) sum_j pen_j |b_j|^2
/// when a penalty diagonal is supplied.
double objective(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                 const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& b,
                 const Vector* penalty_diag = nullptr);

/// Maximizes the association objective over the generalized Stiefel
/// constraint by Riemannian gradient ascent in the whitened frame with
/// QR retraction and backtracking line search. Best of `restarts` seeded
/// starts; the first start is the cross-moment-informed basis unless an
/// explicit `init` is given.
SdrFit solve_sdr(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                 const Eigen::Ref<const Matrix>& y, Index h, const SolverConfig& cfg,
                 const Vector* penalty_diag = nullptr, const Matrix* init = nullptr);

/// Largest principal angle between the column spans, in [0, pi/2].
double subspace_angle(const Eigen::Ref<const Matrix>& b1,
                      const Eigen::Ref<const Matrix>& b2);

/// Central finite differences of objective() with respect to b.
Matrix gradient_fd(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                   const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& b,
                   double fd_step, const Vector* penalty_diag = nullptr);

/// Analytic gradient of the smoothed objective (dcov and mdd only).
Matrix assoc_grad(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& b);

struct DimensionEstimate {
  Index h = 0;
  std::vector<double> mean_angles;  // per candidate h (1-based candidate order)
  std::vector<int> failures;        // bootstrap fits that errored, per candidate
};

/// rep-indexed row resampler; returns the row indices of one bootstrap draw.
using Resampler = std::function<IndexList(Index h, int rep)>;

/// Bootstrap dimension selection: for each candidate h fit on the full
/// data, refit on n_boot row resamples, and pick the h with the smallest
/// mean largest principal angle (ties toward smaller h).
DimensionEstimate estimate_dimension(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                                     const Eigen::Ref<const Matrix>& y, Index h_max,
                                     int n_boot, const SolverConfig& cfg);

DimensionEstimate estimate_dimension_with(AssocKind kind,
                                          const Eigen::Ref<const Matrix>& x,
                                          const Eigen::Ref<const Matrix>& y, Index h_max,
                                          int n_boot, const SolverConfig& cfg,
                                          const Resampler& resample);

}  // namespace ssdr
