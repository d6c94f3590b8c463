#include "ssdr/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <string>

#include "ssdr/parallel.hpp"
#include "ssdr/rng.hpp"

namespace ssdr {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-14;

void check_xy(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y) {
  require(x.rows() >= 2 && x.cols() >= 1, ErrorKind::invalid_input, "x too small");
  require(x.allFinite() && y.allFinite(), ErrorKind::invalid_input,
          "non-finite entries");
  require(x.rows() == y.rows(), ErrorKind::invalid_input, "row-count mismatch");
}

bool is_constant(const Eigen::Ref<const Matrix>& y) {
  return (y.colwise().maxCoeff() - y.colwise().minCoeff()).maxCoeff() == 0.0;
}

/// Thin QR with positive R diagonal; maps a full-rank r x h matrix to the
/// nearest Stiefel point along its column span.
Matrix qr_retract(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  const auto& packed = qr.matrixQR();
  for (Index j = 0; j < a.cols(); ++j)
    if (packed(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

Matrix orthonormal_columns(const Eigen::Ref<const Matrix>& b) {
  return qr_retract(b);
}

/// Tangent-space projection at a Stiefel point.
Matrix project_tangent(const Matrix& v, const Matrix& grad) {
  const Matrix m = v.transpose() * grad;
  return grad - v * (0.5 * (m + m.transpose()));
}

struct Problem {
  const Matrix& xw;            // whitened design, n x r
  const ResponseContext& ctx;
  const Matrix* penalty;       // r x r symmetric (already mapped into the frame)
  double fd_step;

  double value(const Matrix& w) const {
    double v = ctx.eval(xw * w);
    if (penalty) v -= 0.5 * (w.transpose() * (*penalty) * w).trace();
    return v;
  }

  Matrix grad(const Matrix& w) const {
    Matrix g;
    if (ctx.kind() == AssocKind::bcov) {
      g.resize(w.rows(), w.cols());
      Matrix probe = w;
      for (Index i = 0; i < w.rows(); ++i)
        for (Index j = 0; j < w.cols(); ++j) {
          const double base = w(i, j);
          probe(i, j) = base + fd_step;
          const double up = ctx.eval(xw * probe);
          probe(i, j) = base - fd_step;
          const double down = ctx.eval(xw * probe);
          probe(i, j) = base;
          g(i, j) = (up - down) / (2.0 * fd_step);
        }
    } else {
      g = ctx.grad(xw, xw * w);
    }
    if (penalty) g -= (*penalty) * w;
    return g;
  }
};

struct RunResult {
  Matrix w;
  double objective = -std::numeric_limits<double>::infinity();
  SolveDiagnostics diag;
};

RunResult ascend(const Problem& prob, Matrix w, const SolverConfig& cfg) {
  RunResult run;
  double f = prob.value(w);
  run.diag.objective_trace.push_back(f);
  double step_start = cfg.step_init;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const Matrix gt = project_tangent(w, prob.grad(w));
    const double gnorm2 = gt.squaredNorm();
    run.diag.grad_norm = std::sqrt(gnorm2);
    if (run.diag.grad_norm <= cfg.grad_tol) {
      run.diag.converged = true;
      break;
    }
    double step = step_start;
    bool accepted = false;
    Matrix w_new;
    double f_new = f;
    while (step >= kMinStep) {
      w_new = qr_retract(w + step * gt);
      f_new = prob.value(w_new);
      if (f_new >= f + kArmijo * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      run.diag.stalled = true;
      break;
    }
    w = std::move(w_new);
    f = f_new;
    run.diag.objective_trace.push_back(f);
    run.diag.iterations = iter + 1;
    step_start = std::min(step * 2.0, 1e6);
  }

  run.w = std::move(w);
  run.objective = f;
  return run;
}

/// Deterministic informed start: orthonormalized cross moments between the
/// whitened design and centered response powers (powers fill in when the
/// response has fewer columns than h).
Matrix informed_start(const Matrix& xw, const Eigen::Ref<const Matrix>& y, Index h,
                      Rng& rng) {
  const Index n = xw.rows();
  const Index r = xw.cols();
  Matrix moments(n, h);
  Index filled = 0;
  for (Index j = 0; j < y.cols() && filled < h; ++j, ++filled)
    moments.col(filled) = y.col(j).array() - y.col(j).mean();
  Index power = 2;
  while (filled < h) {
    Vector base = moments.col(0).array().pow(static_cast<double>(power));
    moments.col(filled) = base.array() - base.mean();
    ++filled;
    ++power;
  }
  Matrix cross = xw.transpose() * moments;  // r x h
  // Guard a degenerate cross moment with a seeded fallback direction.
  for (Index j = 0; j < h; ++j)
    if (cross.col(j).norm() < 1e-12) cross.col(j) = rng.normal_matrix(r, 1);
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeThinU);
  Matrix u = svd.matrixU();
  if (u.cols() < h) {
    Matrix padded(r, h);
    padded.leftCols(u.cols()) = u;
    padded.rightCols(h - u.cols()) = rng.normal_matrix(r, h - u.cols());
    return qr_retract(padded);
  }
  return qr_retract(u.leftCols(h));
}

}  // namespace

WhitenedFrame whiten(const Eigen::Ref<const Matrix>& x) {
  require(x.allFinite(), ErrorKind::invalid_input, "non-finite entries");
  require(x.rows() >= 2 && x.cols() >= 1, ErrorKind::invalid_input,
          "need n >= 2, p >= 1");
  const Index n = x.rows();
  const Index p = x.cols();
  const Matrix m = x.transpose() * x;
  const double trace = m.trace();
  require(trace > 0.0, ErrorKind::degenerate_design, "X^T X has zero trace");

  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  require(es.info() == Eigen::Success, ErrorKind::degenerate_design,
          "eigendecomposition of X^T X failed");
  const Vector evals = es.eigenvalues();  // ascending
  const double lambda_max = evals[p - 1];
  require(lambda_max > 0.0, ErrorKind::degenerate_design, "X^T X not positive");

  const double rel_floor = lambda_max * 1e-9;
  const bool singular = (p > n) || evals[0] <= rel_floor;
  const double ridge = singular ? 1e-8 * trace / static_cast<double>(p) : 0.0;

  // Eigenvectors of m + ridge*I coincide with those of m; retained
  // directions are whitened by their raw eigenvalues so the constraint
  // round-trips exactly.
  const double cutoff = std::max(ridge, rel_floor);
  Index rank = 0;
  for (Index i = 0; i < p; ++i)
    if (evals[i] > cutoff) ++rank;
  require(rank >= 1, ErrorKind::degenerate_design, "X^T X numerically zero");

  WhitenedFrame frame;
  frame.rank = rank;
  frame.ridge = ridge;
  frame.transform.resize(p, rank);
  Index col = 0;
  for (Index i = 0; i < p; ++i) {
    if (evals[i] > cutoff) {
      frame.transform.col(col) = es.eigenvectors().col(i) / std::sqrt(evals[i]);
      ++col;
    }
  }
  return frame;
}

double objective(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                 const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& b,
                 const Vector* penalty_diag) {
  check_xy(x, y);
  require(b.rows() == x.cols(), ErrorKind::invalid_input,
          "basis rows must match x columns");
  double v = assoc_sq(kind, x * b, y);
  if (penalty_diag) {
    require(penalty_diag->size() == b.rows(), ErrorKind::invalid_input,
            "penalty size must match basis rows");
    v -= 0.5 * (penalty_diag->asDiagonal() * b).cwiseProduct(b).sum();
  }
  return v;
}

SdrFit solve_sdr(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                 const Eigen::Ref<const Matrix>& y, Index h, const SolverConfig& cfg,
                 const Vector* penalty_diag, const Matrix* init) {
  check_xy(x, y);
  require(!is_constant(y), ErrorKind::degenerate_response, "constant response");
  require(h >= 1 && h <= std::min(x.rows(), x.cols()), ErrorKind::invalid_dimension,
          "h must lie in [1, min(n, p)]");

  const WhitenedFrame frame = whiten(x);
  require(h <= frame.rank, ErrorKind::invalid_dimension,
          "h exceeds the effective rank of X");
  const Matrix xw = x * frame.transform;  // n x r, whitened design
  const ResponseContext ctx(kind, y);

  Matrix penalty_frame;
  if (penalty_diag) {
    require(penalty_diag->size() == x.cols(), ErrorKind::invalid_input,
            "penalty size must match x columns");
    penalty_frame = frame.transform.transpose() * penalty_diag->asDiagonal() *
                    frame.transform;
  }
  const Problem prob{xw, ctx, penalty_diag ? &penalty_frame : nullptr, cfg.fd_step};

  const int restarts = std::max(1, cfg.restarts);
  std::vector<Matrix> starts(static_cast<std::size_t>(restarts));
  for (int s = 0; s < restarts; ++s) {
    Rng rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(s)));
    if (s == 0) {
      if (init) {
        require(init->rows() == x.cols() && init->cols() == h,
                ErrorKind::invalid_input, "init basis has wrong shape");
        // Project the supplied basis into the frame and re-orthonormalize.
        Matrix v = frame.transform.transpose() *
                   (x.transpose() * x) * (*init);  // = R V for B = T V
        if (v.colPivHouseholderQr().rank() < h) v = rng.normal_matrix(frame.rank, h);
        starts[0] = qr_retract(v);
      } else {
        starts[0] = informed_start(xw, y, h, rng);
      }
    } else {
      starts[static_cast<std::size_t>(s)] = qr_retract(rng.normal_matrix(frame.rank, h));
    }
  }

  std::vector<RunResult> runs(static_cast<std::size_t>(restarts));
  parallel_for(restarts, [&](Index s) {
    runs[static_cast<std::size_t>(s)] =
        ascend(prob, starts[static_cast<std::size_t>(s)], cfg);
    runs[static_cast<std::size_t>(s)].diag.start_index = static_cast<int>(s);
  });

  int best = 0;
  for (int s = 1; s < restarts; ++s)
    if (runs[static_cast<std::size_t>(s)].objective >
        runs[static_cast<std::size_t>(best)].objective)
      best = s;

  SdrFit fit;
  fit.diag = std::move(runs[static_cast<std::size_t>(best)].diag);
  Matrix b = frame.transform * runs[static_cast<std::size_t>(best)].w;

  // Feasibility polish: correct B so B^T X^T X B = I to machine precision.
  const Matrix xb = x * b;
  const Matrix k = xb.transpose() * xb;
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() == Eigen::Success) {
    b = llt.matrixL().solve(b.transpose()).transpose();
  }
  fit.basis = b;
  fit.objective = objective(kind, x, y, b, penalty_diag);
  const Matrix residual =
      b.transpose() * (x.transpose() * x) * b - Matrix::Identity(h, h);
  fit.diag.constraint_residual = residual.norm() / std::sqrt(static_cast<double>(h));
  return fit;
}

double subspace_angle(const Eigen::Ref<const Matrix>& b1,
                      const Eigen::Ref<const Matrix>& b2) {
  require(b1.rows() == b2.rows(), ErrorKind::invalid_input,
          "bases must share row count");
  require(b1.cols() >= 1 && b2.cols() >= 1, ErrorKind::invalid_input, "empty basis");
  require(b1.allFinite() && b2.allFinite(), ErrorKind::invalid_input,
          "non-finite entries");
  require(Eigen::ColPivHouseholderQR<Matrix>(b1).rank() == b1.cols(),
          ErrorKind::rank_deficient, "first basis is rank deficient");
  require(Eigen::ColPivHouseholderQR<Matrix>(b2).rank() == b2.cols(),
          ErrorKind::rank_deficient, "second basis is rank deficient");
  const Matrix q1 = orthonormal_columns(b1);
  const Matrix q2 = orthonormal_columns(b2);
  Eigen::JacobiSVD<Matrix> svd(q1.transpose() * q2);
  const Index count = std::min(q1.cols(), q2.cols());
  double sigma_min = svd.singularValues()[count - 1];
  sigma_min = std::clamp(sigma_min, 0.0, 1.0);
  // Numerically identical spans land within rounding of 1; snap to zero.
  if (sigma_min >= 1.0 - 1e-12) return 0.0;
  return std::acos(sigma_min);
}

Matrix gradient_fd(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                   const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& b,
                   double fd_step, const Vector* penalty_diag) {
  require(fd_step > 0.0, ErrorKind::invalid_input, "fd_step must be positive");
  Matrix g(b.rows(), b.cols());
  Matrix probe = b;
  for (Index i = 0; i < b.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j) {
      const double base = b(i, j);
      probe(i, j) = base + fd_step;
      const double up = objective(kind, x, y, probe, penalty_diag);
      probe(i, j) = base - fd_step;
      const double down = objective(kind, x, y, probe, penalty_diag);
      probe(i, j) = base;
      g(i, j) = (up - down) / (2.0 * fd_step);
    }
  return g;
}

Matrix assoc_grad(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& b) {
  check_xy(x, y);
  const ResponseContext ctx(kind, y);
  return ctx.grad(x, x * b);
}

DimensionEstimate estimate_dimension(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                                     const Eigen::Ref<const Matrix>& y, Index h_max,
                                     int n_boot, const SolverConfig& cfg) {
  const Index n = x.rows();
  return estimate_dimension_with(
      kind, x, y, h_max, n_boot, cfg, [n, &cfg](Index h, int rep) {
        Rng rng(Rng::mix(cfg.seed ^ 0xB00757A9ULL,
                         static_cast<std::uint64_t>(h) * 1000003ULL +
                             static_cast<std::uint64_t>(rep)));
        return rng.bootstrap_indices(n);
      });
}

DimensionEstimate estimate_dimension_with(AssocKind kind,
                                          const Eigen::Ref<const Matrix>& x,
                                          const Eigen::Ref<const Matrix>& y, Index h_max,
                                          int n_boot, const SolverConfig& cfg,
                                          const Resampler& resample) {
  check_xy(x, y);
  require(h_max >= 1 && h_max <= std::min(x.rows(), x.cols()),
          ErrorKind::invalid_dimension, "h_max must lie in [1, min(n, p)]");
  require(n_boot >= 1, ErrorKind::invalid_input, "n_boot must be positive");

  DimensionEstimate est;
  est.mean_angles.resize(static_cast<std::size_t>(h_max), 0.0);
  est.failures.resize(static_cast<std::size_t>(h_max), 0);

  for (Index h = 1; h <= h_max; ++h) {
    const SdrFit full = solve_sdr(kind, x, y, h, cfg);
    std::vector<double> angles(static_cast<std::size_t>(n_boot),
                               std::numeric_limits<double>::quiet_NaN());
    std::exception_ptr last_error;
    std::mutex error_mutex;
    parallel_for(n_boot, [&](Index rep) {
      const IndexList idx = resample(h, static_cast<int>(rep));
      Matrix xb(static_cast<Index>(idx.size()), x.cols());
      Matrix yb(static_cast<Index>(idx.size()), y.cols());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        xb.row(static_cast<Index>(i)) = x.row(idx[i]);
        yb.row(static_cast<Index>(i)) = y.row(idx[i]);
      }
      try {
        // Same solver seed as the full fit: the only variation across
        // replicates is the resampling itself.
        const SdrFit fit = solve_sdr(kind, xb, yb, h, cfg);
        angles[static_cast<std::size_t>(rep)] = subspace_angle(full.basis, fit.basis);
      } catch (const Error&) {
        std::lock_guard<std::mutex> lock(error_mutex);
        last_error = std::current_exception();
      }
    });

    double sum = 0.0;
    int ok = 0;
    for (double a : angles) {
      if (std::isnan(a)) continue;
      sum += a;
      ++ok;
    }
    est.failures[static_cast<std::size_t>(h - 1)] = n_boot - ok;
    if (ok == 0) std::rethrow_exception(last_error);
    est.mean_angles[static_cast<std::size_t>(h - 1)] = sum / ok;
  }

  Index best = 1;
  for (Index h = 2; h <= h_max; ++h)
    if (est.mean_angles[static_cast<std::size_t>(h - 1)] <
        est.mean_angles[static_cast<std::size_t>(best - 1)])
      best = h;
  est.h = best;
  return est;
}

}  // namespace ssdr
