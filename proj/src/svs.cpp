#include "ssdr/svs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "ssdr/parallel.hpp"

namespace ssdr {

namespace {

constexpr double kRowFloor = 1e-12;
constexpr double kWeightCap = 1e12;

double capped_row_weight(double norm, double theta, double a, bool lqa) {
  const double r = std::max(norm, kRowFloor);
  const double w = lqa ? theta * std::pow(r, -a) / r : theta * std::pow(r, -a);
  return std::min(w, kWeightCap);
}

Matrix select_columns(const Eigen::Ref<const Matrix>& x, const IndexList& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<Index>(j)) = x.col(cols[j]);
  return out;
}

Matrix select_rows(const Matrix& m, const std::vector<bool>& keep) {
  Index count = 0;
  for (bool k : keep) count += k ? 1 : 0;
  Matrix out(count, m.cols());
  Index r = 0;
  for (Index i = 0; i < m.rows(); ++i)
    if (keep[static_cast<std::size_t>(i)]) out.row(r++) = m.row(i);
  return out;
}

double median_abs(Vector values) {
  const Index n = values.size();
  for (Index i = 0; i < n; ++i) values[i] = std::abs(values[i]);
  std::sort(values.data(), values.data() + n);
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::vector<double> make_theta_grid(double lo, double step, double hi) {
  require(step > 0.0 && hi >= lo && lo >= 0.0, ErrorKind::invalid_input,
          "bad theta grid bounds");
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double v = lo + step * k;
    if (v > hi + step * 0.5) break;
    grid.push_back(v);
  }
  return grid;
}

double default_adaptive_exponent(AssocKind kind) {
  switch (kind) {
    case AssocKind::dcov: return 0.5;
    case AssocKind::mdd: return 0.2;
    case AssocKind::bcov: return 0.8;
  }
  return 0.5;
}

const char* to_string(SvsStatus status) {
  switch (status) {
    case SvsStatus::ok: return "ok";
    case SvsStatus::all_variables_eliminated: return "all_variables_eliminated";
    case SvsStatus::insufficient_survivors: return "insufficient_survivors";
    case SvsStatus::failed: return "failed";
  }
  return "?";
}

Vector adaptive_weights(const Eigen::Ref<const Matrix>& b_nonsparse, double theta,
                        double a) {
  require(theta >= 0.0, ErrorKind::invalid_input, "theta must be nonnegative");
  require(a >= 0.0 && a <= 1.0, ErrorKind::invalid_input, "a must lie in [0, 1]");
  Vector w(b_nonsparse.rows());
  for (Index i = 0; i < b_nonsparse.rows(); ++i)
    w[i] = capped_row_weight(b_nonsparse.row(i).norm(), theta, a, false);
  return w;
}

Vector lqa_matrix(const Eigen::Ref<const Matrix>& v_current, double theta, double a) {
  require(theta >= 0.0, ErrorKind::invalid_input, "theta must be nonnegative");
  require(a >= 0.0 && a <= 1.0, ErrorKind::invalid_input, "a must lie in [0, 1]");
  Vector h(v_current.rows());
  for (Index j = 0; j < v_current.rows(); ++j)
    h[j] = capped_row_weight(v_current.row(j).norm(), theta, a, true);
  return h;
}

SvsResult svs_fit(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y, Index h, double theta,
                  const SvsConfig& cfg) {
  const SdrFit nonsparse = solve_sdr(kind, x, y, h, cfg.solver);
  return svs_fit(kind, x, y, h, theta, cfg, nonsparse.basis);
}

SvsResult svs_fit(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y, Index h, double theta,
                  const SvsConfig& cfg, const Matrix& b_nonsparse) {
  require(theta >= 0.0, ErrorKind::invalid_input, "theta must be nonnegative");
  require(cfg.tol > 0.0, ErrorKind::invalid_input, "tol must be positive");
  require(cfg.max_outer >= 1, ErrorKind::invalid_input, "max_outer must be >= 1");
  const Index p = x.cols();
  require(b_nonsparse.rows() == p && b_nonsparse.cols() == h,
          ErrorKind::invalid_input, "nonsparse basis has wrong shape");
  const double a = cfg.exponent(kind);
  require(a >= 0.0 && a <= 1.0, ErrorKind::invalid_input, "a must lie in [0, 1]");

  SvsResult result;
  result.theta = theta;
  result.bic = std::numeric_limits<double>::quiet_NaN();

  IndexList surviving(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) surviving[static_cast<std::size_t>(j)] = j;
  Matrix v0 = b_nonsparse;
  Matrix x0 = x;

  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    result.iterations = outer;
    const Vector h0 = lqa_matrix(v0, theta, a);

    SolverConfig inner = cfg.solver;
    inner.seed = Rng::mix(cfg.solver.seed, 0xA1 + static_cast<std::uint64_t>(outer));
    // restarts explored on every pass (argmax semantics)
    const SdrFit fit = solve_sdr(kind, x0, y, h, inner, &h0, &v0);
    const Matrix& v = fit.basis;

    if (subspace_angle(v0, v) <= cfg.tol) {
      result.converged = true;
      break;  // v0 is the solution; the fresh iterate changed nothing
    }

    std::vector<bool> keep(surviving.size(), true);
    Index kept = 0;
    for (std::size_t j = 0; j < surviving.size(); ++j) {
      if (v.row(static_cast<Index>(j)).norm() <= cfg.tol) {
        keep[j] = false;
        result.eliminated_order.push_back(surviving[j]);
      } else {
        ++kept;
      }
    }

    if (kept == 0) {
      result.status = SvsStatus::all_variables_eliminated;
      result.basis = Matrix::Zero(p, h);
      result.active.clear();
      result.objective = 0.0;
      return result;
    }

    IndexList next;
    next.reserve(static_cast<std::size_t>(kept));
    for (std::size_t j = 0; j < surviving.size(); ++j)
      if (keep[j]) next.push_back(surviving[j]);
    v0 = select_rows(v, keep);
    if (kept < static_cast<Index>(surviving.size()))
      x0 = select_columns(x, next);
    surviving = std::move(next);

    if (kept < h) {
      result.status = SvsStatus::insufficient_survivors;
      break;
    }
  }

  result.basis = Matrix::Zero(p, h);
  for (std::size_t j = 0; j < surviving.size(); ++j)
    result.basis.row(surviving[j]) = v0.row(static_cast<Index>(j));
  result.active = surviving;
  result.objective = assoc_sq(kind, x * result.basis, y);
  return result;
}

double bic_criterion(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                     const Eigen::Ref<const Matrix>& y, const SvsResult& result,
                     Index h) {
  (void)kind;
  (void)y;
  if (result.status != SvsStatus::ok || result.objective <= 0.0)
    return -std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(x.rows());
  const double p_theta = static_cast<double>(result.active.size());
  const double dh = static_cast<double>(h);
  return std::log(result.objective) - std::log(n) * (p_theta - dh) * dh / n;
}

ThetaSelection select_theta(AssocKind kind, const Eigen::Ref<const Matrix>& x,
                            const Eigen::Ref<const Matrix>& y, Index h,
                            const SvsConfig& cfg) {
  require(!cfg.theta_grid.empty(), ErrorKind::invalid_input, "empty theta grid");
  for (double t : cfg.theta_grid)
    require(t >= 0.0, ErrorKind::invalid_input, "theta grid values must be >= 0");

  const SdrFit nonsparse = solve_sdr(kind, x, y, h, cfg.solver);
  const Index count = static_cast<Index>(cfg.theta_grid.size());
  std::vector<SvsResult> fits(static_cast<std::size_t>(count));

  auto run_one = [&](Index i, const Matrix& start) {
    try {
      fits[static_cast<std::size_t>(i)] =
          svs_fit(kind, x, y, h, cfg.theta_grid[static_cast<std::size_t>(i)], cfg,
                  start);
    } catch (const Error&) {
      fits[static_cast<std::size_t>(i)].status = SvsStatus::failed;
      fits[static_cast<std::size_t>(i)].theta =
          cfg.theta_grid[static_cast<std::size_t>(i)];
    }
  };

  if (cfg.continuation) {
    Matrix start = nonsparse.basis;
    for (Index i = 0; i < count; ++i) {
      run_one(i, start);
      if (fits[static_cast<std::size_t>(i)].status == SvsStatus::ok)
        start = fits[static_cast<std::size_t>(i)].basis;
    }
  } else {
    parallel_for(count, [&](Index i) { run_one(i, nonsparse.basis); });
  }

  ThetaSelection sel;
  sel.path.reserve(static_cast<std::size_t>(count));
  double best_bic = -std::numeric_limits<double>::infinity();
  Index best = -1;
  for (Index i = 0; i < count; ++i) {
    SvsResult& fit = fits[static_cast<std::size_t>(i)];
    fit.bic = bic_criterion(kind, x, y, fit, h);
    sel.path.push_back({fit.theta, fit.bic, fit.objective,
                        static_cast<Index>(fit.active.size()), fit.iterations,
                        fit.status});
    if (fit.status == SvsStatus::ok && fit.bic >= best_bic) {
      best_bic = fit.bic;  // >= prefers the larger theta on ties
      best = i;
    }
  }
  require(best >= 0, ErrorKind::no_valid_fit,
          "no theta on the grid produced a valid fit");
  sel.theta = cfg.theta_grid[static_cast<std::size_t>(best)];
  sel.result = std::move(fits[static_cast<std::size_t>(best)]);
  return sel;
}

SelectionMetrics selection_metrics(const IndexList& active, const IndexList& truth,
                                   Index p) {
  require(!truth.empty(), ErrorKind::invalid_truth, "empty truth set");
  const std::set<Index> truth_set(truth.begin(), truth.end());
  const std::set<Index> active_set(active.begin(), active.end());
  for (Index j : truth_set)
    require(j >= 0 && j < p, ErrorKind::invalid_truth, "truth index out of range");
  for (Index j : active_set)
    require(j >= 0 && j < p, ErrorKind::invalid_input, "active index out of range");

  double tp = 0.0;
  for (Index j : active_set) tp += truth_set.count(j) ? 1.0 : 0.0;
  const double fp = static_cast<double>(active_set.size()) - tp;
  const double fn = static_cast<double>(truth_set.size()) - tp;
  const double inactive = static_cast<double>(p) - static_cast<double>(truth_set.size());

  SelectionMetrics m;
  m.tpr = tp / static_cast<double>(truth_set.size());
  m.fpr = inactive > 0.0 ? fp / inactive : 0.0;
  m.f1 = (tp + 0.5 * (fp + fn)) > 0.0 ? tp / (tp + 0.5 * (fp + fn)) : 0.0;
  return m;
}

LinearPrediction predict_linear(const Eigen::Ref<const Matrix>& basis,
                                const Eigen::Ref<const Matrix>& x_train,
                                const Eigen::Ref<const Matrix>& y_train,
                                const Eigen::Ref<const Matrix>& x_test,
                                const Matrix* y_test) {
  require(y_train.cols() == 1, ErrorKind::invalid_input,
          "prediction requires a univariate response");
  require(basis.rows() == x_train.cols() && basis.rows() == x_test.cols(),
          ErrorKind::invalid_input, "basis rows must match predictor count");
  require(x_train.rows() == y_train.rows(), ErrorKind::invalid_input,
          "row-count mismatch");
  const Index n = x_train.rows();
  const Index h = basis.cols();

  Matrix design(n, h + 1);
  design.col(0).setOnes();
  design.rightCols(h) = x_train * basis;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  require(qr.rank() == h + 1, ErrorKind::singular_fit,
          "latent design is rank deficient");
  LinearPrediction out;
  out.coef = qr.solve(y_train.col(0));
  out.fitted_train = design * out.coef;
  out.train_mae = median_abs(y_train.col(0) - out.fitted_train);

  Matrix test_design(x_test.rows(), h + 1);
  test_design.col(0).setOnes();
  test_design.rightCols(h) = x_test * basis;
  out.predicted = test_design * out.coef;
  if (y_test) {
    require(y_test->rows() == x_test.rows() && y_test->cols() == 1,
            ErrorKind::invalid_input, "test response shape mismatch");
    out.test_mae = median_abs(y_test->col(0) - out.predicted);
  } else {
    out.test_mae = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace ssdr
