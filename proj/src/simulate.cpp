#include "ssdr/simulate.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "ssdr/parallel.hpp"
#include "ssdr/rng.hpp"

namespace ssdr {

namespace {

Matrix ar1_cholesky(Index p) {
  Matrix sigma(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      sigma(i, j) = std::pow(0.5, static_cast<double>(std::abs(i - j)));
  return Eigen::LLT<Matrix>(sigma).matrixL();
}

Vector normal_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

/// First four entries s, +/- alternating, scaled; the Table 1 patterns.
Vector pattern(Index p, std::initializer_list<double> head) {
  Vector v = Vector::Zero(p);
  Index i = 0;
  for (double c : head) v[i++] = c;
  return v;
}

Index required_p(char id) {
  switch (id) {
    case 'A': return 2;
    case 'B':
    case 'C':
    case 'E':
    case 'F': return 4;
    case 'D':
    case 'G': return 8;
    case 'H': return 12;
  }
  fail(ErrorKind::invalid_spec, std::string("unknown study '") + id + "'");
}

void contaminate(Matrix& x, Index first_col, Index last_col, bool casewise,
                 std::uint64_t seed) {
  const Index n = x.rows();
  const Index m = static_cast<Index>(std::lround(0.1 * static_cast<double>(n)));
  Rng rng(Rng::mix(seed, 0xC0417A31ULL));
  if (casewise) {
    const IndexList rows = rng.sample_without_replacement(n, m);
    for (Index c = first_col; c <= last_col; ++c)
      for (Index r : rows) x(r, c) = 2.0 * rng.cauchy();
  } else {
    for (Index c = first_col; c <= last_col; ++c) {
      const IndexList rows = rng.sample_without_replacement(n, m);
      for (Index r : rows) x(r, c) = 2.0 * rng.cauchy();
    }
  }
}

/// Study E core, shared by E/F/G/H so the clean entries match bitwise.
GeneratedDataset generate_e_core(const StudySpec& spec) {
  Rng rng(spec.seed);
  const Index n = spec.n;
  const Index p = spec.p;
  const Matrix l = ar1_cholesky(p);
  GeneratedDataset d;
  d.x = rng.normal_matrix(n, p) * l.transpose();
  const Vector b1 = pattern(p, {1, 1, 1, 1});
  const Vector b2 = pattern(p, {1, -1, 1, -1});
  const Vector eps = normal_vector(rng, n);
  const Vector u1 = d.x * b1;
  const Vector u2 = d.x * b2;
  d.y = u1.array().square() + u2.array().abs() + 0.1 * eps.array();
  d.true_basis.resize(p, 2);
  d.true_basis.col(0) = b1;
  d.true_basis.col(1) = b2;
  d.true_active = {0, 1, 2, 3};
  return d;
}

}  // namespace

GeneratedDataset generate(const StudySpec& spec) {
  require(spec.id >= 'A' && spec.id <= 'H', ErrorKind::invalid_spec,
          std::string("unknown study '") + spec.id + "'");
  require(spec.n >= 10, ErrorKind::invalid_spec, "study needs n >= 10");
  require(spec.p >= required_p(spec.id), ErrorKind::invalid_spec,
          std::string("study ") + spec.id + " needs p >= " +
              std::to_string(required_p(spec.id)));

  const Index n = spec.n;
  const Index p = spec.p;
  Rng rng(spec.seed);
  GeneratedDataset d;

  switch (spec.id) {
    case 'A': {
      const Matrix l = ar1_cholesky(p);
      d.x = rng.normal_matrix(n, p) * l.transpose();
      const Vector b1 = pattern(p, {1});
      const Vector b2 = pattern(p, {0, 1});
      const Vector eps = normal_vector(rng, n);
      const Vector u1 = d.x * b1;
      const Vector u2 = d.x * b2;
      d.y = u1.array() / (0.5 + (u2.array() + 1.5).square()) + 0.2 * eps.array();
      d.true_basis.resize(p, 2);
      d.true_basis.col(0) = b1;
      d.true_basis.col(1) = b2;
      d.true_active = {0, 1};
      break;
    }
    case 'B': {
      const Matrix l = ar1_cholesky(p - 1);
      const Matrix rest = rng.normal_matrix(n, p - 1) * l.transpose();
      const Vector eps2 = normal_vector(rng, n);
      const Vector eps1 = normal_vector(rng, n);
      d.x.resize(n, p);
      d.x.rightCols(p - 1) = rest;
      d.x.col(0) = (rest.col(0) + rest.col(1)).array().abs() + eps2.array();
      const Vector b1 = 0.5 * pattern(p, {1, 1, 1, 1});
      const Vector b2 = 0.5 * pattern(p, {1, -1, 1, -1});
      const Vector u1 = d.x * b1;
      const Vector u2 = d.x * b2;
      d.y = u1.array().square() + u2.array() + 0.5 * eps1.array();
      d.true_basis.resize(p, 2);
      d.true_basis.col(0) = b1;
      d.true_basis.col(1) = b2;
      d.true_active = {0, 1, 2, 3};
      break;
    }
    case 'C': {
      d.x = rng.normal_matrix(n, p);
      const Vector b1 = pattern(p, {1, 1, 1, 1});
      const Vector b2 = pattern(p, {1, -1, 1, -1});
      const Vector eps1 = normal_vector(rng, n);
      const Vector eps2 = normal_vector(rng, n);
      const Vector u1 = 2.0 * (d.x * b1) + eps1;
      const Vector u2 = 2.0 * (d.x * b2) + Vector::Constant(n, 4.0) + eps2;
      d.y.resize(n, 1);
      for (Index i = 0; i < n; ++i)
        d.y(i, 0) = (u1[i] >= 0.0 ? 1.0 : -1.0) * std::log(std::abs(u2[i]));
      d.true_basis.resize(p, 2);
      d.true_basis.col(0) = b1;
      d.true_basis.col(1) = b2;
      d.true_active = {0, 1, 2, 3};
      break;
    }
    case 'D': {
      d.x = rng.normal_matrix(n, p);
      const Vector b1 = pattern(p, {1, 1, 1, 1});
      const Vector b2 = pattern(p, {0, 0, 0, 0, 1, 1, 1, 1});
      const Vector eps = normal_vector(rng, n);
      const Vector u1 = d.x * b1 + 0.2 * eps;
      const Vector u2 = d.x * b2 + 0.2 * eps;
      d.y.resize(n, 1);
      for (Index i = 0; i < n; ++i)
        d.y(i, 0) = (u1[i] > 1.0 ? 1.0 : 0.0) + 2.0 * (u2[i] > 0.0 ? 1.0 : 0.0);
      d.true_basis.resize(p, 2);
      d.true_basis.col(0) = b1;
      d.true_basis.col(1) = b2;
      d.true_active = {0, 1, 2, 3, 4, 5, 6, 7};
      break;
    }
    case 'E':
      d = generate_e_core(spec);
      break;
    case 'F':
      d = generate_e_core(spec);
      contaminate(d.x, 0, 3, false, spec.seed);
      break;
    case 'G':
      d = generate_e_core(spec);
      contaminate(d.x, 4, 7, false, spec.seed);
      break;
    case 'H':
      d = generate_e_core(spec);
      contaminate(d.x, 8, 11, true, spec.seed);
      break;
  }
  return d;
}

ReplicationSummary run_study(const StudySpec& spec,
                             const std::vector<AssocKind>& methods, int reps,
                             const SvsConfig& cfg, Index h) {
  require(reps >= 1, ErrorKind::invalid_input, "reps must be >= 1");
  require(!methods.empty(), ErrorKind::invalid_input, "no methods given");

  struct Cell {
    bool ok = false;
    double f1 = 0.0, tpr = 0.0, fpr = 0.0, theta = 0.0, seconds = 0.0;
  };
  const std::size_t m_count = methods.size();
  std::vector<Cell> cells(static_cast<std::size_t>(reps) * m_count);

  parallel_for(reps, [&](Index rep) {
    StudySpec rep_spec = spec;
    rep_spec.seed = spec.seed + static_cast<std::uint64_t>(rep);
    const GeneratedDataset data = generate(rep_spec);
    for (std::size_t m = 0; m < m_count; ++m) {
      Cell& cell = cells[static_cast<std::size_t>(rep) * m_count + m];
      SvsConfig rep_cfg = cfg;
      rep_cfg.solver.seed = Rng::mix(rep_spec.seed, 1 + static_cast<std::uint64_t>(m));
      const auto start = std::chrono::steady_clock::now();
      try {
        const ThetaSelection sel = select_theta(methods[m], data.x, data.y, h, rep_cfg);
        const SelectionMetrics metrics =
            selection_metrics(sel.result.active, data.true_active, rep_spec.p);
        cell.f1 = metrics.f1;
        cell.tpr = metrics.tpr;
        cell.fpr = metrics.fpr;
        cell.theta = sel.theta;
        cell.ok = true;
      } catch (const Error&) {
        cell.ok = false;
      }
      cell.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
    }
  });

  ReplicationSummary summary;
  summary.spec = spec;
  summary.h = h;
  for (std::size_t m = 0; m < m_count; ++m) {
    MethodSummary ms;
    ms.kind = methods[m];
    ms.reps = reps;
    auto accumulate = [&](auto select, double& mean, double& sd) {
      double sum = 0.0;
      int count = 0;
      for (int rep = 0; rep < reps; ++rep) {
        const Cell& c = cells[static_cast<std::size_t>(rep) * m_count + m];
        if (!c.ok) continue;
        sum += select(c);
        ++count;
      }
      mean = count > 0 ? sum / count : 0.0;
      double ss = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        const Cell& c = cells[static_cast<std::size_t>(rep) * m_count + m];
        if (!c.ok) continue;
        const double dev = select(c) - mean;
        ss += dev * dev;
      }
      sd = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
    };
    accumulate([](const Cell& c) { return c.f1; }, ms.f1_mean, ms.f1_sd);
    accumulate([](const Cell& c) { return c.tpr; }, ms.tpr_mean, ms.tpr_sd);
    accumulate([](const Cell& c) { return c.fpr; }, ms.fpr_mean, ms.fpr_sd);
    accumulate([](const Cell& c) { return c.theta; }, ms.theta_mean, ms.theta_sd);
    accumulate([](const Cell& c) { return c.seconds; }, ms.seconds_mean, ms.seconds_sd);
    for (int rep = 0; rep < reps; ++rep)
      if (!cells[static_cast<std::size_t>(rep) * m_count + m].ok) ++ms.failures;
    summary.methods.push_back(ms);
  }
  return summary;
}

}  // namespace ssdr
