#pragma once

#include <cstdint>
#include <vector>

#include "ssdr/svs.hpp"
#include "ssdr/types.hpp"

namespace ssdr {

/// Synthetic benchmark generator id A..H with sample and variable counts.
struct StudySpec {
  char id = 'A';
  Index n = 120;
  Index p = 24;
  std::uint64_t seed = 0;
};

struct GeneratedDataset {
  Matrix x;            // n x p
  Matrix y;            // n x 1
  Matrix true_basis;   // p x 2
  IndexList true_active;
};

/// Deterministic draw for one study replicate. Studies F, G and H share
/// the Study E draw bitwise; contamination is applied as a post-pass with
/// its own stream.
GeneratedDataset generate(const StudySpec& spec);

struct MethodSummary {
  AssocKind kind = AssocKind::dcov;
  int reps = 0;
  int failures = 0;
  double f1_mean = 0.0, f1_sd = 0.0;
  double tpr_mean = 0.0, tpr_sd = 0.0;
  double fpr_mean = 0.0, fpr_sd = 0.0;
  double theta_mean = 0.0, theta_sd = 0.0;
  double seconds_mean = 0.0, seconds_sd = 0.0;
};

struct ReplicationSummary {
  StudySpec spec;
  Index h = 2;
  std::vector<MethodSummary> methods;
};

/// Replicated selection benchmark: per replicate, generate data with seed
/// spec.seed + replicate, run select_theta per method, and score the
/// active set against the generator truth. Per-replicate failures are
/// counted and excluded from the aggregates.
ReplicationSummary run_study(const StudySpec& spec,
                             const std::vector<AssocKind>& methods, int reps,
                             const SvsConfig& cfg, Index h = 2);

}  // namespace ssdr
