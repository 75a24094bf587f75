#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "coke/core.hpp"
#include "coke/initgraph.hpp"

namespace coke {

struct GenConfig {
  int p = 50;                        // sensor count
  int k = 20;                        // machine count, k <= p
  int samples = 10000;               // N
  double edge_density = 0;           // 0 -> auto so expected edges ~ 2p
  double noise_sigma = 1.0;
  double target_missing_rate = 0.8;  // overall cell-missing fraction
  int recipe_count = 10;             // s
  double full_fraction = 0.01;       // share of rows on the complete recipe
  int expert_edge_count = 10;
  std::uint64_t seed = 0;
  bool skew_recipe_sizes = false;    // geometric row-count skew; off by default

  void validate() const;
  double density() const;  // resolves the auto default
};

struct GroundTruth {
  Adjacency dag;
  std::vector<int> machine_of;                       // 0-based
  std::vector<std::pair<int, int>> expert_required;  // sampled from dag edges
  std::vector<double> root_means;                    // per column; used for roots
};

/// Machine-monotone random DAG plus simulated expert knowledge.
GroundTruth generate_ground_truth(const GenConfig& cfg);

/// Linear-Gaussian samples in topological (column) order: roots are
/// N(root_mean, sigma^2); a non-root's mean is the average of its parents.
Dataset sample_complete_data(const GroundTruth& gt, const GenConfig& cfg);

/// Splits rows into recipes and blanks whole machines per non-full recipe so
/// the realized overall missing rate lands within 2 points of the target.
Dataset apply_recipe_missingness(const Dataset& data, const GroundTruth& gt,
                                 const GenConfig& cfg,
                                 double* realized_rate = nullptr);

/// Convenience: ground truth -> complete samples -> recipe missingness.
struct Benchmark {
  GroundTruth truth;
  Dataset data;
  double realized_missing_rate = 0;
};
Benchmark generate_benchmark(const GenConfig& cfg);

/// Emits data.csv, meta.json, truth_edges.csv and expert.json under dir.
void write_benchmark(const std::filesystem::path& dir, const GroundTruth& gt,
                     const Dataset& data);

}  // namespace coke
