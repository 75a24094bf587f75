#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "coke/core.hpp"
#include "coke/initgraph.hpp"

namespace coke {

struct RewardConfig {
  double penalty_weight = 1.0;  // lambda for absent required edges
  double ridge = 1e-6;          // added to the normal equations
  int n = 32;                   // per-iteration sample count

  void validate() const;
};

struct RewardBreakdown {
  double rss = 0;
  double bic_term = 0;
  double penalty = 0;
  double reward = 0;  // always -bic_term - penalty
  int edge_count = 0;
};

struct RegressionFit {
  Eigen::VectorXd coefficients;
  double intercept = 0;
  double rss = 0;
};

/// OLS with intercept and a small ridge on the normal equations. An empty
/// parent set yields the intercept-only model (RSS = centered sum of squares).
RegressionFit fit_parent_regression(const Eigen::MatrixXd& batch, int target,
                                    const std::vector<int>& parents, double ridge);

/// Per-variable residual sums for graph g on a complete batch (parallel inner
/// loop; entries are produced independently and summed in fixed order).
std::vector<double> per_variable_rss(const Eigen::MatrixXd& batch, const Adjacency& g,
                                     double ridge);

namespace detail {
// Serial reference for per_variable_rss, kept for testing and benchmarks.
std::vector<double> per_variable_rss_serial(const Eigen::MatrixXd& batch,
                                            const Adjacency& g, double ridge);
}  // namespace detail

/// Equal-variance BIC reward:
///   bic_term = log(RSS / (n*d)) + |E(g)| * log(n) / n
///   penalty  = lambda * #(required expert edges absent from g)
///   reward   = -bic_term - penalty
RewardBreakdown bic_reward(const Adjacency& g, const Eigen::MatrixXd& r_full_batch,
                           const ExpertKnowledge& ek, const RewardConfig& cfg);

/// Enumerates all d! orderings (d <= 8), prunes each by g_k and returns the
/// reward maximizer; ties resolve to the lexicographically smallest
/// permutation.
std::pair<Ordering, RewardBreakdown> exhaustive_best_ordering(
    const Eigen::MatrixXd& r_full_batch, const Adjacency& g_k,
    const ExpertKnowledge& ek, const RewardConfig& cfg);

}  // namespace coke
