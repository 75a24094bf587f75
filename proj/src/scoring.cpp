#include "coke/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coke {

void RewardConfig::validate() const {
  if (penalty_weight < 0) throw ConfigError("RewardConfig: penalty_weight must be >= 0");
  if (ridge < 0) throw ConfigError("RewardConfig: ridge must be >= 0");
  if (n < 2) throw ConfigError("RewardConfig: n must be >= 2");
}

RegressionFit fit_parent_regression(const Eigen::MatrixXd& batch, int target,
                                    const std::vector<int>& parents, double ridge) {
  const int n = static_cast<int>(batch.rows());
  if (n < 2) throw ConfigError("fit_parent_regression: need at least 2 rows");
  const Eigen::VectorXd y = batch.col(target);

  RegressionFit fit;
  if (parents.empty()) {
    const double mean = y.mean();
    fit.intercept = mean;
    fit.coefficients.resize(0);
    fit.rss = (y.array() - mean).square().sum();
    return fit;
  }

  const int m = static_cast<int>(parents.size());
  Eigen::MatrixXd design(n, m + 1);
  design.col(0).setOnes();
  for (int c = 0; c < m; ++c) design.col(c + 1) = batch.col(parents[c]);

  Eigen::MatrixXd gram = design.transpose() * design;
  gram.diagonal().array() += ridge;
  const Eigen::VectorXd beta = gram.ldlt().solve(design.transpose() * y);

  fit.intercept = beta(0);
  fit.coefficients = beta.tail(m);
  fit.rss = (y - design * beta).squaredNorm();
  return fit;
}

namespace detail {

std::vector<double> per_variable_rss_serial(const Eigen::MatrixXd& batch,
                                            const Adjacency& g, double ridge) {
  const int d = g.dim();
  std::vector<double> rss(d, 0.0);
  for (int j = 0; j < d; ++j)
    rss[j] = fit_parent_regression(batch, j, g.parents_of(j), ridge).rss;
  return rss;
}

}  // namespace detail

std::vector<double> per_variable_rss(const Eigen::MatrixXd& batch, const Adjacency& g,
                                     double ridge) {
  const int d = g.dim();
  std::vector<double> rss(d, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < d; ++j)
    rss[j] = fit_parent_regression(batch, j, g.parents_of(j), ridge).rss;
  return rss;
}

RewardBreakdown bic_reward(const Adjacency& g, const Eigen::MatrixXd& r_full_batch,
                           const ExpertKnowledge& ek, const RewardConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(r_full_batch.rows());
  const int d = g.dim();
  if (n == 0) throw ConfigError("bic_reward: empty batch");
  if (static_cast<int>(r_full_batch.cols()) != d)
    throw ConfigError("bic_reward: batch column count does not match graph");

  const std::vector<double> rss = per_variable_rss(r_full_batch, g, cfg.ridge);
  RewardBreakdown out;
  for (double v : rss) out.rss += v;  // fixed variable order
  out.edge_count = g.edge_count();
  const double floored = std::max(out.rss, 1e-12);
  out.bic_term = std::log(floored / (static_cast<double>(n) * d)) +
                 out.edge_count * std::log(static_cast<double>(n)) / n;
  int missing_required = 0;
  for (const auto& e : ek.required)
    if (!g.edge(e.first, e.second)) ++missing_required;
  out.penalty = cfg.penalty_weight * missing_required;
  out.reward = -out.bic_term - out.penalty;
  return out;
}

std::pair<Ordering, RewardBreakdown> exhaustive_best_ordering(
    const Eigen::MatrixXd& r_full_batch, const Adjacency& g_k,
    const ExpertKnowledge& ek, const RewardConfig& cfg) {
  const int d = g_k.dim();
  if (d > 8) throw ConfigError("exhaustive_best_ordering: d must be <= 8");

  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);

  Ordering best;
  RewardBreakdown best_breakdown;
  bool have_best = false;
  do {
    Ordering ord;
    ord.perm = perm;
    ord.step_logprobs.assign(d, 0.0);
    const Adjacency g = prune_with_initial(ordering_to_full_dag(ord), g_k);
    const RewardBreakdown b = bic_reward(g, r_full_batch, ek, cfg);
    // Lexicographic enumeration order: a strict improvement keeps the
    // lexicographically smallest maximizer.
    if (!have_best || b.reward > best_breakdown.reward) {
      best = ord;
      best_breakdown = b;
      have_best = true;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best, best_breakdown};
}

}  // namespace coke
