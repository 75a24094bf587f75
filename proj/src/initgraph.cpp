#include "coke/initgraph.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

namespace coke {

void ExpertKnowledge::validate(int d) const {
  std::set<std::pair<int, int>> req(required.begin(), required.end());
  for (const auto& e : forbidden)
    if (req.count(e))
      throw ConfigError("ExpertKnowledge: edge " + std::to_string(e.first) + "->" +
                        std::to_string(e.second) + " is both required and forbidden");
  auto check = [d](const std::pair<int, int>& e, const char* kind) {
    if (e.first < 0 || e.first >= d || e.second < 0 || e.second >= d || e.first == e.second)
      throw ConfigError(std::string("ExpertKnowledge: invalid ") + kind + " edge " +
                        std::to_string(e.first) + "->" + std::to_string(e.second));
  };
  for (const auto& e : required) check(e, "required");
  for (const auto& e : forbidden) check(e, "forbidden");
}

Adjacency chronological_prune(const std::vector<int>& machine_of) {
  const int d = static_cast<int>(machine_of.size());
  for (int j = 1; j < d; ++j)
    if (machine_of[j] < machine_of[j - 1])
      throw ConfigError("chronological_prune: machine_of not nondecreasing");
  Adjacency g(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && machine_of[i] <= machine_of[j]) g.set(i, j, true);
  return g;
}

namespace detail {

Eigen::MatrixXd abs_correlation_serial(const Eigen::MatrixXd& rows) {
  const int n = static_cast<int>(rows.rows());
  const int d = static_cast<int>(rows.cols());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd mean = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  Eigen::VectorXd norm(d);
  for (int j = 0; j < d; ++j) norm(j) = centered.col(j).norm();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      if (norm(i) <= 0 || norm(j) <= 0) continue;  // constant column -> 0
      c(i, j) = std::abs(centered.col(i).dot(centered.col(j)) / (norm(i) * norm(j)));
    }
  }
  (void)n;
  return c;
}

}  // namespace detail

Eigen::MatrixXd abs_correlation(const Eigen::MatrixXd& rows) {
  const int d = static_cast<int>(rows.cols());
  Eigen::VectorXd mean = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  Eigen::VectorXd norm(d);
  for (int j = 0; j < d; ++j) norm(j) = centered.col(j).norm();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i == j || norm(i) <= 0 || norm(j) <= 0) continue;
      c(i, j) = std::abs(centered.col(i).dot(centered.col(j)) / (norm(i) * norm(j)));
    }
  }
  return c;
}

Adjacency preliminary_neighbor_selection(const Adjacency& adj,
                                         const Eigen::MatrixXd& complete_rows,
                                         int top_m, Eigen::MatrixXd* scores_out) {
  const int d = adj.dim();
  if (top_m < 1) throw ConfigError("preliminary_neighbor_selection: top_m must be >= 1");
  if (complete_rows.rows() < 2) {
    std::cerr << "warning: PNS skipped, fewer than 2 complete rows available\n";
    if (scores_out) *scores_out = Eigen::MatrixXd::Zero(d, d);
    return adj;
  }
  if (complete_rows.cols() != d)
    throw ConfigError("preliminary_neighbor_selection: column count mismatch");

  Eigen::MatrixXd scores = abs_correlation(complete_rows);
  if (scores_out) *scores_out = scores;

  Adjacency out(d);
  for (int j = 0; j < d; ++j) {
    std::vector<int> parents = adj.parents_of(j);
    if (static_cast<int>(parents.size()) > top_m) {
      std::stable_sort(parents.begin(), parents.end(), [&](int a, int b) {
        if (scores(a, j) != scores(b, j)) return scores(a, j) > scores(b, j);
        return a < b;
      });
      parents.resize(top_m);
    }
    for (int i : parents) out.set(i, j, true);
  }
  return out;
}

InitialGraph apply_expert_knowledge(const Adjacency& adj, const ExpertKnowledge& ek,
                                    bool strict) {
  ek.validate(adj.dim());
  InitialGraph out;
  out.g_k = adj;
  out.pns_scores = Eigen::MatrixXd::Zero(adj.dim(), adj.dim());
  for (const auto& e : ek.required) {
    if (!adj.edge(e.first, e.second)) {
      if (strict)
        throw ConfigError("apply_expert_knowledge: required edge " +
                          std::to_string(e.first) + "->" + std::to_string(e.second) +
                          " conflicts with the pruned graph (strict mode)");
      out.removed[e] = EdgeProvenance::kExpert;  // recorded as an expert edit
    }
    out.g_k.set(e.first, e.second, true);
  }
  for (const auto& e : ek.forbidden) {
    if (out.g_k.edge(e.first, e.second)) out.removed[e] = EdgeProvenance::kExpert;
    out.g_k.set(e.first, e.second, false);
  }
  return out;
}

InitialGraph build_initial_graph(const std::vector<int>& machine_of,
                                 const Eigen::MatrixXd& complete_rows,
                                 const ExpertKnowledge& ek,
                                 const InitialGraphOptions& opt) {
  const int d = static_cast<int>(machine_of.size());
  Adjacency chrono = opt.use_chronology ? chronological_prune(machine_of)
                                        : Adjacency::complete(d);
  const int top_m = opt.pns_top_m > 0 ? opt.pns_top_m : std::min(20, d - 1);
  // PNS candidates are ranked by association over all directed pairs, then
  // intersected with the chronology constraint. Ranking within the already
  // chronology-restricted set would fill every slot with order-consistent
  // edges, which a decoded ordering can never filter out.
  Eigen::MatrixXd scores;
  const Adjacency pns =
      preliminary_neighbor_selection(Adjacency::complete(d), complete_rows, top_m, &scores);
  Adjacency pruned = prune_with_initial(pns, chrono);

  InitialGraph out = opt.use_expert
                         ? apply_expert_knowledge(pruned, ek, opt.strict_expert)
                         : apply_expert_knowledge(pruned, ExpertKnowledge{}, false);
  out.pns_scores = scores;

  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i == j || out.g_k.edge(i, j) || out.removed.count({i, j})) continue;
      if (!chrono.edge(i, j))
        out.removed[{i, j}] = EdgeProvenance::kChronology;
      else if (!pruned.edge(i, j))
        out.removed[{i, j}] = EdgeProvenance::kPns;
    }
  }
  return out;
}

}  // namespace coke
