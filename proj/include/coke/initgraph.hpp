#pragma once

#include <Eigen/Dense>
#include <map>
#include <utility>
#include <vector>

#include "coke/core.hpp"

namespace coke {

/// Engineer-supplied edge constraints.
struct ExpertKnowledge {
  std::vector<std::pair<int, int>> required;
  std::vector<std::pair<int, int>> forbidden;

  void validate(int d) const;
};

enum class EdgeProvenance { kChronology, kPns, kExpert };

struct InitialGraph {
  Adjacency g_k;
  // Removed-edge provenance; expert-added edges appear under kExpert as well.
  std::map<std::pair<int, int>, EdgeProvenance> removed;
  Eigen::MatrixXd pns_scores;  // |corr| association strengths, d x d
};

/// Keeps edge i->j iff i != j and machine_of(i) <= machine_of(j); this is the
/// edge union of all machine-monotone orderings.
Adjacency chronological_prune(const std::vector<int>& machine_of);

/// Per target, keeps only the top_m incoming candidates ranked by absolute
/// Pearson correlation on the complete rows. Ties break toward the lower
/// column index; constant columns score 0. With fewer than 2 complete rows the
/// step is skipped with a warning and adj is returned unchanged.
Adjacency preliminary_neighbor_selection(const Adjacency& adj,
                                         const Eigen::MatrixXd& complete_rows,
                                         int top_m,
                                         Eigen::MatrixXd* scores_out = nullptr);

namespace detail {
// Serial reference for the parallel correlation kernel.
Eigen::MatrixXd abs_correlation_serial(const Eigen::MatrixXd& rows);
}  // namespace detail

Eigen::MatrixXd abs_correlation(const Eigen::MatrixXd& rows);

/// Adds required edges (overriding chronology/PNS) and removes forbidden ones.
/// strict = true errors out instead when a required edge was chronologically
/// removed.
InitialGraph apply_expert_knowledge(const Adjacency& adj, const ExpertKnowledge& ek,
                                    bool strict = false);

struct InitialGraphOptions {
  bool use_chronology = true;
  bool use_expert = true;
  int pns_top_m = 0;  // 0 -> min(20, d - 1)
  bool strict_expert = false;
};

/// Full g_k pipeline: chronological prune (or complete digraph when disabled),
/// PNS on the complete rows, expert edits.
InitialGraph build_initial_graph(const std::vector<int>& machine_of,
                                 const Eigen::MatrixXd& complete_rows,
                                 const ExpertKnowledge& ek,
                                 const InitialGraphOptions& opt = {});

}  // namespace coke
