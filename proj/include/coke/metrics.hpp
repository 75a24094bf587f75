#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coke/core.hpp"

namespace coke {

struct EdgeMetrics {
  int tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
};

/// Strictly directed edge confusion; a reversed edge counts as both a false
/// positive and a false negative. 0/0 ratios are pinned to 0.
EdgeMetrics edge_confusion(const Adjacency& pred, const Adjacency& truth);

EdgeMetrics metrics_from_counts(int tp, int fp, int fn);

/// Rows sorted by f1 descending, ties by label; returns the sorted list and a
/// plain-text table.
struct RunReport {
  std::vector<std::pair<std::string, EdgeMetrics>> ranked;
  std::string table;
};
RunReport compare_runs(std::vector<std::pair<std::string, EdgeMetrics>> runs);

}  // namespace coke
