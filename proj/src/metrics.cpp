#include "coke/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace coke {

EdgeMetrics metrics_from_counts(int tp, int fp, int fn) {
  EdgeMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

EdgeMetrics edge_confusion(const Adjacency& pred, const Adjacency& truth) {
  if (pred.dim() != truth.dim())
    throw ConfigError("edge_confusion: dimension mismatch (" +
                      std::to_string(pred.dim()) + " vs " +
                      std::to_string(truth.dim()) + ")");
  int tp = 0, fp = 0, fn = 0;
  const int d = pred.dim();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      const bool p = pred.edge(i, j), t = truth.edge(i, j);
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
  }
  return metrics_from_counts(tp, fp, fn);
}

RunReport compare_runs(std::vector<std::pair<std::string, EdgeMetrics>> runs) {
  std::stable_sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
    if (a.second.f1 != b.second.f1) return a.second.f1 > b.second.f1;
    return a.first < b.first;
  });
  std::ostringstream os;
  os << std::left << std::setw(24) << "label" << std::right << std::setw(10)
     << "precision" << std::setw(10) << "recall" << std::setw(10) << "f1" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& [label, m] : runs)
    os << std::left << std::setw(24) << label << std::right << std::setw(10)
       << m.precision << std::setw(10) << m.recall << std::setw(10) << m.f1 << '\n';
  return RunReport{std::move(runs), os.str()};
}

}  // namespace coke
