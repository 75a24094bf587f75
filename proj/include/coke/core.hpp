#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coke/errors.hpp"

namespace coke {

/// Directed adjacency over d variables; entry (i,j) true means edge i->j.
/// The diagonal is always false.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(int d) : d_(d), m_(static_cast<size_t>(d) * d, 0) {}

  static Adjacency complete(int d) {
    Adjacency a(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j) a.m_[static_cast<size_t>(i) * d + j] = 1;
    return a;
  }

  int dim() const { return d_; }

  bool edge(int i, int j) const { return m_[static_cast<size_t>(i) * d_ + j] != 0; }

  void set(int i, int j, bool v) {
    if (i == j) {
      if (v) throw ConfigError("Adjacency: self-loop " + std::to_string(i) + " not allowed");
      return;
    }
    m_[static_cast<size_t>(i) * d_ + j] = v ? 1 : 0;
  }

  int edge_count() const {
    int c = 0;
    for (auto v : m_) c += v != 0;
    return c;
  }

  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j)
        if (edge(i, j)) e.emplace_back(i, j);
    return e;
  }

  std::vector<int> parents_of(int j) const {
    std::vector<int> p;
    for (int i = 0; i < d_; ++i)
      if (edge(i, j)) p.push_back(i);
    return p;
  }

  bool operator==(const Adjacency& o) const { return d_ == o.d_ && m_ == o.m_; }

 private:
  int d_ = 0;
  std::vector<std::uint8_t> m_;
};

/// Permutation of variable indices with per-step selection log-probabilities.
struct Ordering {
  std::vector<int> perm;
  std::vector<double> step_logprobs;

  double total_logprob() const {
    double s = 0;
    for (double lp : step_logprobs) s += lp;
    return s;
  }
};

struct CandidateGraph {
  Adjacency adjacency;
  double reward = 0;
  double bic = 0;
  double penalty = 0;
  Ordering ordering;
};

/// Column-major sample matrix with explicit per-cell missingness, recipe
/// labels per row and machine assignment per column.
struct Dataset {
  Eigen::MatrixXd values;  // N x d; missing cells hold 0 and are flagged absent
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> present;  // N x d
  std::vector<int> recipe_of;               // row -> dense recipe id
  std::vector<std::string> recipe_names;    // dense id -> opaque name
  std::vector<int> machine_of;              // column -> machine, 0-based, nondecreasing
  std::vector<std::string> sensor_names;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  int machines() const {
    return machine_of.empty() ? 0 : machine_of.back() + 1;
  }

  /// Checks structural invariants: shapes, finite observed cells,
  /// nondecreasing machine ids, recipe ids in range.
  void validate() const;
};

struct Recipe {
  int id = 0;
  std::string name;
  std::vector<int> observed;
  std::vector<int> missing;
  std::vector<int> row_indices;
  bool is_full = false;

  int n() const { return static_cast<int>(row_indices.size()); }
};

/// Groups rows by recipe id and derives each recipe's observed/missing column
/// sets from the actual cell missingness. Rows of one recipe must agree on
/// their missingness pattern. Flags r_full when some recipe observes all
/// columns.
std::vector<Recipe> partition_by_recipe(const Dataset& dataset);

/// Index of the recipe with is_full set, or -1.
int find_full_recipe(const std::vector<Recipe>& recipes);

/// Complete DAG induced by an ordering: edge perm[i] -> perm[j] for i < j.
Adjacency ordering_to_full_dag(const Ordering& ordering);

/// Elementwise conjunction of `full` with the initial graph g_k.
Adjacency prune_with_initial(const Adjacency& full, const Adjacency& g_k);

/// Kahn topological-sort cycle check.
bool is_acyclic(const Adjacency& adj);

}  // namespace coke
