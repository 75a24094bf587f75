#include "coke/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace coke {

void Dataset::validate() const {
  const int n = rows();
  const int d = cols();
  if (present.rows() != n || present.cols() != d)
    throw DataFormatError("Dataset: present-mask shape does not match values");
  if (static_cast<int>(recipe_of.size()) != n)
    throw DataFormatError("Dataset: recipe_of size != row count");
  if (static_cast<int>(machine_of.size()) != d)
    throw DataFormatError("Dataset: machine_of size != column count");
  if (static_cast<int>(sensor_names.size()) != d)
    throw DataFormatError("Dataset: sensor_names size != column count");
  for (int j = 1; j < d; ++j)
    if (machine_of[j] < machine_of[j - 1])
      throw DataFormatError("Dataset: machine_of not nondecreasing at column " +
                            std::to_string(j));
  for (int r = 0; r < n; ++r) {
    if (recipe_of[r] < 0 || recipe_of[r] >= static_cast<int>(recipe_names.size()))
      throw DataFormatError("Dataset: row " + std::to_string(r) +
                            " references unknown recipe id " +
                            std::to_string(recipe_of[r]));
    for (int j = 0; j < d; ++j)
      if (present(r, j) && !std::isfinite(values(r, j)))
        throw DataFormatError("Dataset: non-finite observed value at (" +
                              std::to_string(r) + "," + std::to_string(j) + ")");
  }
}

std::vector<Recipe> partition_by_recipe(const Dataset& dataset) {
  dataset.validate();
  const int d = dataset.cols();
  std::map<int, Recipe> by_id;
  for (int r = 0; r < dataset.rows(); ++r) {
    const int id = dataset.recipe_of[r];
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      Recipe rec;
      rec.id = id;
      rec.name = dataset.recipe_names[id];
      for (int j = 0; j < d; ++j)
        (dataset.present(r, j) ? rec.observed : rec.missing).push_back(j);
      rec.row_indices.push_back(r);
      rec.is_full = static_cast<int>(rec.observed.size()) == d;
      by_id.emplace(id, std::move(rec));
    } else {
      Recipe& rec = it->second;
      std::vector<int> bad;
      size_t oi = 0;
      for (int j = 0; j < d; ++j) {
        const bool expect = oi < rec.observed.size() && rec.observed[oi] == j;
        if (expect) ++oi;
        if (static_cast<bool>(dataset.present(r, j)) != expect) bad.push_back(j);
      }
      if (!bad.empty()) {
        std::ostringstream os;
        os << "partition_by_recipe: recipe '" << rec.name << "' row "
           << r << " disagrees with the recipe missingness pattern at columns";
        for (int j : bad) os << ' ' << j;
        throw DataFormatError(os.str());
      }
      rec.row_indices.push_back(r);
    }
  }
  std::vector<Recipe> out;
  out.reserve(by_id.size());
  for (auto& [id, rec] : by_id) out.push_back(std::move(rec));
  return out;
}

int find_full_recipe(const std::vector<Recipe>& recipes) {
  for (size_t i = 0; i < recipes.size(); ++i)
    if (recipes[i].is_full) return static_cast<int>(i);
  return -1;
}

Adjacency ordering_to_full_dag(const Ordering& ordering) {
  const int d = static_cast<int>(ordering.perm.size());
  std::vector<char> seen(d, 0);
  for (int v : ordering.perm) {
    if (v < 0 || v >= d || seen[v])
      throw ConfigError("ordering_to_full_dag: not a permutation");
    seen[v] = 1;
  }
  Adjacency g(d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) g.set(ordering.perm[i], ordering.perm[j], true);
  return g;
}

Adjacency prune_with_initial(const Adjacency& full, const Adjacency& g_k) {
  if (full.dim() != g_k.dim())
    throw ConfigError("prune_with_initial: dimension mismatch (" +
                      std::to_string(full.dim()) + " vs " +
                      std::to_string(g_k.dim()) + ")");
  const int d = full.dim();
  Adjacency out(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) out.set(i, j, full.edge(i, j) && g_k.edge(i, j));
  return out;
}

bool is_acyclic(const Adjacency& adj) {
  const int d = adj.dim();
  std::vector<int> indeg(d, 0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (adj.edge(i, j)) ++indeg[j];
  std::vector<int> stack;
  for (int j = 0; j < d; ++j)
    if (indeg[j] == 0) stack.push_back(j);
  int removed = 0;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    ++removed;
    for (int j = 0; j < d; ++j)
      if (adj.edge(v, j) && --indeg[j] == 0) stack.push_back(j);
  }
  return removed == d;
}

}  // namespace coke
