#include "coke/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "coke/io.hpp"

namespace coke {

namespace {

std::mt19937_64 stage_rng(std::uint64_t seed, std::uint64_t stage) {
  std::seed_seq seq{seed, stage};
  return std::mt19937_64(seq);
}

std::vector<int> machine_assignment(int p, int k) {
  // Contiguous machines with sizes as equal as possible.
  std::vector<int> machine_of(p);
  const int base = p / k;
  const int extra = p % k;
  int col = 0;
  for (int m = 0; m < k; ++m) {
    const int size = base + (m < extra ? 1 : 0);
    for (int s = 0; s < size; ++s) machine_of[col++] = m;
  }
  return machine_of;
}

}  // namespace

void GenConfig::validate() const {
  if (p < 1) throw ConfigError("GenConfig: p must be >= 1");
  if (k < 1 || k > p) throw ConfigError("GenConfig: need 1 <= k <= p");
  if (samples < 2) throw ConfigError("GenConfig: samples must be >= 2");
  if (edge_density < 0 || edge_density > 1)
    throw ConfigError("GenConfig: edge_density must lie in (0,1] (or 0 for auto)");
  if (noise_sigma <= 0) throw ConfigError("GenConfig: noise_sigma must be > 0");
  if (target_missing_rate < 0 || target_missing_rate >= 1)
    throw ConfigError("GenConfig: target_missing_rate must lie in [0,1)");
  if (recipe_count < 1) throw ConfigError("GenConfig: recipe_count must be >= 1");
  if (target_missing_rate > 0 && recipe_count < 2)
    throw ConfigError("GenConfig: recipe_count must be >= 2 when the target missing rate is positive");
  if (full_fraction <= 0 || full_fraction > 1)
    throw ConfigError("GenConfig: full_fraction must lie in (0,1]");
  if (expert_edge_count < 0) throw ConfigError("GenConfig: expert_edge_count must be >= 0");
}

double GenConfig::density() const {
  if (edge_density > 0) return edge_density;
  if (p <= 1) return 1.0;
  return std::min(1.0, 4.0 / (p - 1));  // expected edge count ~ 2p
}

GroundTruth generate_ground_truth(const GenConfig& cfg) {
  cfg.validate();
  auto rng = stage_rng(cfg.seed, 1);
  GroundTruth gt;
  gt.machine_of = machine_assignment(cfg.p, cfg.k);
  gt.dag = Adjacency(cfg.p);
  std::bernoulli_distribution keep(cfg.density());
  for (int i = 0; i < cfg.p; ++i)
    for (int j = i + 1; j < cfg.p; ++j)
      if (gt.machine_of[i] <= gt.machine_of[j] && keep(rng)) gt.dag.set(i, j, true);

  auto edges = gt.dag.edges();
  const int want = std::min<int>(cfg.expert_edge_count, static_cast<int>(edges.size()));
  for (int i = 0; i < want; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(edges.size()) - 1);
    std::swap(edges[i], edges[pick(rng)]);
    gt.expert_required.push_back(edges[i]);
  }

  std::uniform_real_distribution<double> mean_dist(-2.0, 2.0);
  gt.root_means.resize(cfg.p);
  for (int j = 0; j < cfg.p; ++j) gt.root_means[j] = mean_dist(rng);
  return gt;
}

Dataset sample_complete_data(const GroundTruth& gt, const GenConfig& cfg) {
  cfg.validate();
  if (!is_acyclic(gt.dag)) throw ConfigError("sample_complete_data: ground truth has a cycle");
  auto rng = stage_rng(cfg.seed, 2);
  const int n = cfg.samples;
  const int d = cfg.p;

  std::vector<std::vector<int>> parents(d);
  for (int j = 0; j < d; ++j) parents[j] = gt.dag.parents_of(j);

  Dataset data;
  data.values.resize(n, d);
  data.present.setConstant(n, d, 1);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  // Columns are already in topological order: edges only run left to right.
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < d; ++j) {
      double mean;
      if (parents[j].empty()) {
        mean = gt.root_means[j];
      } else {
        mean = 0;
        for (int pi : parents[j]) mean += data.values(r, pi);
        mean /= static_cast<double>(parents[j].size());
      }
      data.values(r, j) = mean + noise(rng);
    }
  }

  data.recipe_of.assign(n, 0);
  data.recipe_names = {"r1"};
  data.machine_of = gt.machine_of;
  data.sensor_names.resize(d);
  for (int j = 0; j < d; ++j) data.sensor_names[j] = "s" + std::to_string(j + 1);
  return data;
}

Dataset apply_recipe_missingness(const Dataset& data, const GroundTruth& gt,
                                 const GenConfig& cfg, double* realized_rate) {
  cfg.validate();
  if ((data.present.array() == 0).any())
    throw ConfigError("apply_recipe_missingness: input data must be complete");
  const int n = data.rows();
  const int d = data.cols();

  Dataset out = data;
  if (cfg.target_missing_rate == 0) {
    out.recipe_of.assign(n, 0);
    out.recipe_names = {"r1"};
    if (realized_rate) *realized_rate = 0;
    return out;
  }
  if (cfg.target_missing_rate >= 1.0 - cfg.full_fraction)
    throw ConfigError("apply_recipe_missingness: target rate exceeds 1 - full_fraction");

  const int s = cfg.recipe_count;
  int n_full = static_cast<int>(std::lround(cfg.full_fraction * n));
  n_full = std::clamp(n_full, 1, n - (s - 1));

  // Row counts for the s-1 incomplete recipes (near-equal, optional skew).
  std::vector<int> sizes(s, 0);
  sizes[0] = n_full;
  {
    std::vector<double> w(s - 1, 1.0);
    if (cfg.skew_recipe_sizes)
      for (int i = 0; i < s - 1; ++i) w[i] = std::pow(0.7, i);
    double wsum = 0;
    for (double x : w) wsum += x;
    const int rest = n - n_full;
    int assigned = 0;
    for (int i = 0; i < s - 1; ++i) {
      sizes[i + 1] = std::max(1, static_cast<int>(std::floor(rest * w[i] / wsum)));
      assigned += sizes[i + 1];
    }
    int leftover = rest - assigned;
    for (int i = 1; leftover != 0; i = i % (s - 1) + 1) {
      if (leftover > 0) {
        ++sizes[i];
        --leftover;
      } else if (sizes[i] > 1) {
        --sizes[i];
        ++leftover;
      }
    }
  }

  const int k = data.machines();
  std::vector<int> machine_size(k, 0);
  for (int m : data.machine_of) ++machine_size[m];

  // One uniform per (incomplete recipe, machine); a machine is bypassed when
  // its uniform falls below the threshold q. q is chosen among the threshold
  // candidates to bring the realized cell-missing rate closest to target.
  auto rng = stage_rng(cfg.seed, 3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<double>> u(s - 1, std::vector<double>(k));
  for (auto& row : u)
    for (double& x : row) x = unif(rng);

  auto bypass_mask = [&](int rec, double q) {
    std::vector<char> by(k, 0);
    int count = 0;
    for (int m = 0; m < k; ++m)
      if (u[rec][m] < q) by[m] = 1, ++count;
    if (count == 0) {
      int arg = 0;
      for (int m = 1; m < k; ++m)
        if (u[rec][m] < u[rec][arg]) arg = m;
      by[arg] = 1;
    } else if (count == k) {
      int arg = 0;
      for (int m = 1; m < k; ++m)
        if (u[rec][m] > u[rec][arg]) arg = m;
      by[arg] = 0;
    }
    return by;
  };

  auto rate_at = [&](double q) {
    long long missing = 0;
    for (int rec = 0; rec < s - 1; ++rec) {
      auto by = bypass_mask(rec, q);
      int cols = 0;
      for (int m = 0; m < k; ++m)
        if (by[m]) cols += machine_size[m];
      missing += static_cast<long long>(sizes[rec + 1]) * cols;
    }
    return static_cast<double>(missing) / (static_cast<double>(n) * d);
  };

  std::vector<double> candidates{0.0, 1.0};
  for (const auto& row : u)
    for (double x : row) candidates.push_back(std::nextafter(x, 2.0));
  double best_q = 0, best_dist = 2.0;
  for (double q : candidates) {
    const double dist = std::abs(rate_at(q) - cfg.target_missing_rate);
    if (dist < best_dist) best_dist = dist, best_q = q;
  }

  // Greedy refinement: flip single (recipe, machine) bypass bits while that
  // strictly improves the distance, keeping every incomplete recipe with at
  // least one bypassed and one observed machine. A single global threshold
  // cannot reach rates near the feasible extremes (the threshold picks which
  // machine stays observed at random, not the smallest one).
  std::vector<std::vector<char>> masks(s - 1);
  for (int rec = 0; rec < s - 1; ++rec) masks[rec] = bypass_mask(rec, best_q);
  const double total_cells = static_cast<double>(n) * d;
  auto mask_rate = [&]() {
    long long missing = 0;
    for (int rec = 0; rec < s - 1; ++rec) {
      int cols = 0;
      for (int m = 0; m < k; ++m)
        if (masks[rec][m]) cols += machine_size[m];
      missing += static_cast<long long>(sizes[rec + 1]) * cols;
    }
    return static_cast<double>(missing) / total_cells;
  };
  double current = mask_rate();
  best_dist = std::abs(current - cfg.target_missing_rate);
  for (bool improved = true; improved;) {
    improved = false;
    int flip_rec = -1, flip_m = -1;
    double flip_dist = best_dist, flip_rate = current;
    for (int rec = 0; rec < s - 1; ++rec) {
      int bypassed = 0;
      for (int m = 0; m < k; ++m) bypassed += masks[rec][m];
      for (int m = 0; m < k; ++m) {
        const int after = bypassed + (masks[rec][m] ? -1 : 1);
        if (after < 1 || after > k - 1) continue;
        const double delta = (masks[rec][m] ? -1.0 : 1.0) * sizes[rec + 1] *
                             machine_size[m] / total_cells;
        const double cand_rate = current + delta;
        const double dist = std::abs(cand_rate - cfg.target_missing_rate);
        if (dist < flip_dist - 1e-15) {
          flip_dist = dist;
          flip_rate = cand_rate;
          flip_rec = rec;
          flip_m = m;
        }
      }
    }
    int swap_rec = -1, swap_on = -1, swap_off = -1;
    for (int rec = 0; rec < s - 1; ++rec)
      for (int m1 = 0; m1 < k; ++m1) {
        if (masks[rec][m1]) continue;  // m1 becomes bypassed
        for (int m2 = 0; m2 < k; ++m2) {
          if (!masks[rec][m2] || m2 == m1) continue;  // m2 becomes observed
          const double delta = static_cast<double>(sizes[rec + 1]) *
                               (machine_size[m1] - machine_size[m2]) / total_cells;
          const double cand_rate = current + delta;
          const double dist = std::abs(cand_rate - cfg.target_missing_rate);
          if (dist < flip_dist - 1e-15) {
            flip_dist = dist;
            flip_rate = cand_rate;
            flip_rec = -1;
            swap_rec = rec;
            swap_on = m1;
            swap_off = m2;
          }
        }
      }
    if (flip_rec >= 0) {
      masks[flip_rec][flip_m] = !masks[flip_rec][flip_m];
      current = flip_rate;
      best_dist = flip_dist;
      improved = true;
    } else if (swap_rec >= 0) {
      masks[swap_rec][swap_on] = 1;
      masks[swap_rec][swap_off] = 0;
      current = flip_rate;
      best_dist = flip_dist;
      improved = true;
    }
  }
  if (best_dist > 0.02)
    throw ConfigError(
        "apply_recipe_missingness: target missing rate infeasible for this "
        "recipe/machine layout (closest achievable is off by " +
        std::to_string(best_dist) + ")");

  out.recipe_names.clear();
  for (int i = 0; i < s; ++i) out.recipe_names.push_back("r" + std::to_string(i + 1));
  int row = 0;
  for (int rec = 0; rec < s; ++rec) {
    std::vector<char> by = rec == 0 ? std::vector<char>(k, 0) : masks[rec - 1];
    for (int i = 0; i < sizes[rec]; ++i, ++row) {
      out.recipe_of[row] = rec;
      for (int j = 0; j < d; ++j) {
        if (by[data.machine_of[j]]) {
          out.values(row, j) = 0;
          out.present(row, j) = 0;
        }
      }
    }
  }
  if (realized_rate) *realized_rate = current;
  return out;
}

Benchmark generate_benchmark(const GenConfig& cfg) {
  Benchmark b;
  b.truth = generate_ground_truth(cfg);
  Dataset complete = sample_complete_data(b.truth, cfg);
  b.data = apply_recipe_missingness(complete, b.truth, cfg, &b.realized_missing_rate);
  return b;
}

void write_benchmark(const std::filesystem::path& dir, const GroundTruth& gt,
                     const Dataset& data) {
  std::filesystem::create_directories(dir);
  io::write_data_csv(dir / "data.csv", data);
  io::write_meta_json(dir / "meta.json", data);
  io::write_edges_csv(dir / "truth_edges.csv", gt.dag, data.sensor_names);
  ExpertKnowledge ek;
  ek.required = gt.expert_required;
  io::write_expert_json(dir / "expert.json", ek, data.sensor_names);
}

}  // namespace coke
