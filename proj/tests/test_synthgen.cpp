#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "coke/scoring.hpp"
#include "coke/synthgen.hpp"

using namespace coke;

namespace {

GenConfig base_cfg() {
  GenConfig cfg;
  cfg.p = 4;
  cfg.k = 2;
  cfg.samples = 100;
  cfg.edge_density = 1.0;
  cfg.target_missing_rate = 0;
  cfg.recipe_count = 1;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("ground truth with density 1 keeps every machine-monotone pair") {
  const GroundTruth gt = generate_ground_truth(base_cfg());
  CHECK(gt.machine_of == std::vector<int>{0, 0, 1, 1});
  // All i<j pairs: {1->2,3->4} within machines plus the four cross pairs.
  CHECK(gt.dag.edge_count() == 6);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) CHECK(gt.dag.edge(i, j));
}

TEST_CASE("ground truth with density 0 is empty") {
  GenConfig cfg = base_cfg();
  cfg.edge_density = 0;  // auto density; force explicit zero via a tiny epsilon
  cfg.edge_density = 1e-300;
  const GroundTruth gt = generate_ground_truth(cfg);
  CHECK(gt.dag.edge_count() == 0);
  CHECK(gt.expert_required.empty());
}

TEST_CASE("large ground truth is acyclic and machine-monotone") {
  GenConfig cfg;
  cfg.p = 180;
  cfg.k = 60;
  cfg.samples = 10;
  cfg.target_missing_rate = 0;
  cfg.recipe_count = 1;
  cfg.seed = 99;
  const GroundTruth gt = generate_ground_truth(cfg);
  CHECK(is_acyclic(gt.dag));
  for (const auto& [i, j] : gt.dag.edges()) CHECK(gt.machine_of[i] <= gt.machine_of[j]);
  for (const auto& e : gt.expert_required) CHECK(gt.dag.edge(e.first, e.second));
}

TEST_CASE("near-zero noise pins root columns to their means") {
  GenConfig cfg = base_cfg();
  cfg.p = 1;
  cfg.k = 1;
  cfg.noise_sigma = 1e-8;
  const GroundTruth gt = generate_ground_truth(cfg);
  const Dataset data = sample_complete_data(gt, cfg);
  for (int r = 0; r < data.rows(); ++r)
    CHECK(data.values(r, 0) == doctest::Approx(gt.root_means[0]).epsilon(1e-5));
}

TEST_CASE("chain correlation approaches 1/sqrt(2)") {
  GenConfig cfg;
  cfg.p = 2;
  cfg.k = 2;
  cfg.samples = 10000;
  cfg.edge_density = 1.0;
  cfg.noise_sigma = 1.0;
  cfg.target_missing_rate = 0;
  cfg.recipe_count = 1;
  cfg.seed = 21;
  const GroundTruth gt = generate_ground_truth(cfg);
  const Dataset data = sample_complete_data(gt, cfg);
  const Eigen::VectorXd x = data.values.col(0), y = data.values.col(1);
  const double cx = (x.array() - x.mean()).matrix().norm();
  const double cy = (y.array() - y.mean()).matrix().norm();
  const double corr =
      (x.array() - x.mean()).matrix().dot((y.array() - y.mean()).matrix()) / (cx * cy);
  CHECK(corr == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.07));
}

TEST_CASE("two-parent node regresses to coefficients (0.5, 0.5)") {
  GenConfig cfg;
  cfg.p = 3;
  cfg.k = 3;
  cfg.samples = 10000;
  cfg.edge_density = 0;
  cfg.target_missing_rate = 0;
  cfg.recipe_count = 1;
  cfg.seed = 8;
  GroundTruth gt = generate_ground_truth(cfg);
  gt.dag = Adjacency(3);
  gt.dag.set(0, 2, true);
  gt.dag.set(1, 2, true);
  const Dataset data = sample_complete_data(gt, cfg);
  const RegressionFit fit = fit_parent_regression(data.values, 2, {0, 1}, 1e-6);
  CHECK(fit.coefficients(0) == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(fit.coefficients(0) - 0.5) < 0.05);
  CHECK(std::abs(fit.coefficients(1) - 0.5) < 0.05);
}

TEST_CASE("root column means match root_means within 4 sigma / sqrt(N)") {
  GenConfig cfg;
  cfg.p = 6;
  cfg.k = 6;
  cfg.samples = 5000;
  cfg.edge_density = 1e-300;  // all roots
  cfg.target_missing_rate = 0;
  cfg.recipe_count = 1;
  cfg.seed = 13;
  const GroundTruth gt = generate_ground_truth(cfg);
  const Dataset data = sample_complete_data(gt, cfg);
  const double tol = 4.0 * cfg.noise_sigma / std::sqrt(cfg.samples);
  for (int j = 0; j < cfg.p; ++j)
    CHECK(std::abs(data.values.col(j).mean() - gt.root_means[j]) < tol);
}

TEST_CASE("missingness: target 0 leaves the data complete with one recipe") {
  GenConfig cfg = base_cfg();
  const GroundTruth gt = generate_ground_truth(cfg);
  const Dataset data = sample_complete_data(gt, cfg);
  double rate = -1;
  const Dataset out = apply_recipe_missingness(data, gt, cfg, &rate);
  CHECK(rate == 0);
  CHECK((out.present.array() == 1).all());
  CHECK(out.recipe_names.size() == 1);
}

TEST_CASE("missingness hits the target within 2 points") {
  GenConfig cfg;
  cfg.p = 50;
  cfg.k = 20;
  cfg.samples = 2000;
  cfg.target_missing_rate = 0.90;
  cfg.recipe_count = 12;
  cfg.seed = 3;
  const Benchmark bench = generate_benchmark(cfg);
  CHECK(bench.realized_missing_rate >= 0.88);
  CHECK(bench.realized_missing_rate <= 0.92);

  const double observed_missing =
      1.0 - bench.data.present.cast<double>().sum() /
                (static_cast<double>(cfg.samples) * cfg.p);
  CHECK(observed_missing == doctest::Approx(bench.realized_missing_rate).epsilon(1e-12));

  const auto recipes = partition_by_recipe(bench.data);
  int full_count = 0;
  for (const auto& r : recipes) {
    if (r.is_full)
      ++full_count;
    else
      CHECK_FALSE(r.missing.empty());  // every non-full recipe bypasses something
  }
  CHECK(full_count == 1);
}

TEST_CASE("missingness blanks whole machines per recipe") {
  GenConfig cfg;
  cfg.p = 10;
  cfg.k = 5;
  cfg.samples = 500;
  cfg.target_missing_rate = 0.5;
  cfg.recipe_count = 8;
  cfg.seed = 17;
  const Benchmark bench = generate_benchmark(cfg);
  for (const auto& rec : partition_by_recipe(bench.data)) {
    for (int m = 0; m < cfg.k; ++m) {
      int missing_in_machine = 0, total_in_machine = 0;
      for (int j = 0; j < cfg.p; ++j) {
        if (bench.data.machine_of[j] != m) continue;
        ++total_in_machine;
        for (int mj : rec.missing) missing_in_machine += mj == j;
      }
      CHECK((missing_in_machine == 0 || missing_in_machine == total_in_machine));
    }
  }
}

TEST_CASE("infeasible missing target is rejected") {
  GenConfig cfg = base_cfg();
  cfg.recipe_count = 3;
  cfg.full_fraction = 0.2;
  cfg.target_missing_rate = 0.85;  // > 1 - full_fraction
  const GroundTruth gt = generate_ground_truth(cfg);
  const Dataset data = sample_complete_data(gt, cfg);
  CHECK_THROWS_AS(apply_recipe_missingness(data, gt, cfg, nullptr), ConfigError);
}

TEST_CASE("generation is deterministic in the seed") {
  GenConfig cfg;
  cfg.p = 20;
  cfg.k = 8;
  cfg.samples = 300;
  cfg.target_missing_rate = 0.7;
  cfg.recipe_count = 6;
  cfg.seed = 77;
  const Benchmark a = generate_benchmark(cfg);
  const Benchmark b = generate_benchmark(cfg);
  CHECK(a.truth.dag == b.truth.dag);
  CHECK(a.data.values == b.data.values);
  CHECK((a.data.present.array() == b.data.present.array()).all());
  CHECK(a.truth.expert_required == b.truth.expert_required);

  GenConfig other = cfg;
  other.seed = 78;
  CHECK_FALSE(generate_benchmark(other).data.values == a.data.values);
}
