// Compares the OpenMP kernels against their serial references: per-variable
// regression residuals (BIC scoring) and the PNS correlation matrix.
#include <chrono>
#include <iostream>
#include <random>

#include "coke/initgraph.hpp"
#include "coke/scoring.hpp"
#include "coke/synthgen.hpp"

using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int main(int argc, char** argv) {
  const int p = argc > 1 ? std::atoi(argv[1]) : 180;
  const int n = argc > 2 ? std::atoi(argv[2]) : 256;
  const int reps = argc > 3 ? std::atoi(argv[3]) : 20;

  coke::GenConfig cfg;
  cfg.p = p;
  cfg.k = std::max(1, p / 3);
  cfg.samples = n;
  cfg.target_missing_rate = 0;
  cfg.recipe_count = 1;
  cfg.seed = 7;
  const coke::GroundTruth gt = coke::generate_ground_truth(cfg);
  const coke::Dataset data = coke::sample_complete_data(gt, cfg);
  const coke::Adjacency chrono = coke::chronological_prune(gt.machine_of);

  std::cout << "kernel benchmark: p=" << p << " n=" << n << " reps=" << reps << "\n";

  {
    auto t0 = Clock::now();
    std::vector<double> serial;
    for (int r = 0; r < reps; ++r)
      serial = coke::detail::per_variable_rss_serial(data.values, chrono, 1e-6);
    const double ts = ms_since(t0);
    t0 = Clock::now();
    std::vector<double> parallel;
    for (int r = 0; r < reps; ++r)
      parallel = coke::per_variable_rss(data.values, chrono, 1e-6);
    const double tp = ms_since(t0);
    double max_diff = 0;
    for (int j = 0; j < p; ++j)
      max_diff = std::max(max_diff, std::abs(serial[j] - parallel[j]));
    std::cout << "per_variable_rss   serial " << ts / reps << " ms/call, parallel "
              << tp / reps << " ms/call, speedup " << ts / tp << "x, max |diff| "
              << max_diff << "\n";
  }

  {
    auto t0 = Clock::now();
    Eigen::MatrixXd serial;
    for (int r = 0; r < reps; ++r)
      serial = coke::detail::abs_correlation_serial(data.values);
    const double ts = ms_since(t0);
    t0 = Clock::now();
    Eigen::MatrixXd parallel;
    for (int r = 0; r < reps; ++r) parallel = coke::abs_correlation(data.values);
    const double tp = ms_since(t0);
    std::cout << "abs_correlation    serial " << ts / reps << " ms/call, parallel "
              << tp / reps << " ms/call, speedup " << ts / tp << "x, max |diff| "
              << (serial - parallel).cwiseAbs().maxCoeff() << "\n";
  }
  return 0;
}
