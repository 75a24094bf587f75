#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "coke/core.hpp"
#include "coke/initgraph.hpp"
#include "coke/neuralnet.hpp"
#include "coke/scoring.hpp"

namespace coke {

struct TrainConfig {
  int iterations = 2000;
  int batch_n = 32;           // n rows sampled per recipe per iteration
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double gamma = 0.95;        // baseline smoothing
  double entropy_bonus = 0.0;
  double critic_weight = 0.5;
  std::uint64_t seed = 0;
  int hidden = 64;
  int checkpoint_every = 0;
  int pns_top_m = 0;          // 0 -> min(20, d-1)
  bool greedy_redecode = false;  // optional greedy candidate every 50 iterations
  bool allow_miss_only = false;  // experimental fallback when r_full is absent
  // Ablation switches (Table-style CO / EK / Incomp.).
  bool use_chronology = true;
  bool use_expert = true;
  bool use_incomplete = true;

  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  double reward = 0, bic_term = 0, penalty = 0;
  int edges = 0;
  double theta_full = 0, theta_miss = 0;
  double f1 = 0;
  bool has_f1 = false;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  int best_index = -1;
};

/// One iteration's resampled batches.
struct BatchSet {
  Eigen::MatrixXd full;             // n x d; empty when r_full is absent
  bool has_full = false;
  std::vector<RecipeBatch> miss;    // recipes with >= n rows, in recipe order
};

/// Samples n rows without replacement from every recipe with at least n rows.
/// Recipes below n are excluded. Missing r_full is an error unless the
/// miss-only fallback is allowed.
BatchSet resample_batches(const Dataset& dataset, const std::vector<Recipe>& recipes,
                          int n, std::mt19937_64& rng, bool allow_miss_only = false);

struct AdamState {
  Gradients m, v;
  long step = 0;
};

struct TrainerState {
  NetworkParams params;
  AdamState adam;
  double baseline = 0;
  std::mt19937_64 rng;
  Adjacency g_k;
  ExpertKnowledge ek;  // empty when use_expert is off
};

/// One actor-critic step: embed, sample an ordering, prune, score, update the
/// baseline and all parameters. Returns the scored candidate.
CandidateGraph train_step(TrainerState& state, const BatchSet& batches,
                          const TrainConfig& cfg, const RewardConfig& reward_cfg);

struct TrainResult {
  CandidateGraph best;
  TrainTrace trace;
  NetworkParams params;
  InitialGraph initial;
};

/// Full training loop. `truth` enables the per-iteration F1 trace column.
/// checkpoint_cb fires every checkpoint_every iterations (when > 0).
using CheckpointFn = std::function<void(int iteration, const NetworkParams&)>;
TrainResult train(const Dataset& dataset, const ExpertKnowledge& ek,
                  const TrainConfig& cfg, const RewardConfig& reward_cfg,
                  const Adjacency* truth = nullptr,
                  const CheckpointFn& checkpoint_cb = {});

}  // namespace coke
