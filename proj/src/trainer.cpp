#include "coke/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "coke/metrics.hpp"

namespace coke {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("TrainConfig: iterations must be >= 1");
  if (batch_n < 2) throw ConfigError("TrainConfig: batch_n must be >= 2");
  if (gamma < 0 || gamma >= 1) throw ConfigError("TrainConfig: need 0 <= gamma < 1");
  if (learning_rate <= 0) throw ConfigError("TrainConfig: learning_rate must be > 0");
  if (critic_weight < 0) throw ConfigError("TrainConfig: critic_weight must be >= 0");
  if (hidden < 1) throw ConfigError("TrainConfig: hidden must be >= 1");
}

BatchSet resample_batches(const Dataset& dataset, const std::vector<Recipe>& recipes,
                          int n, std::mt19937_64& rng, bool allow_miss_only) {
  BatchSet out;
  for (const auto& rec : recipes) {
    if (rec.n() < n) {
      if (rec.is_full && !allow_miss_only)
        throw ConfigError("resample_batches: r_full has only " +
                          std::to_string(rec.n()) + " rows but n=" + std::to_string(n) +
                          " are required for the reward");
      continue;  // recipes below n are excluded
    }
    // Partial Fisher-Yates draw of n distinct rows.
    std::vector<int> idx = rec.row_indices;
    for (int i = 0; i < n; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(idx.size()) - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    if (rec.is_full) {
      out.full.resize(n, dataset.cols());
      for (int i = 0; i < n; ++i) out.full.row(i) = dataset.values.row(idx[i]);
      out.has_full = true;
    } else {
      RecipeBatch rb;
      rb.recipe_id = rec.id;
      rb.observed = rec.observed;
      rb.x.resize(n, rec.observed.size());
      for (int i = 0; i < n; ++i)
        for (size_t c = 0; c < rec.observed.size(); ++c)
          rb.x(i, c) = dataset.values(idx[i], rec.observed[c]);
      out.miss.push_back(std::move(rb));
    }
  }
  bool any_full = false;
  for (const auto& rec : recipes) any_full = any_full || rec.is_full;
  if (!any_full && !allow_miss_only)
    throw ConfigError(
        "resample_batches: no complete recipe (r_full) in the dataset; enable the "
        "miss-only fallback to proceed without one");
  return out;
}

namespace {

struct Episode {
  bool has_full = false;
  AttentionTape full_tape;
  Eigen::MatrixXd z_full;
  bool has_miss = false;
  MissEmbedding miss;
  Eigen::MatrixXd z_miss;
  Eigen::MatrixXd z_gamma;
  DecodeTape decode;
  CriticTape critic;
  CandidateGraph candidate;
};

// Reward for the miss-only fallback: BIC on the largest observed recipe batch
// restricted to its columns, plus the usual expert penalty on the full graph.
RewardBreakdown miss_only_reward(const Adjacency& g, const BatchSet& batches,
                                 const ExpertKnowledge& ek, const RewardConfig& rcfg) {
  if (batches.miss.empty())
    throw ConfigError("train_step: no usable recipe batch for the reward");
  const RecipeBatch* best = &batches.miss[0];
  for (const auto& rb : batches.miss)
    if (rb.observed.size() > best->observed.size()) best = &rb;
  const int ds = static_cast<int>(best->observed.size());
  std::vector<int> local_of(g.dim(), -1);
  for (int c = 0; c < ds; ++c) local_of[best->observed[c]] = c;
  Adjacency sub(ds);
  for (int a = 0; a < ds; ++a)
    for (int b = 0; b < ds; ++b)
      if (a != b && g.edge(best->observed[a], best->observed[b])) sub.set(a, b, true);
  RewardBreakdown out = bic_reward(sub, best->x, ExpertKnowledge{}, rcfg);
  int missing_required = 0;
  for (const auto& e : ek.required)
    if (!g.edge(e.first, e.second)) ++missing_required;
  out.penalty = rcfg.penalty_weight * missing_required;
  out.edge_count = g.edge_count();
  out.reward = -out.bic_term - out.penalty;
  return out;
}

Episode run_episode(TrainerState& state, const BatchSet& batches,
                    const TrainConfig& cfg, const RewardConfig& rcfg,
                    DecodeMode mode) {
  const int d = state.g_k.dim();
  const int h = cfg.hidden;
  Episode ep;

  ep.has_full = batches.has_full;
  if (ep.has_full) {
    ep.full_tape = complete_path(batches.full, state.g_k, state.params);
    ep.z_full = ep.full_tape.z;
  } else {
    if (!cfg.allow_miss_only)
      throw ConfigError("train_step: r_full batch missing; enable the miss-only fallback");
    ep.z_full = Eigen::MatrixXd::Zero(h, d);
  }

  ep.has_miss = cfg.use_incomplete && !batches.miss.empty();
  if (ep.has_miss) {
    ep.miss = incomplete_path(batches.miss, state.g_k, d, state.params);
    ep.z_miss = ep.miss.z_miss;
  } else {
    ep.z_miss = Eigen::MatrixXd::Zero(h, d);
  }

  ep.z_gamma = combine(ep.z_full, ep.z_miss, state.params);
  ep.decode = generate_ordering(ep.z_gamma, state.params, mode, state.rng);
  ep.critic = critic_value(ep.z_gamma, state.params);

  ep.candidate.ordering = ep.decode.ordering;
  ep.candidate.adjacency =
      prune_with_initial(ordering_to_full_dag(ep.decode.ordering), state.g_k);
  const RewardBreakdown rb =
      ep.has_full ? bic_reward(ep.candidate.adjacency, batches.full, state.ek, rcfg)
                  : miss_only_reward(ep.candidate.adjacency, batches, state.ek, rcfg);
  ep.candidate.reward = rb.reward;
  ep.candidate.bic = rb.bic_term;
  ep.candidate.penalty = rb.penalty;
  return ep;
}

void adam_update(NetworkParams& params, AdamState& adam, const Gradients& grads,
                 const TrainConfig& cfg) {
  ++adam.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam.step));
  constexpr double kEps = 1e-8;

  std::vector<double*> pd, md, vd;
  std::vector<const double*> gd;
  std::vector<std::size_t> counts;
  for_each_tensor(params, [&](const std::string&, double* p, std::size_t c) {
    pd.push_back(p);
    counts.push_back(c);
  });
  for_each_tensor(adam.m, [&](const std::string&, double* p, std::size_t) {
    md.push_back(p);
  });
  for_each_tensor(adam.v, [&](const std::string&, double* p, std::size_t) {
    vd.push_back(p);
  });
  for_each_tensor(const_cast<Gradients&>(grads),
                  [&](const std::string&, double* p, std::size_t) { gd.push_back(p); });

  for (std::size_t t = 0; t < pd.size(); ++t) {
    for (std::size_t i = 0; i < counts[t]; ++i) {
      const double g = gd[t][i];
      md[t][i] = b1 * md[t][i] + (1 - b1) * g;
      vd[t][i] = b2 * vd[t][i] + (1 - b2) * g * g;
      pd[t][i] -= cfg.learning_rate * (md[t][i] / bc1) /
                  (std::sqrt(vd[t][i] / bc2) + kEps);
    }
  }
}

}  // namespace

CandidateGraph train_step(TrainerState& state, const BatchSet& batches,
                          const TrainConfig& cfg, const RewardConfig& rcfg) {
  Episode ep = run_episode(state, batches, cfg, rcfg, DecodeMode::kSample);
  const double reward = ep.candidate.reward;
  if (!std::isfinite(reward))
    throw NumericalError("train_step: non-finite reward " + std::to_string(reward));

  state.baseline = cfg.gamma * state.baseline + (1.0 - cfg.gamma) * reward;
  const double advantage = reward - state.baseline - ep.critic.value;

  Gradients grads = NetworkParams::zeros_like(state.params);
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(ep.z_gamma.rows(), ep.z_gamma.cols());
  // Actor loss -A * sum_t logprob_t; A treated as a constant.
  const std::vector<double> coeffs(ep.decode.steps.size(), -advantage);
  decode_backward(ep.decode, state.params, coeffs, grads, dz, cfg.entropy_bonus);
  // Critic loss critic_weight * (R - b - V)^2.
  critic_backward(ep.critic, ep.z_gamma, -2.0 * cfg.critic_weight * advantage,
                  state.params, grads, dz);

  grads.theta_full += dz.cwiseProduct(ep.z_full).sum();
  grads.theta_miss += dz.cwiseProduct(ep.z_miss).sum();
  if (ep.has_full)
    attend_backward(ep.full_tape, state.params.theta_full * dz, state.params, grads);
  if (ep.has_miss)
    incomplete_backward(ep.miss, state.params.theta_miss * dz, state.params, grads);
  if (!cfg.use_incomplete) grads.theta_miss = 0;  // theta_miss pinned at 0

  adam_update(state.params, state.adam, grads, cfg);
  if (!state.params.all_finite()) {
    std::ostringstream os;
    os << "train_step: parameters became non-finite (reward=" << reward
       << ", baseline=" << state.baseline << ", advantage=" << advantage
       << ", value=" << ep.critic.value << ")";
    throw NumericalError(os.str());
  }
  return ep.candidate;
}

TrainResult train(const Dataset& dataset, const ExpertKnowledge& ek,
                  const TrainConfig& cfg, const RewardConfig& reward_cfg,
                  const Adjacency* truth, const CheckpointFn& checkpoint_cb) {
  cfg.validate();
  reward_cfg.validate();
  dataset.validate();
  const int d = dataset.cols();
  const std::vector<Recipe> recipes = partition_by_recipe(dataset);

  // All r_full rows feed PNS; the reward later uses fresh n-row subsamples.
  Eigen::MatrixXd complete_rows(0, d);
  const int full_idx = find_full_recipe(recipes);
  if (full_idx >= 0) {
    const Recipe& rf = recipes[full_idx];
    complete_rows.resize(rf.n(), d);
    for (int i = 0; i < rf.n(); ++i)
      complete_rows.row(i) = dataset.values.row(rf.row_indices[i]);
  }

  InitialGraphOptions opt;
  opt.use_chronology = cfg.use_chronology;
  opt.use_expert = cfg.use_expert;
  opt.pns_top_m = cfg.pns_top_m;
  InitialGraph initial = build_initial_graph(dataset.machine_of, complete_rows, ek, opt);

  TrainerState state;
  state.params = NetworkParams::init(NetConfig{cfg.hidden, cfg.batch_n, cfg.seed});
  if (!cfg.use_incomplete) state.params.theta_miss = 0;
  state.adam.m = NetworkParams::zeros_like(state.params);
  state.adam.v = NetworkParams::zeros_like(state.params);
  state.rng.seed(cfg.seed);
  state.g_k = initial.g_k;
  if (cfg.use_expert) state.ek = ek;

  RewardConfig rcfg = reward_cfg;
  if (!cfg.use_expert) rcfg.penalty_weight = 0;

  TrainResult result;
  result.initial = initial;
  bool have_best = false;

  auto consider = [&](const CandidateGraph& cand, int trace_index) {
    if (!have_best || cand.reward > result.best.reward) {
      result.best = cand;
      result.trace.best_index = trace_index;
      have_best = true;
    }
  };

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    BatchSet batches = resample_batches(dataset, recipes, cfg.batch_n, state.rng,
                                        cfg.allow_miss_only);
    CandidateGraph cand = train_step(state, batches, cfg, rcfg);

    TraceRow row;
    row.iteration = iter;
    row.reward = cand.reward;
    row.bic_term = cand.bic;
    row.penalty = cand.penalty;
    row.edges = cand.adjacency.edge_count();
    row.theta_full = state.params.theta_full;
    row.theta_miss = state.params.theta_miss;
    if (truth) {
      row.f1 = edge_confusion(cand.adjacency, *truth).f1;
      row.has_f1 = true;
    }
    result.trace.rows.push_back(row);
    consider(cand, static_cast<int>(result.trace.rows.size()) - 1);

    if (cfg.greedy_redecode && iter % 50 == 0) {
      Episode greedy = run_episode(state, batches, cfg, rcfg, DecodeMode::kGreedy);
      consider(greedy.candidate, static_cast<int>(result.trace.rows.size()) - 1);
    }
    if (checkpoint_cb && cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0)
      checkpoint_cb(iter, state.params);
  }

  result.params = std::move(state.params);
  return result;
}

}  // namespace coke
