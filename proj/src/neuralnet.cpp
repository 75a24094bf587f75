#include "coke/neuralnet.hpp"

#include <algorithm>
#include <cmath>

namespace coke {

namespace {

void uniform_fill(Eigen::Ref<Eigen::MatrixXd> m, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

}  // namespace

NetworkParams NetworkParams::init(const NetConfig& cfg) {
  const int h = cfg.hidden;
  const int n = cfg.n_batch;
  if (h < 1 || n < 1) throw ConfigError("NetConfig: hidden and n_batch must be >= 1");
  std::mt19937_64 rng(cfg.seed);

  NetworkParams p;
  p.w_in.resize(h, n);
  p.b_in.resize(h);
  p.w_query.resize(h, h);
  p.w_key.resize(h, h);
  p.w_value.resize(h, h);
  p.attn_score.resize(h);
  p.dec_ctx.resize(h, h);
  p.dec_cand.resize(h, h);
  p.dec_b1.resize(h);
  p.dec_out.resize(h);
  p.critic_w1.resize(h, h);
  p.critic_b1.resize(h);
  p.critic_w2.resize(h);

  uniform_fill(p.w_in, n, rng);
  uniform_fill(p.b_in, n, rng);
  uniform_fill(p.w_query, h, rng);
  uniform_fill(p.w_key, h, rng);
  uniform_fill(p.w_value, h, rng);
  uniform_fill(p.attn_score, h, rng);
  uniform_fill(p.dec_ctx, h, rng);
  uniform_fill(p.dec_cand, h, rng);
  uniform_fill(p.dec_b1, h, rng);
  uniform_fill(p.dec_out, h, rng);
  Eigen::MatrixXd scalar(1, 1);
  uniform_fill(scalar, h, rng);
  p.dec_b2 = scalar(0, 0);
  uniform_fill(p.critic_w1, h, rng);
  uniform_fill(p.critic_b1, h, rng);
  uniform_fill(p.critic_w2, h, rng);
  uniform_fill(scalar, h, rng);
  p.critic_b2 = scalar(0, 0);
  p.theta_full = 0.5;
  p.theta_miss = 0.5;
  return p;
}

NetworkParams NetworkParams::zeros_like(const NetworkParams& p) {
  NetworkParams z = p;
  for_each_tensor(z, [](const std::string&, double* data, std::size_t count) {
    std::fill(data, data + count, 0.0);
  });
  return z;
}

bool NetworkParams::all_finite() const {
  bool ok = true;
  for_each_tensor(const_cast<NetworkParams&>(*this),
                  [&ok](const std::string&, double* data, std::size_t count) {
                    for (std::size_t i = 0; i < count; ++i)
                      if (!std::isfinite(data[i])) ok = false;
                  });
  return ok;
}

void for_each_tensor(
    NetworkParams& p,
    const std::function<void(const std::string&, double*, std::size_t)>& f) {
  f("w_in", p.w_in.data(), p.w_in.size());
  f("b_in", p.b_in.data(), p.b_in.size());
  f("w_query", p.w_query.data(), p.w_query.size());
  f("w_key", p.w_key.data(), p.w_key.size());
  f("w_value", p.w_value.data(), p.w_value.size());
  f("attn_score", p.attn_score.data(), p.attn_score.size());
  f("theta_full", &p.theta_full, 1);
  f("theta_miss", &p.theta_miss, 1);
  f("dec_ctx", p.dec_ctx.data(), p.dec_ctx.size());
  f("dec_cand", p.dec_cand.data(), p.dec_cand.size());
  f("dec_b1", p.dec_b1.data(), p.dec_b1.size());
  f("dec_out", p.dec_out.data(), p.dec_out.size());
  f("dec_b2", &p.dec_b2, 1);
  f("critic_w1", p.critic_w1.data(), p.critic_w1.size());
  f("critic_b1", p.critic_b1.data(), p.critic_b1.size());
  f("critic_w2", p.critic_w2.data(), p.critic_w2.size());
  f("critic_b2", &p.critic_b2, 1);
}

std::size_t parameter_count(const NetworkParams& p) {
  std::size_t total = 0;
  for_each_tensor(const_cast<NetworkParams&>(p),
                  [&total](const std::string&, double*, std::size_t c) { total += c; });
  return total;
}

Eigen::MatrixXd batch_norm_columns(const Eigen::MatrixXd& batch) {
  const int n = static_cast<int>(batch.rows());
  if (n < 2) throw ConfigError("batch_norm_columns: need at least 2 rows");
  constexpr double kEps = 1e-5;
  Eigen::MatrixXd out(batch.rows(), batch.cols());
  for (Eigen::Index j = 0; j < batch.cols(); ++j) {
    const double mean = batch.col(j).mean();
    const double var = (batch.col(j).array() - mean).square().mean();
    out.col(j) = (batch.col(j).array() - mean) / std::sqrt(var + kEps);
  }
  return out;
}

std::vector<std::vector<int>> aggregation_sets(const std::vector<int>& cols,
                                               const Adjacency& g_k) {
  const int c = static_cast<int>(cols.size());
  std::vector<int> local_of(g_k.dim(), -1);
  for (int i = 0; i < c; ++i) local_of[cols[i]] = i;
  std::vector<std::vector<int>> sets(c);
  for (int t = 0; t < c; ++t) {
    sets[t].push_back(t);  // self first
    for (int p : g_k.parents_of(cols[t])) {
      const int lp = local_of[p];
      if (lp >= 0 && lp != t) sets[t].push_back(lp);
    }
  }
  return sets;
}

AttentionTape attend_parents(const Eigen::MatrixXd& x_normalized,
                             const std::vector<int>& cols,
                             const std::vector<std::vector<int>>& sets,
                             const NetworkParams& params) {
  const int c = static_cast<int>(cols.size());
  const int h = params.hidden();
  if (x_normalized.cols() != c)
    throw ConfigError("attend_parents: column count mismatch");
  if (x_normalized.rows() != params.n_batch())
    throw ConfigError("attend_parents: batch row count does not match w_in");

  AttentionTape tape;
  tape.x = x_normalized;
  tape.cols = cols;
  tape.sets = sets;
  tape.e = (params.w_in * x_normalized).colwise() + params.b_in;
  tape.q = params.w_query * tape.e;
  tape.k = params.w_key * tape.e;
  tape.v = params.w_value * tape.e;
  tape.z.setZero(h, c);
  tape.tanh_act.resize(c);
  tape.alpha.resize(c);

  for (int t = 0; t < c; ++t) {
    const auto& set = sets[t];
    const int m = static_cast<int>(set.size());
    Eigen::MatrixXd u(h, m);
    Eigen::VectorXd score(m);
    for (int i = 0; i < m; ++i) {
      u.col(i) = (tape.q.col(t) + tape.k.col(set[i])).array().tanh();
      score(i) = params.attn_score.dot(u.col(i));
    }
    const double mx = score.maxCoeff();
    Eigen::VectorXd a = (score.array() - mx).exp();
    a /= a.sum();
    for (int i = 0; i < m; ++i) tape.z.col(t) += a(i) * tape.v.col(set[i]);
    tape.tanh_act[t] = std::move(u);
    tape.alpha[t] = std::move(a);
  }
  return tape;
}

void attend_backward(const AttentionTape& tape, const Eigen::MatrixXd& dz,
                     const NetworkParams& params, Gradients& grads) {
  const int c = static_cast<int>(tape.cols.size());
  const int h = params.hidden();
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(h, c);
  Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(h, c);
  Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(h, c);

  for (int t = 0; t < c; ++t) {
    const auto& set = tape.sets[t];
    const int m = static_cast<int>(set.size());
    const Eigen::VectorXd& a = tape.alpha[t];
    Eigen::VectorXd dalpha(m);
    for (int i = 0; i < m; ++i) {
      dalpha(i) = dz.col(t).dot(tape.v.col(set[i]));
      dv.col(set[i]) += a(i) * dz.col(t);
    }
    const double inner = a.dot(dalpha);
    for (int i = 0; i < m; ++i) {
      const double dscore = a(i) * (dalpha(i) - inner);
      const auto u = tape.tanh_act[t].col(i);
      grads.attn_score += dscore * u;
      Eigen::VectorXd dpre =
          (dscore * params.attn_score.array() * (1.0 - u.array().square())).matrix();
      dq.col(t) += dpre;
      dk.col(set[i]) += dpre;
    }
  }

  grads.w_query += dq * tape.e.transpose();
  grads.w_key += dk * tape.e.transpose();
  grads.w_value += dv * tape.e.transpose();
  Eigen::MatrixXd de = params.w_query.transpose() * dq +
                       params.w_key.transpose() * dk +
                       params.w_value.transpose() * dv;
  grads.w_in += de * tape.x.transpose();
  grads.b_in += de.rowwise().sum();
}

AttentionTape complete_path(const Eigen::MatrixXd& r_full_batch, const Adjacency& g_k,
                            const NetworkParams& params) {
  const int d = g_k.dim();
  std::vector<int> cols(d);
  for (int j = 0; j < d; ++j) cols[j] = j;
  return attend_parents(batch_norm_columns(r_full_batch), cols,
                        aggregation_sets(cols, g_k), params);
}

MissEmbedding incomplete_path(const std::vector<RecipeBatch>& batches,
                              const Adjacency& g_k, int d,
                              const NetworkParams& params) {
  MissEmbedding out;
  out.tapes.resize(batches.size());
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < static_cast<int>(batches.size()); ++b) {
    const auto& rb = batches[b];
    out.tapes[b] = attend_parents(batch_norm_columns(rb.x), rb.observed,
                                  aggregation_sets(rb.observed, g_k), params);
  }
  out.z_miss.setZero(params.hidden(), d);
  out.counts.assign(d, 0);
  // Mean reduced in recipe order for floating-point determinism.
  for (const auto& tape : out.tapes) {
    for (size_t t = 0; t < tape.cols.size(); ++t) {
      out.z_miss.col(tape.cols[t]) += tape.z.col(t);
      ++out.counts[tape.cols[t]];
    }
  }
  for (int j = 0; j < d; ++j)
    if (out.counts[j] > 0) out.z_miss.col(j) /= static_cast<double>(out.counts[j]);
  return out;
}

void incomplete_backward(const MissEmbedding& miss, const Eigen::MatrixXd& dz_miss,
                         const NetworkParams& params, Gradients& grads) {
  for (const auto& tape : miss.tapes) {
    Eigen::MatrixXd dz(dz_miss.rows(), tape.cols.size());
    for (size_t t = 0; t < tape.cols.size(); ++t) {
      const int j = tape.cols[t];
      dz.col(t) = dz_miss.col(j) / static_cast<double>(miss.counts[j]);
    }
    attend_backward(tape, dz, params, grads);
  }
}

DecoderState DecoderState::from_embeddings(const Eigen::MatrixXd& z_gamma,
                                           const NetworkParams& params) {
  DecoderState s;
  s.z = z_gamma;
  s.cand_proj = params.dec_cand * z_gamma;
  s.is_selected.assign(z_gamma.cols(), 0);
  return s;
}

void mask_state(DecoderState& state, int chosen) {
  if (chosen < 0 || chosen >= state.dim())
    throw ConfigError("mask_state: index out of range");
  if (state.is_selected[chosen])
    throw ConfigError("mask_state: variable " + std::to_string(chosen) +
                      " already masked");
  state.z.col(chosen).setZero();
  state.cand_proj.col(chosen).setZero();
  state.is_selected[chosen] = 1;
  state.selected.push_back(chosen);
}

DecodeStep decode_step(const DecoderState& state, const NetworkParams& params,
                       DecodeMode mode, std::mt19937_64& rng, int forced) {
  const int d = state.dim();
  DecodeStep step;
  for (int j = 0; j < d; ++j)
    if (!state.is_selected[j]) step.avail.push_back(j);
  const int m = static_cast<int>(step.avail.size());
  if (m == 0) throw ConfigError("decode_step: all variables already selected");

  step.ctx.setZero(params.hidden());
  for (int j : step.avail) step.ctx += state.z.col(j);
  step.ctx /= static_cast<double>(m);

  const Eigen::VectorXd ctx_proj = params.dec_ctx * step.ctx;
  step.u.resize(params.hidden(), m);
  step.logits.resize(m);
  for (int i = 0; i < m; ++i) {
    step.u.col(i) =
        (ctx_proj + state.cand_proj.col(step.avail[i]) + params.dec_b1).array().tanh();
    step.logits(i) = params.dec_out.dot(step.u.col(i)) + params.dec_b2;
  }

  const double mx = step.logits.maxCoeff();
  Eigen::VectorXd ex = (step.logits.array() - mx).exp();
  const double lse = mx + std::log(ex.sum());
  step.probs = ex / ex.sum();

  int pick = -1;
  if (forced >= 0) {
    for (int i = 0; i < m; ++i)
      if (step.avail[i] == forced) pick = i;
    if (pick < 0) throw ConfigError("decode_step: forced variable not available");
  } else if (mode == DecodeMode::kGreedy) {
    pick = 0;
    for (int i = 1; i < m; ++i)
      if (step.logits(i) > step.logits(pick)) pick = i;  // ties -> lowest index
  } else {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double r = unif(rng);
    double cum = 0;
    pick = m - 1;
    for (int i = 0; i < m; ++i) {
      cum += step.probs(i);
      if (r < cum) {
        pick = i;
        break;
      }
    }
  }
  step.chosen = pick;
  step.logprob = step.logits(pick) - lse;
  return step;
}

namespace {

DecodeTape run_decoder(const Eigen::MatrixXd& z_gamma, const NetworkParams& params,
                       DecodeMode mode, std::mt19937_64& rng,
                       const std::vector<int>* forced_perm) {
  const int d = static_cast<int>(z_gamma.cols());
  if (d < 1) throw ConfigError("generate_ordering: need at least one variable");
  DecodeTape tape;
  tape.z = z_gamma;
  DecoderState state = DecoderState::from_embeddings(z_gamma, params);
  for (int t = 0; t < d; ++t) {
    const int forced = forced_perm ? (*forced_perm)[t] : -1;
    DecodeStep step = decode_step(state, params, mode, rng, forced);
    const int var = step.avail[step.chosen];
    tape.ordering.perm.push_back(var);
    tape.ordering.step_logprobs.push_back(step.logprob);
    tape.steps.push_back(std::move(step));
    mask_state(state, var);
  }
  return tape;
}

}  // namespace

DecodeTape generate_ordering(const Eigen::MatrixXd& z_gamma, const NetworkParams& params,
                             DecodeMode mode, std::mt19937_64& rng) {
  return run_decoder(z_gamma, params, mode, rng, nullptr);
}

DecodeTape score_ordering(const Eigen::MatrixXd& z_gamma, const NetworkParams& params,
                          const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != z_gamma.cols())
    throw ConfigError("score_ordering: permutation length mismatch");
  std::mt19937_64 rng(0);
  return run_decoder(z_gamma, params, DecodeMode::kGreedy, rng, &perm);
}

void decode_backward(const DecodeTape& tape, const NetworkParams& params,
                     const std::vector<double>& step_coeffs, Gradients& grads,
                     Eigen::MatrixXd& dz, double entropy_coeff) {
  if (step_coeffs.size() != tape.steps.size())
    throw ConfigError("decode_backward: coefficient count mismatch");
  const int h = params.hidden();
  for (size_t t = 0; t < tape.steps.size(); ++t) {
    const DecodeStep& step = tape.steps[t];
    const double coeff = step_coeffs[t];
    if (coeff == 0.0 && entropy_coeff == 0.0) continue;
    const int m = static_cast<int>(step.avail.size());
    Eigen::VectorXd dlogits = -coeff * step.probs;
    dlogits(step.chosen) += coeff;
    if (entropy_coeff != 0.0) {
      double entropy = 0;
      Eigen::VectorXd logp(m);
      for (int i = 0; i < m; ++i) {
        logp(i) = std::log(std::max(step.probs(i), 1e-300));
        entropy -= step.probs(i) * logp(i);
      }
      for (int i = 0; i < m; ++i)
        dlogits(i) += entropy_coeff * step.probs(i) * (logp(i) + entropy);
    }

    Eigen::VectorXd dctx_proj = Eigen::VectorXd::Zero(h);
    for (int i = 0; i < m; ++i) {
      const double dl = dlogits(i);
      const auto u = step.u.col(i);
      grads.dec_out += dl * u;
      grads.dec_b2 += dl;
      Eigen::VectorXd dpre =
          (dl * params.dec_out.array() * (1.0 - u.array().square())).matrix();
      grads.dec_b1 += dpre;
      dctx_proj += dpre;
      grads.dec_cand += dpre * tape.z.col(step.avail[i]).transpose();
      dz.col(step.avail[i]) += params.dec_cand.transpose() * dpre;
    }
    grads.dec_ctx += dctx_proj * step.ctx.transpose();
    const Eigen::VectorXd dctx = params.dec_ctx.transpose() * dctx_proj;
    for (int j : step.avail) dz.col(j) += dctx / static_cast<double>(m);
  }
}

CriticTape critic_value(const Eigen::MatrixXd& z_gamma, const NetworkParams& params) {
  CriticTape tape;
  tape.m = z_gamma.rowwise().mean();
  if (!tape.m.allFinite()) throw NumericalError("critic_value: non-finite state");
  tape.act = (params.critic_w1 * tape.m + params.critic_b1).array().tanh();
  tape.value = params.critic_w2.dot(tape.act) + params.critic_b2;
  return tape;
}

void critic_backward(const CriticTape& tape, const Eigen::MatrixXd& z_gamma,
                     double dvalue, const NetworkParams& params, Gradients& grads,
                     Eigen::MatrixXd& dz) {
  grads.critic_w2 += dvalue * tape.act;
  grads.critic_b2 += dvalue;
  Eigen::VectorXd dpre =
      (dvalue * params.critic_w2.array() * (1.0 - tape.act.array().square())).matrix();
  grads.critic_b1 += dpre;
  grads.critic_w1 += dpre * tape.m.transpose();
  const Eigen::VectorXd dm = params.critic_w1.transpose() * dpre;
  const double d = static_cast<double>(z_gamma.cols());
  for (Eigen::Index j = 0; j < z_gamma.cols(); ++j) dz.col(j) += dm / d;
}

}  // namespace coke
