#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "coke/core.hpp"

namespace coke {

struct NetConfig {
  int hidden = 64;
  int n_batch = 32;
  std::uint64_t seed = 0;
};

/// All trainable weights. The same struct doubles as a gradient container and
/// as optimizer moment storage (identical shapes, zero-initialized).
struct NetworkParams {
  Eigen::MatrixXd w_in;      // h x n   per-variable batch -> embedding
  Eigen::VectorXd b_in;      // h
  Eigen::MatrixXd w_query;   // h x h
  Eigen::MatrixXd w_key;     // h x h
  Eigen::MatrixXd w_value;   // h x h
  Eigen::VectorXd attn_score;  // h   additive-attention scoring vector
  double theta_full = 0.5;
  double theta_miss = 0.5;
  Eigen::MatrixXd dec_ctx;   // h x h   context half of the decoder input layer
  Eigen::MatrixXd dec_cand;  // h x h   candidate half
  Eigen::VectorXd dec_b1;    // h
  Eigen::VectorXd dec_out;   // h
  double dec_b2 = 0;
  Eigen::MatrixXd critic_w1;  // h x h
  Eigen::VectorXd critic_b1;  // h
  Eigen::VectorXd critic_w2;  // h
  double critic_b2 = 0;

  int hidden() const { return static_cast<int>(b_in.size()); }
  int n_batch() const { return static_cast<int>(w_in.cols()); }

  static NetworkParams init(const NetConfig& cfg);
  static NetworkParams zeros_like(const NetworkParams& p);

  bool all_finite() const;
};

/// Applies f(name, data, count) to every tensor in a fixed order.
void for_each_tensor(NetworkParams& p,
                     const std::function<void(const std::string&, double*, std::size_t)>& f);
std::size_t parameter_count(const NetworkParams& p);

using Gradients = NetworkParams;

/// Standardizes each column to mean 0 / variance 1 with epsilon 1e-5 in the
/// denominator; constant columns map to all-zeros.
Eigen::MatrixXd batch_norm_columns(const Eigen::MatrixXd& batch);

/// One attention pass over a (sub)set of variables. `x` holds the normalized
/// columns, `cols` maps local column -> global variable index, `sets` lists
/// each target's aggregation set in local indices with self first.
struct AttentionTape {
  Eigen::MatrixXd x;  // n x c
  std::vector<int> cols;
  std::vector<std::vector<int>> sets;
  Eigen::MatrixXd e, q, k, v;             // h x c each
  std::vector<Eigen::MatrixXd> tanh_act;  // per target: h x |S|
  std::vector<Eigen::VectorXd> alpha;     // per target: |S|, sums to 1
  Eigen::MatrixXd z;  // h x c
};

/// Builds each target's aggregation set {self} ∪ (Pa_gk(target) ∩ cols).
std::vector<std::vector<int>> aggregation_sets(const std::vector<int>& cols,
                                               const Adjacency& g_k);

AttentionTape attend_parents(const Eigen::MatrixXd& x_normalized,
                             const std::vector<int>& cols,
                             const std::vector<std::vector<int>>& sets,
                             const NetworkParams& params);

void attend_backward(const AttentionTape& tape, const Eigen::MatrixXd& dz,
                     const NetworkParams& params, Gradients& grads);

/// Batch-norm + attention over all d variables of the complete-recipe batch.
AttentionTape complete_path(const Eigen::MatrixXd& r_full_batch, const Adjacency& g_k,
                            const NetworkParams& params);

struct RecipeBatch {
  int recipe_id = 0;
  std::vector<int> observed;  // global column indices
  Eigen::MatrixXd x;          // n x |observed|, raw values
};

/// Per-recipe attention restricted to observed variables; per variable the
/// recipe embeddings are averaged. Variables observed in no incomplete recipe
/// get the zero vector and count 0.
struct MissEmbedding {
  std::vector<AttentionTape> tapes;  // in recipe order
  Eigen::MatrixXd z_miss;            // h x d
  std::vector<int> counts;           // per variable
};
MissEmbedding incomplete_path(const std::vector<RecipeBatch>& batches,
                              const Adjacency& g_k, int d,
                              const NetworkParams& params);

void incomplete_backward(const MissEmbedding& miss, const Eigen::MatrixXd& dz_miss,
                         const NetworkParams& params, Gradients& grads);

inline Eigen::MatrixXd combine(const Eigen::MatrixXd& z_full,
                               const Eigen::MatrixXd& z_miss,
                               const NetworkParams& params) {
  return params.theta_full * z_full + params.theta_miss * z_miss;
}

/// Decoder state: embeddings with masked rows zeroed plus the selection list.
struct DecoderState {
  Eigen::MatrixXd z;          // h x d, masked columns zeroed
  Eigen::MatrixXd cand_proj;  // h x d, dec_cand * original z (masked cols zeroed)
  std::vector<int> selected;
  std::vector<std::uint8_t> is_selected;

  static DecoderState from_embeddings(const Eigen::MatrixXd& z_gamma,
                                      const NetworkParams& params);
  int dim() const { return static_cast<int>(z.cols()); }
  int remaining() const { return dim() - static_cast<int>(selected.size()); }
};

void mask_state(DecoderState& state, int chosen);

enum class DecodeMode { kSample, kGreedy };

struct DecodeStep {
  std::vector<int> avail;
  Eigen::VectorXd ctx;     // mean of unmasked embeddings
  Eigen::MatrixXd u;       // h x |avail| decoder hidden activations
  Eigen::VectorXd logits;  // per avail candidate
  Eigen::VectorXd probs;
  int chosen = -1;  // index into avail after the call
  double logprob = 0;
};

/// Scores all unselected candidates and picks one. `forced` >= 0 selects that
/// variable regardless of mode (used when scoring a fixed permutation).
DecodeStep decode_step(const DecoderState& state, const NetworkParams& params,
                       DecodeMode mode, std::mt19937_64& rng, int forced = -1);

struct DecodeTape {
  Eigen::MatrixXd z;  // h x d original z_gamma
  std::vector<DecodeStep> steps;
  Ordering ordering;
};

DecodeTape generate_ordering(const Eigen::MatrixXd& z_gamma, const NetworkParams& params,
                             DecodeMode mode, std::mt19937_64& rng);

/// Same pipeline with the selection forced to a given permutation; yields the
/// permutation's step log-probabilities under the current parameters.
DecodeTape score_ordering(const Eigen::MatrixXd& z_gamma, const NetworkParams& params,
                          const std::vector<int>& perm);

/// step_coeffs[t] = dLoss/d(step t logprob). Parameter gradients accumulate
/// into `grads`; dLoss/dz accumulates into dz. entropy_coeff adds the
/// gradient of -entropy_coeff * sum_t H(step t distribution).
void decode_backward(const DecodeTape& tape, const NetworkParams& params,
                     const std::vector<double>& step_coeffs, Gradients& grads,
                     Eigen::MatrixXd& dz, double entropy_coeff = 0.0);

struct CriticTape {
  Eigen::VectorXd m;    // mean embedding
  Eigen::VectorXd act;  // tanh hidden
  double value = 0;
};
CriticTape critic_value(const Eigen::MatrixXd& z_gamma, const NetworkParams& params);
void critic_backward(const CriticTape& tape, const Eigen::MatrixXd& z_gamma,
                     double dvalue, const NetworkParams& params, Gradients& grads,
                     Eigen::MatrixXd& dz);

}  // namespace coke
