#pragma once

// Residual networks as time steppers over a width-d feature state.
//
//   resnet      u+ = u + f(u)                                  forward Euler
//   lm_resnet   u+ = (1 - k_n) u + k_n u_prev + f(u)            two-step LM update
//   polynet(m)  u+ = u + f(u) + f(f(u)) + ... (m terms)         truncated (I - f)^{-1}
//   fractal2    u+ = k1 u + k2 (k3 u + f1(u)) + f2(k3 u + f1(u)) RK2-like
//   revnet      X+ = X + f(Y), Y+ = Y + g(X+)                    coupled forward Euler
//
// Every branch is the two-layer pre-activation map W2 relu(W1 relu(u) + b1) + b2.
// Batches are row-major: one sample per row.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "odenet/autodiff.hpp"
#include "odenet/dyncore.hpp"

namespace odenet::arch {

enum class ArchKind { resnet, lm_resnet, polynet, fractal2, revnet };
enum class PolicyKind { none, stochastic_depth, shake_shake };
enum class Mode { train, eval };

ArchKind parse_arch_kind(std::string_view name);
std::string_view to_string(ArchKind kind);
PolicyKind parse_policy_kind(std::string_view name);
std::string_view to_string(PolicyKind kind);

/// Stochastic training regime. It shapes the network (shake-shake has two
/// branches per block) and fixes how eval mode takes expectations.
struct StochasticPolicy {
  PolicyKind kind = PolicyKind::none;
  double p_l = 1.0;  // terminal survival parameter of the linear drop schedule
};

/// Drop probability of block l (1-based) out of L: (l / L) (1 - p_L).
std::vector<double> drop_probabilities(std::size_t depth, double p_l);

struct NetworkSpec {
  ArchKind kind = ArchKind::resnet;
  std::size_t depth = 3;
  std::size_t width = 8;
  std::size_t input_dim = 2;
  std::size_t classes = 2;
  std::size_t poly_order = 2;  // polynet only
  double k_init_lo = -0.1;     // lm_resnet only
  double k_init_hi = 0.0;
  StochasticPolicy policy;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  /// Residual branches per block.
  std::size_t branches() const;
  /// Width each branch operates on (d, or d/2 for revnet).
  std::size_t branch_width() const;
};

/// Plain-value parameters of one residual branch.
struct BlockParams {
  Matrix w1, b1, w2, b2;
};

std::string block_prefix(std::size_t block);  // "block03"
std::string branch_prefix(std::size_t block, std::size_t branch);  // "block03.f1"
std::string k_name(std::size_t block);  // "block03.k"

BlockParams block_params(const ad::ParamStore& params, const std::string& branch);

/// W2 relu(W1 relu(u) + b1) + b2 on the tape, parameters under `branch`.
ad::Var residual_branch(ad::Tape& tape, ad::ParamStore& params, const std::string& branch, ad::Var u);
/// Same map on plain values (one sample per row).
Matrix residual_branch(const BlockParams& params, const Matrix& u);

/// Per-block overrides used by probes.
struct ForwardOverrides {
  std::vector<bool> drop_block;  // zero block l's branch contribution
  bool drop_lift = false;        // replace the lifted input with zeros
};

struct ForwardCache {
  std::vector<Matrix> states;  // lifted input followed by the state after each block
  Matrix lm_prev;              // u_{-1} used by the first LM block
  std::vector<double> etas;    // stochastic draws per block (train mode)
};

struct ForwardResult {
  ad::Var logits;
  ForwardCache cache;
};

/// Lift -> L blocks -> linear classifier. In train mode with a stochastic
/// policy, `policy_rng` supplies one draw per block per call. Passing a
/// policy_rng in eval mode is a contract error: eval uses expectations
/// (survival-probability scaling, or eta = 1/2 for shake-shake).
ForwardResult network_forward(ad::Tape& tape, const NetworkSpec& spec, ad::ParamStore& params, const Matrix& x,
                              Mode mode, Rng* policy_rng = nullptr, const ForwardOverrides* overrides = nullptr);

/// Eval-mode logits on plain values.
Matrix predict_logits(const NetworkSpec& spec, ad::ParamStore& params, const Matrix& x,
                      const ForwardOverrides* overrides = nullptr);

/// One RevNet block: X+ = X + f(Y), Y+ = Y + g(X+).
struct RevState {
  Matrix x, y;
};
RevState revnet_block_forward(const BlockParams& f, const BlockParams& g, const RevState& s);
/// Y = Y+ - g(X+), X = X+ - f(Y).
RevState revnet_inverse(const BlockParams& f, const BlockParams& g, const RevState& next);
/// Runs every RevNet block forward on a width-d state, or all of them backwards.
Matrix revnet_trunk_forward(const NetworkSpec& spec, const ad::ParamStore& params, const Matrix& state);
Matrix revnet_trunk_inverse(const NetworkSpec& spec, const ad::ParamStore& params, const Matrix& state);

/// k_n ~ U[k_init_lo, k_init_hi] (lm_resnet), weights ~ N(0, 2 / fan_in),
/// biases zero, fractal gains 1/2.
ad::ParamStore init_params(const NetworkSpec& spec, Rng& rng);

/// Learned k_n values in block order (empty unless lm_resnet).
std::vector<double> lm_coefficients(const NetworkSpec& spec, const ad::ParamStore& params);

// ---- checkpoints ---------------------------------------------------------------
//
// Binary little-endian layout (see docs/checkpoint_format.md):
//   "ODNCKPT1" | u32 version=1 | u32 count | count x entry
//   entry: u32 name_len | name bytes | u8 decay | u64 rows | u64 cols | rows*cols IEEE-754 f64

void save_checkpoint(const ad::ParamStore& params, const std::string& path);
ad::ParamStore load_checkpoint(const std::string& path);

}  // namespace odenet::arch
