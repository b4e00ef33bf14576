#include "odenet/archblocks.hpp"

#include <cmath>
#include <cstdio>

#include "odenet/errors.hpp"

namespace odenet::arch {

using ad::ParamStore;
using ad::Tape;
using ad::Var;

ArchKind parse_arch_kind(std::string_view name) {
  if (name == "resnet") return ArchKind::resnet;
  if (name == "lm_resnet") return ArchKind::lm_resnet;
  if (name == "polynet") return ArchKind::polynet;
  if (name == "fractal2") return ArchKind::fractal2;
  if (name == "revnet") return ArchKind::revnet;
  throw ConfigError("unknown architecture '" + std::string(name) +
                    "' (valid: resnet, lm_resnet, polynet, fractal2, revnet)");
}

std::string_view to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::resnet: return "resnet";
    case ArchKind::lm_resnet: return "lm_resnet";
    case ArchKind::polynet: return "polynet";
    case ArchKind::fractal2: return "fractal2";
    case ArchKind::revnet: return "revnet";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "none") return PolicyKind::none;
  if (name == "stochastic_depth") return PolicyKind::stochastic_depth;
  if (name == "shake_shake") return PolicyKind::shake_shake;
  throw ConfigError("unknown policy '" + std::string(name) + "' (valid: none, stochastic_depth, shake_shake)");
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::none: return "none";
    case PolicyKind::stochastic_depth: return "stochastic_depth";
    case PolicyKind::shake_shake: return "shake_shake";
  }
  return "unknown";
}

std::vector<double> drop_probabilities(std::size_t depth, double p_l) {
  if (!(p_l > 0.0 && p_l <= 1.0)) throw ConfigError("drop schedule: p_L must lie in (0, 1]");
  std::vector<double> out(depth);
  for (std::size_t l = 1; l <= depth; ++l) {
    out[l - 1] = static_cast<double>(l) / static_cast<double>(depth) * (1.0 - p_l);
  }
  return out;
}

void NetworkSpec::validate() const {
  if (width == 0) throw ConfigError("network: width must be >= 1");
  if (input_dim == 0) throw ConfigError("network: input_dim must be >= 1");
  if (classes < 2) throw ConfigError("network: classes must be >= 2");
  if (kind == ArchKind::revnet && width % 2 != 0) throw ConfigError("network: revnet requires an even width");
  if (kind == ArchKind::polynet && poly_order == 0) throw ConfigError("network: polynet order must be >= 1");
  if (kind == ArchKind::lm_resnet && !(k_init_lo <= k_init_hi)) throw ConfigError("network: k_init range is empty");
  if (policy.kind != PolicyKind::none && kind != ArchKind::resnet && kind != ArchKind::lm_resnet) {
    throw ConfigError("network: stochastic policies apply to resnet and lm_resnet only");
  }
  if (policy.kind == PolicyKind::stochastic_depth && !(policy.p_l > 0.0 && policy.p_l <= 1.0)) {
    throw ConfigError("network: p_L must lie in (0, 1]");
  }
}

std::size_t NetworkSpec::branches() const {
  if (kind == ArchKind::fractal2 || kind == ArchKind::revnet) return 2;
  return policy.kind == PolicyKind::shake_shake ? 2 : 1;
}

std::size_t NetworkSpec::branch_width() const { return kind == ArchKind::revnet ? width / 2 : width; }

std::string block_prefix(std::size_t block) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "block%02zu", block);
  return buf;
}

std::string branch_prefix(std::size_t block, std::size_t branch) {
  return block_prefix(block) + ".f" + std::to_string(branch);
}

std::string k_name(std::size_t block) { return block_prefix(block) + ".k"; }

BlockParams block_params(const ParamStore& params, const std::string& branch) {
  return {params.value(branch + ".W1"), params.value(branch + ".b1"), params.value(branch + ".W2"),
          params.value(branch + ".b2")};
}

Var residual_branch(Tape& tape, ParamStore& params, const std::string& branch, Var u) {
  Var w1 = tape.parameter(params, branch + ".W1");
  Var b1 = tape.parameter(params, branch + ".b1");
  Var w2 = tape.parameter(params, branch + ".W2");
  Var b2 = tape.parameter(params, branch + ".b2");
  Var h = ad::affine(ad::relu(u), w1, b1);
  return ad::affine(ad::relu(h), w2, b2);
}

namespace {

// Same arithmetic order as ad::affine so tape and plain results agree bitwise.
Matrix affine_value(const Matrix& x, const Matrix& w, const Matrix& b) {
  if (x.cols() != w.cols() || b.cols() != w.rows()) throw DimensionError("residual_branch: shape mismatch");
  Matrix out(x.rows(), w.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.cols(); ++i) acc += x(r, i) * w(o, i);
      out(r, o) = acc + b[o];
    }
  }
  return out;
}

Matrix relu_value(Matrix m) {
  for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
  return m;
}

Matrix slice_value(const Matrix& m, std::size_t begin, std::size_t count) {
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, begin + c);
  return out;
}

Matrix concat_value(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (std::size_t c = 0; c < b.cols(); ++c) out(r, a.cols() + c) = b(r, c);
  }
  return out;
}

}  // namespace

Matrix residual_branch(const BlockParams& params, const Matrix& u) {
  const Matrix h = affine_value(relu_value(u), params.w1, params.b1);
  return affine_value(relu_value(h), params.w2, params.b2);
}

namespace {

/// Combined branch output of one block under the active policy, or an empty
/// optional-like flag when the block is dropped.
struct BranchSum {
  Var value;
  bool present = false;
};

BranchSum policy_branch(Tape& tape, const NetworkSpec& spec, ParamStore& params, std::size_t l, Var u, Mode mode,
                        Rng* rng, const std::vector<double>& drops, std::vector<double>& etas) {
  switch (spec.policy.kind) {
    case PolicyKind::none: return {residual_branch(tape, params, branch_prefix(l, 1), u), true};
    case PolicyKind::stochastic_depth: {
      const double survival = 1.0 - drops[l - 1];
      if (mode == Mode::eval) return {ad::scale(survival, residual_branch(tape, params, branch_prefix(l, 1), u)), true};
      const double eta = rng->bernoulli(survival) ? 1.0 : 0.0;
      etas.push_back(eta);
      if (eta == 0.0) return {};
      return {ad::scale(eta, residual_branch(tape, params, branch_prefix(l, 1), u)), true};
    }
    case PolicyKind::shake_shake: {
      double eta = 0.5;
      if (mode == Mode::train) {
        eta = rng->uniform();
        etas.push_back(eta);
      }
      Var f1 = residual_branch(tape, params, branch_prefix(l, 1), u);
      Var f2 = residual_branch(tape, params, branch_prefix(l, 2), u);
      return {ad::add(ad::scale(eta, f1), ad::scale(1.0 - eta, f2)), true};
    }
  }
  return {};
}

}  // namespace

ForwardResult network_forward(Tape& tape, const NetworkSpec& spec, ParamStore& params, const Matrix& x, Mode mode,
                              Rng* policy_rng, const ForwardOverrides* overrides) {
  spec.validate();
  if (x.cols() != spec.input_dim) {
    throw DimensionError("network_forward: input has " + std::to_string(x.cols()) + " features, expected " +
                         std::to_string(spec.input_dim));
  }
  if (mode == Mode::eval && policy_rng != nullptr) {
    throw ContractError("network_forward: stochastic policy draws supplied in eval mode");
  }
  if (mode == Mode::train && spec.policy.kind != PolicyKind::none && policy_rng == nullptr) {
    throw ContractError("network_forward: train mode with a stochastic policy needs an rng");
  }
  if (overrides != nullptr && !overrides->drop_block.empty() && overrides->drop_block.size() != spec.depth) {
    throw ContractError("network_forward: drop_block must have one entry per block");
  }
  auto dropped = [&](std::size_t l) {
    return overrides != nullptr && !overrides->drop_block.empty() && overrides->drop_block[l - 1];
  };

  ForwardResult result;
  ForwardCache& cache = result.cache;
  const std::size_t batch = x.rows();
  Var input = tape.constant(x);
  Var u = (overrides != nullptr && overrides->drop_lift)
              ? tape.constant(Matrix(batch, spec.width))
              : ad::affine(input, tape.parameter(params, "lift.W"), tape.parameter(params, "lift.b"));
  cache.states.push_back(u.value());

  const std::vector<double> drops = spec.policy.kind == PolicyKind::stochastic_depth
                                        ? drop_probabilities(spec.depth, spec.policy.p_l)
                                        : std::vector<double>(spec.depth, 0.0);
  Var u_prev = u;  // LM history: u_{-1} := u_0
  if (spec.kind == ArchKind::lm_resnet) cache.lm_prev = u_prev.value();
  Var one = tape.constant(Matrix(1, 1, 1.0));

  for (std::size_t l = 1; l <= spec.depth; ++l) {
    Var next;
    switch (spec.kind) {
      case ArchKind::resnet: {
        const BranchSum f = dropped(l) ? BranchSum{} : policy_branch(tape, spec, params, l, u, mode, policy_rng, drops, cache.etas);
        next = f.present ? ad::add(u, f.value) : u;
        break;
      }
      case ArchKind::lm_resnet: {
        Var k = tape.parameter(params, k_name(l));
        Var mix = ad::add(ad::scalar_mul(ad::sub(one, k), u), ad::scalar_mul(k, u_prev));
        const BranchSum f = dropped(l) ? BranchSum{} : policy_branch(tape, spec, params, l, u, mode, policy_rng, drops, cache.etas);
        next = f.present ? ad::add(mix, f.value) : mix;
        u_prev = u;
        break;
      }
      case ArchKind::polynet: {
        if (dropped(l)) {
          next = u;
          break;
        }
        const std::string branch = branch_prefix(l, 1);
        Var term = residual_branch(tape, params, branch, u);
        next = ad::add(u, term);
        for (std::size_t j = 2; j <= spec.poly_order; ++j) {
          term = residual_branch(tape, params, branch, term);
          next = ad::add(next, term);
        }
        break;
      }
      case ArchKind::fractal2: {
        Var k1 = tape.parameter(params, block_prefix(l) + ".k1");
        Var k2 = tape.parameter(params, block_prefix(l) + ".k2");
        Var k3 = tape.parameter(params, block_prefix(l) + ".k3");
        if (dropped(l)) {
          // Both branches removed: k1 u + k2 k3 u.
          next = ad::add(ad::scalar_mul(k1, u), ad::scalar_mul(k2, ad::scalar_mul(k3, u)));
          break;
        }
        Var stage = ad::add(ad::scalar_mul(k3, u), residual_branch(tape, params, branch_prefix(l, 1), u));
        next = ad::add(ad::add(ad::scalar_mul(k1, u), ad::scalar_mul(k2, stage)),
                       residual_branch(tape, params, branch_prefix(l, 2), stage));
        break;
      }
      case ArchKind::revnet: {
        const std::size_t half = spec.width / 2;
        Var xs = ad::slice_cols(u, 0, half);
        Var ys = ad::slice_cols(u, half, half);
        if (dropped(l)) {
          next = u;
          break;
        }
        Var x_next = ad::add(xs, residual_branch(tape, params, branch_prefix(l, 1), ys));
        Var y_next = ad::add(ys, residual_branch(tape, params, branch_prefix(l, 2), x_next));
        next = ad::concat_cols(x_next, y_next);
        break;
      }
    }
    u = next;
    cache.states.push_back(u.value());
  }

  result.logits = ad::affine(u, tape.parameter(params, "head.W"), tape.parameter(params, "head.b"));
  return result;
}

Matrix predict_logits(const NetworkSpec& spec, ParamStore& params, const Matrix& x, const ForwardOverrides* overrides) {
  Tape tape;
  return network_forward(tape, spec, params, x, Mode::eval, nullptr, overrides).logits.value();
}

RevState revnet_block_forward(const BlockParams& f, const BlockParams& g, const RevState& s) {
  RevState out;
  out.x = s.x;
  const Matrix fy = residual_branch(f, s.y);
  for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] += fy[i];
  out.y = s.y;
  const Matrix gx = residual_branch(g, out.x);
  for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] += gx[i];
  return out;
}

RevState revnet_inverse(const BlockParams& f, const BlockParams& g, const RevState& next) {
  RevState out;
  out.y = next.y;
  const Matrix gx = residual_branch(g, next.x);
  for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] -= gx[i];
  out.x = next.x;
  const Matrix fy = residual_branch(f, out.y);
  for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] -= fy[i];
  return out;
}

Matrix revnet_trunk_forward(const NetworkSpec& spec, const ParamStore& params, const Matrix& state) {
  if (spec.kind != ArchKind::revnet) throw ContractError("revnet_trunk_forward: spec is not a revnet");
  if (state.cols() != spec.width) throw DimensionError("revnet_trunk_forward: state width mismatch");
  const std::size_t half = spec.width / 2;
  RevState s{slice_value(state, 0, half), slice_value(state, half, half)};
  for (std::size_t l = 1; l <= spec.depth; ++l) {
    s = revnet_block_forward(block_params(params, branch_prefix(l, 1)), block_params(params, branch_prefix(l, 2)), s);
  }
  return concat_value(s.x, s.y);
}

Matrix revnet_trunk_inverse(const NetworkSpec& spec, const ParamStore& params, const Matrix& state) {
  if (spec.kind != ArchKind::revnet) throw ContractError("revnet_trunk_inverse: spec is not a revnet");
  if (state.cols() != spec.width) throw DimensionError("revnet_trunk_inverse: state width mismatch");
  const std::size_t half = spec.width / 2;
  RevState s{slice_value(state, 0, half), slice_value(state, half, half)};
  for (std::size_t l = spec.depth; l >= 1; --l) {
    s = revnet_inverse(block_params(params, branch_prefix(l, 1)), block_params(params, branch_prefix(l, 2)), s);
  }
  return concat_value(s.x, s.y);
}

namespace {

Matrix he_matrix(std::size_t rows, std::size_t fan_in, Rng& rng) {
  Matrix m(rows, fan_in);
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : m.values()) v = rng.normal(0.0, std);
  return m;
}

}  // namespace

ParamStore init_params(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  ParamStore p;
  p.add("lift.W", he_matrix(spec.width, spec.input_dim, rng));
  p.add("lift.b", Matrix(1, spec.width));
  const std::size_t bw = spec.branch_width();
  for (std::size_t l = 1; l <= spec.depth; ++l) {
    for (std::size_t b = 1; b <= spec.branches(); ++b) {
      const std::string prefix = branch_prefix(l, b);
      p.add(prefix + ".W1", he_matrix(bw, bw, rng));
      p.add(prefix + ".b1", Matrix(1, bw));
      p.add(prefix + ".W2", he_matrix(bw, bw, rng));
      p.add(prefix + ".b2", Matrix(1, bw));
    }
    if (spec.kind == ArchKind::lm_resnet) {
      p.add(k_name(l), Matrix(1, 1, rng.uniform(spec.k_init_lo, spec.k_init_hi)), /*decay=*/false);
    }
    if (spec.kind == ArchKind::fractal2) {
      for (const char* g : {".k1", ".k2", ".k3"}) p.add(block_prefix(l) + g, Matrix(1, 1, 0.5));
    }
  }
  p.add("head.W", he_matrix(spec.classes, spec.width, rng));
  p.add("head.b", Matrix(1, spec.classes));
  return p;
}

std::vector<double> lm_coefficients(const NetworkSpec& spec, const ParamStore& params) {
  std::vector<double> out;
  if (spec.kind != ArchKind::lm_resnet) return out;
  for (std::size_t l = 1; l <= spec.depth; ++l) out.push_back(params.value(k_name(l))[0]);
  return out;
}

}  // namespace odenet::arch
