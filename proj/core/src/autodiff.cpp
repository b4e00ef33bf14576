#include "odenet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odenet/errors.hpp"

namespace odenet::ad {

// ---- ParamStore -------------------------------------------------------------

void ParamStore::add(const std::string& name, Matrix value, bool decay) {
  if (entries_.count(name) != 0) throw ContractError("ParamStore: duplicate parameter '" + name + "'");
  Entry e;
  e.grad = Matrix(value.rows(), value.cols());
  e.velocity = Matrix(value.rows(), value.cols());
  e.value = std::move(value);
  e.decay = decay;
  entries_.emplace(name, std::move(e));
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

Matrix& ParamStore::value(const std::string& name) { return entry(name).value; }
const Matrix& ParamStore::value(const std::string& name) const { return entry(name).value; }
Matrix& ParamStore::grad(const std::string& name) { return entry(name).grad; }
const Matrix& ParamStore::grad(const std::string& name) const { return entry(name).grad; }
Matrix& ParamStore::velocity(const std::string& name) { return entry(name).velocity; }
const Matrix& ParamStore::velocity(const std::string& name) const { return entry(name).velocity; }
bool ParamStore::decays(const std::string& name) const { return entry(name).decay; }

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) std::fill(e.grad.values().begin(), e.grad.values().end(), 0.0);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto it = other.entries_.begin();
  for (const auto& [name, e] : entries_) {
    if (name != it->first || e.decay != it->second.decay || !(e.value == it->second.value)) return false;
    ++it;
  }
  return true;
}

// ---- Tape -------------------------------------------------------------------

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::adjoint() const { return tape->adjoint(id); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("Var::scalar: node is not 1x1");
  return v[0];
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(ParamStore& store, const std::string& name) {
  const auto key = std::make_pair(static_cast<const ParamStore*>(&store), name);
  if (const auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.value = store.value(name);
  n.store = &store;
  n.param = name;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(key, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Matrix& Tape::adjoint(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.adjoint.size() != n.value.size()) throw ContractError("Tape: adjoints not populated; call backward()");
  return n.adjoint;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw ContractError("Tape::backward: root belongs to another tape");
  if (backward_done_) throw ContractError("Tape::backward: called twice without reset_adjoints()");
  if (nodes_.at(root.id).value.size() != 1) throw ContractError("Tape::backward: root is not scalar");
  for (Node& n : nodes_) n.adjoint = Matrix(n.value.rows(), n.value.cols());
  nodes_[root.id].adjoint[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (n.store == nullptr) continue;
    Matrix& g = n.store->grad(n.param);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.adjoint[k];
  }
  backward_done_ = true;
}

void Tape::reset_adjoints() {
  for (Node& n : nodes_) n.adjoint = Matrix();
  backward_done_ = false;
}

// ---- ops ----------------------------------------------------------------------

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("autodiff: operands on different tapes");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace

Var add(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same_shape(av, bv, "add");
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return a.tape->record(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    Matrix& ga = t.adjoint_mut(a.id);
    Matrix& gb = t.adjoint_mut(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same_shape(av, bv, "sub");
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return a.tape->record(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    Matrix& ga = t.adjoint_mut(a.id);
    Matrix& gb = t.adjoint_mut(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

Var scale(double c, Var a) {
  Matrix out = a.value();
  for (double& v : out.values()) v *= c;
  return a.tape->record(std::move(out), [a, c](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    Matrix& ga = t.adjoint_mut(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

Var elementwise_mul(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same_shape(av, bv, "elementwise_mul");
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.tape->record(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    const Matrix& av = t.value(a.id);
    const Matrix& bv = t.value(b.id);
    Matrix& ga = t.adjoint_mut(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    Matrix& gb = t.adjoint_mut(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Var scalar_mul(Var s, Var a) {
  require_same_tape(s, a);
  if (s.value().size() != 1) throw DimensionError("scalar_mul: scale is not 1x1");
  const double sv = s.value()[0];
  Matrix out = a.value();
  for (double& v : out.values()) v = sv * v;
  return a.tape->record(std::move(out), [s, a](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    const Matrix& av = t.value(a.id);
    const double sv = t.value(s.id)[0];
    double acc = 0.0;
    Matrix& ga = t.adjoint_mut(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += sv * g[i];
      acc += g[i] * av[i];
    }
    t.adjoint_mut(s.id)[0] += acc;
  });
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  Matrix out = odenet::matmul(a.value(), b.value());
  return a.tape->record(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    const Matrix& av = t.value(a.id);
    const Matrix& bv = t.value(b.id);
    Matrix& ga = t.adjoint_mut(a.id);
    Matrix& gb = t.adjoint_mut(b.id);
    // dA = G B^T, dB = A^T G
    for (std::size_t i = 0; i < av.rows(); ++i) {
      for (std::size_t k = 0; k < av.cols(); ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < bv.cols(); ++j) acc += g(i, j) * bv(k, j);
        ga(i, k) += acc;
        const double aik = av(i, k);
        for (std::size_t j = 0; j < bv.cols(); ++j) gb(k, j) += aik * g(i, j);
      }
    }
  });
}

Var matvec(Var a, Var x) {
  if (x.value().cols() != 1) throw DimensionError("matvec: x must be a column vector");
  if (a.value().cols() != x.value().rows()) throw DimensionError("matvec: inner dimensions differ");
  return matmul(a, x);
}

Var relu(Var a) {
  Matrix out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return a.tape->record(std::move(out), [a](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    const Matrix& av = t.value(a.id);
    Matrix& ga = t.adjoint_mut(a.id);
    // derivative at 0 is 0
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0) ga[i] += g[i];
  });
}

Var tanh(Var a) {
  Matrix out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  return a.tape->record(std::move(out), [a](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.adjoint_mut(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var affine(Var x, Var w, Var b) {
  require_same_tape(x, w);
  require_same_tape(x, b);
  const Matrix& xv = x.value();
  const Matrix& wv = w.value();
  const Matrix& bv = b.value();
  if (xv.cols() != wv.cols()) {
    throw DimensionError("affine: input width " + std::to_string(xv.cols()) + " vs weight columns " +
                         std::to_string(wv.cols()));
  }
  if (bv.rows() != 1 || bv.cols() != wv.rows()) throw DimensionError("affine: bias must be 1 x out");
  const std::size_t batch = xv.rows(), in = xv.cols(), outw = wv.rows();
  Matrix out(batch, outw);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t o = 0; o < outw; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xv(r, i) * wv(o, i);
      out(r, o) = acc + bv[o];
    }
  }
  return x.tape->record(std::move(out), [x, w, b](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    const Matrix& xv = t.value(x.id);
    const Matrix& wv = t.value(w.id);
    Matrix& gx = t.adjoint_mut(x.id);
    Matrix& gw = t.adjoint_mut(w.id);
    Matrix& gb = t.adjoint_mut(b.id);
    const std::size_t batch = xv.rows(), in = xv.cols(), outw = wv.rows();
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t o = 0; o < outw; ++o) {
        const double gro = g(r, o);
        gb[o] += gro;
        if (gro == 0.0) continue;
        for (std::size_t i = 0; i < in; ++i) {
          gx(r, i) += gro * wv(o, i);
          gw(o, i) += gro * xv(r, i);
        }
      }
    }
  });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return a.tape->record(Matrix(1, 1, acc), [a](Tape& t, std::size_t self) {
    const double g = t.adjoint(self)[0];
    for (double& v : t.adjoint_mut(a.id).values()) v += g;
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  if (labels.size() != z.rows()) throw DimensionError("softmax_cross_entropy: label count != batch rows");
  const std::size_t batch = z.rows(), classes = z.cols();
  Matrix probs(batch, classes);
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw DimensionError("softmax_cross_entropy: label out of range");
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) zmax = std::max(zmax, z(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs(r, c) = std::exp(z(r, c) - zmax);
      denom += probs(r, c);
    }
    for (std::size_t c = 0; c < classes; ++c) probs(r, c) /= denom;
    loss += std::log(denom) + zmax - z(r, static_cast<std::size_t>(label));
  }
  loss /= static_cast<double>(batch);
  std::vector<int> owned(labels.begin(), labels.end());
  return logits.tape->record(Matrix(1, 1, loss),
                             [logits, probs = std::move(probs), owned = std::move(owned)](Tape& t, std::size_t self) {
                               const double g = t.adjoint(self)[0] / static_cast<double>(probs.rows());
                               Matrix& gz = t.adjoint_mut(logits.id);
                               for (std::size_t r = 0; r < probs.rows(); ++r) {
                                 for (std::size_t c = 0; c < probs.cols(); ++c) {
                                   const double onehot = static_cast<int>(c) == owned[r] ? 1.0 : 0.0;
                                   gz(r, c) += g * (probs(r, c) - onehot);
                                 }
                               }
                             });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.cols()) throw DimensionError("slice_cols: range exceeds columns");
  Matrix out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, begin + c);
  return a.tape->record(std::move(out), [a, begin, count](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    Matrix& ga = t.adjoint_mut(a.id);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) ga(r, begin + c) += g(r, c);
  });
}

Var concat_cols(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) throw DimensionError("concat_cols: row counts differ");
  Matrix out(av.rows(), av.cols() + bv.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c);
    for (std::size_t c = 0; c < bv.cols(); ++c) out(r, av.cols() + c) = bv(r, c);
  }
  return a.tape->record(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    Matrix& ga = t.adjoint_mut(a.id);
    Matrix& gb = t.adjoint_mut(b.id);
    const std::size_t ac = ga.cols();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < ac; ++c) ga(r, c) += g(r, c);
      for (std::size_t c = 0; c < gb.cols(); ++c) gb(r, c) += g(r, ac + c);
    }
  });
}

// ---- gradcheck ------------------------------------------------------------------

GradcheckResult gradcheck_report(const LossBuilder& f, ParamStore& params, double eps) {
  if (!(eps > 0.0)) throw ContractError("gradcheck: eps must be positive");
  params.zero_grad();
  {
    Tape tape;
    Var root = f(tape, params);
    tape.backward(root);
  }
  auto evaluate = [&]() {
    Tape tape;
    return f(tape, params).scalar();
  };
  GradcheckResult result;
  for (const std::string& name : params.names()) {
    Matrix& value = params.value(name);
    const Matrix analytic = params.grad(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double plus = evaluate();
      value[i] = saved - eps;
      const double minus = evaluate();
      value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        if (err >= result.max_relative_error) {
          result.max_relative_error = err;
          result.worst_parameter = name;
        }
      }
    }
  }
  return result;
}

double gradcheck(const LossBuilder& f, ParamStore& params, double eps) {
  return gradcheck_report(f, params, eps).max_relative_error;
}

}  // namespace odenet::ad
