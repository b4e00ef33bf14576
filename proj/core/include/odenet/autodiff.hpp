#pragma once

// Reverse-mode differentiation over an eagerly evaluated tape of dense
// matrix operations. Values are computed when an op is recorded; backward()
// walks the tape in reverse and accumulates adjoints.

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "odenet/dyncore.hpp"

namespace odenet::ad {

/// Named trainable tensors with their gradients and momentum buffers.
class ParamStore {
 public:
  /// Registers a parameter. `decay` = false exempts it from weight decay.
  void add(const std::string& name, Matrix value, bool decay = true);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::vector<std::string> names() const;

  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;
  Matrix& grad(const std::string& name);
  const Matrix& grad(const std::string& name) const;
  Matrix& velocity(const std::string& name);
  const Matrix& velocity(const std::string& name) const;
  bool decays(const std::string& name) const;

  void zero_grad();
  /// Total number of scalar entries across all parameters.
  std::size_t scalar_count() const;

  /// Compares names, decay flags and parameter values bitwise.
  bool same_values(const ParamStore& other) const;

 private:
  struct Entry {
    Matrix value;
    Matrix grad;
    Matrix velocity;
    bool decay = true;
  };
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);

  std::map<std::string, Entry> entries_;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& adjoint() const;
  double scalar() const;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A leaf that receives no gradient bookkeeping beyond its adjoint.
  Var constant(Matrix value);
  Var variable(Matrix value) { return constant(std::move(value)); }
  /// A leaf bound to a named parameter; backward() adds its adjoint into the
  /// store's gradient. Repeated calls with the same name return the same node.
  Var parameter(ParamStore& store, const std::string& name);

  /// Records a computed node. `backward` reads adjoint(self) and accumulates
  /// into its parents' adjoints.
  Var record(Matrix value, Backward backward);

  /// Requires a 1x1 root. Populates adjoints and accumulates parameter
  /// gradients into the bound stores. A second call needs reset_adjoints().
  void backward(Var root);
  void reset_adjoints();

  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
  const Matrix& adjoint(std::size_t id) const;
  Matrix& adjoint_mut(std::size_t id) { return nodes_[id].adjoint; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    Backward backward;
    ParamStore* store = nullptr;
    std::string param;
  };
  std::vector<Node> nodes_;
  std::map<std::pair<const ParamStore*, std::string>, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

// ---- recorded operations --------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(double c, Var a);
/// Elementwise product of equally shaped tensors.
Var elementwise_mul(Var a, Var b);
/// s (1x1) times every entry of a.
Var scalar_mul(Var s, Var a);
Var matmul(Var a, Var b);
/// A (m x n) times column x (n x 1).
Var matvec(Var a, Var x);
Var relu(Var a);
Var tanh(Var a);
/// Row-batched affine map: X (batch x in) W^T (in x out) + b (1 x out).
Var affine(Var x, Var w, Var b);
Var sum(Var a);
/// Mean softmax cross-entropy of row-wise logits against integer labels.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
/// Columns [begin, begin + count) of a.
Var slice_cols(Var a, std::size_t begin, std::size_t count);
/// Horizontal concatenation [a | b].
Var concat_cols(Var a, Var b);

// ---- verification ---------------------------------------------------------

/// Builds a scalar loss on a fresh tape from the given parameters.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
};

/// Compares reverse-mode gradients with central differences of step eps on
/// every scalar parameter entry. Error is |analytic - numeric| / max(1, |analytic|).
GradcheckResult gradcheck_report(const LossBuilder& f, ParamStore& params, double eps = 1e-6);
double gradcheck(const LossBuilder& f, ParamStore& params, double eps = 1e-6);

}  // namespace odenet::ad
