#include "odenet/dyncore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "odenet/errors.hpp"

namespace odenet {

namespace {

void require_same_size(const State& a, const State& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": size " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: storage size does not match shape");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

State add(const State& a, const State& b) {
  require_same_size(a, b, "add");
  State out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

State sub(const State& a, const State& b) {
  require_same_size(a, b, "sub");
  State out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

State scaled(double s, const State& a) {
  State out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

State axpy(double s, const State& x, const State& y) {
  require_same_size(x, y, "axpy");
  State out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + s * x[i];
  return out;
}

double dot(const State& a, const State& b) {
  require_same_size(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const State& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const State& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

State matvec(const Matrix& a, const State& x) {
  if (a.cols() != x.size()) {
    throw DimensionError("matvec: matrix has " + std::to_string(a.cols()) + " columns, vector " +
                         std::to_string(x.size()));
  }
  State out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix scaled(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return std::sqrt(acc);
}

double spectral_radius_estimate(const Matrix& a, int iterations) {
  if (a.rows() != a.cols()) throw DimensionError("spectral_radius_estimate: non-square matrix");
  const std::size_t n = a.rows();
  if (n == 0) return 0.0;
  // Deterministic, generic start vector.
  State x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.1 * static_cast<double>(i % 7) + 1e-3 * i;
  double nx = norm2(x);
  for (double& v : x) v /= nx;
  // Average only over the second half; the first half is burn-in.
  const int burn_in = iterations / 2;
  double log_growth = 0.0;
  for (int it = 0; it < iterations; ++it) {
    State y = matvec(a, x);
    const double ny = norm2(y);
    if (ny == 0.0) return 0.0;
    if (it >= burn_in) log_growth += std::log(ny);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ny;
  }
  return std::exp(log_growth / (iterations - burn_in));
}

State solve(Matrix a, State b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw DimensionError("solve: shape mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (a(pivot, col) == 0.0) throw ContractError("solve: singular matrix");
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a(r, col) / a(col, col);
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a(r, j) -= factor * a(col, j);
      b[r] -= factor * b[col];
    }
  }
  State x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t j = i + 1; j < n; ++j) acc -= a(i, j) * x[j];
    x[i] = acc / a(i, i);
  }
  return x;
}

State VectorField::operator()(const State& u, double t) const {
  if (u.size() != dim) {
    throw DimensionError("VectorField: expected dimension " + std::to_string(dim) + ", got " +
                         std::to_string(u.size()));
  }
  return evaluate(u, t);
}

VectorField linear_field(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("linear_field: matrix is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  }
  if (!all_finite(a.values())) throw ContractError("linear_field: non-finite entries");
  VectorField f;
  f.dim = a.rows();
  f.evaluate = [a](const State& u, double) { return matvec(a, u); };
  f.jacobian = [a](const State&, double) { return a; };
  return f;
}

Matrix finite_difference_jacobian(const VectorField& f, const State& u, double t) {
  const std::size_t n = u.size();
  Matrix jac(f.dim, n);
  State probe = u;
  for (std::size_t j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(u[j]));
    probe[j] = u[j] + h;
    const State plus = f(probe, t);
    probe[j] = u[j] - h;
    const State minus = f(probe, t);
    probe[j] = u[j];
    for (std::size_t i = 0; i < f.dim; ++i) jac(i, j) = (plus[i] - minus[i]) / (2.0 * h);
  }
  return jac;
}

double jacobian_check(const VectorField& f, const State& u, double t) {
  if (!f.has_jacobian()) throw ContractError("jacobian_check: field has no jacobian");
  const Matrix analytic = f.jacobian(u, t);
  const Matrix numeric = finite_difference_jacobian(f, u, t);
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

void Trajectory::push(double t, State u) {
  if (!times.empty()) {
    if (!(t > times.back())) throw ContractError("Trajectory: times must be strictly increasing");
    if (u.size() != states.front().size()) throw DimensionError("Trajectory: dimension changed");
  }
  times.push_back(t);
  states.push_back(std::move(u));
}

ProblemKind parse_problem_kind(std::string_view name) {
  if (name == "exp_decay") return ProblemKind::exp_decay;
  if (name == "harmonic") return ProblemKind::harmonic;
  if (name == "quadratic_gradflow") return ProblemKind::quadratic_gradflow;
  throw ConfigError("unknown test problem '" + std::string(name) +
                    "' (valid: exp_decay, harmonic, quadratic_gradflow)");
}

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::exp_decay: return "exp_decay";
    case ProblemKind::harmonic: return "harmonic";
    case ProblemKind::quadratic_gradflow: return "quadratic_gradflow";
  }
  return "unknown";
}

TestProblem make_test_problem(ProblemKind kind, std::optional<State> u0) {
  TestProblem p;
  p.name = std::string(to_string(kind));
  switch (kind) {
    case ProblemKind::exp_decay: {
      p.u0 = u0.value_or(State{1.0});
      p.field = linear_field(scaled(-1.0, Matrix::identity(p.u0.size())));
      p.exact = [init = p.u0](double t) { return scaled(std::exp(-t), init); };
      break;
    }
    case ProblemKind::harmonic: {
      p.u0 = u0.value_or(State{1.0, 0.0});
      if (p.u0.size() != 2) throw DimensionError("harmonic: u0 must have dimension 2");
      p.field = linear_field(Matrix::from_rows({{0.0, 1.0}, {-1.0, 0.0}}));
      p.exact = [init = p.u0](double t) {
        const double c = std::cos(t), s = std::sin(t);
        return State{c * init[0] + s * init[1], -s * init[0] + c * init[1]};
      };
      break;
    }
    case ProblemKind::quadratic_gradflow: {
      // Q = R diag(1, 4) R^T, R a rotation by pi/6; g(u) = u^T Q u / 2.
      p.u0 = u0.value_or(State{1.0, 1.0});
      if (p.u0.size() != 2) throw DimensionError("quadratic_gradflow: u0 must have dimension 2");
      const double angle = std::numbers::pi / 6.0;
      const Matrix rot = Matrix::from_rows(
          {{std::cos(angle), -std::sin(angle)}, {std::sin(angle), std::cos(angle)}});
      const State eig{1.0, 4.0};
      Matrix q(2, 2);
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
          q(i, j) = rot(i, 0) * eig[0] * rot(j, 0) + rot(i, 1) * eig[1] * rot(j, 1);
      p.field = linear_field(scaled(-1.0, q));
      p.exact = [init = p.u0, rot, eig](double t) {
        const State coords = matvec(transpose(rot), init);
        const State decayed{coords[0] * std::exp(-eig[0] * t), coords[1] * std::exp(-eig[1] * t)};
        return matvec(rot, decayed);
      };
      break;
    }
  }
  return p;
}

TestProblem make_test_problem(std::string_view name, std::optional<State> u0) {
  return make_test_problem(parse_problem_kind(name), std::move(u0));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::stream(std::string_view name) const {
  return Rng(splitmix64(seed_ ^ splitmix64(fnv1a(name))));
}

Rng Rng::substream(std::uint64_t index) const {
  return Rng(splitmix64(splitmix64(seed_) + splitmix64(index ^ 0x5851f42d4c957f2dULL)));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() { return normal_(engine_); }

double Rng::normal(double mean, double stddev) { return mean + stddev * normal(); }

bool Rng::bernoulli(double p) { return uniform() < p; }

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index: empty range");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

}  // namespace odenet
