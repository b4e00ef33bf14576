#pragma once

// Dense linear algebra, vector fields, trajectories, canonical test problems
// and the seeded random-number contract shared by every other module.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace odenet {

/// The dynamical variable u (or X). Plain dense vector of doubles.
using State = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row(std::span<const double> values);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<const double> row_view(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row_view(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& storage() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---- vector helpers -------------------------------------------------------

State add(const State& a, const State& b);
State sub(const State& a, const State& b);
State scaled(double s, const State& a);
/// Returns y + s * x.
State axpy(double s, const State& x, const State& y);
double dot(const State& a, const State& b);
double norm2(const State& a);
double norm_inf(const State& a);
bool all_finite(std::span<const double> values);

// ---- matrix helpers -------------------------------------------------------

State matvec(const Matrix& a, const State& x);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix scaled(double s, const Matrix& a);
/// Frobenius norm; an upper bound on the operator 2-norm.
double frobenius_norm(const Matrix& a);
/// Spectral radius from the geometric mean growth over the second half of a power iteration.
double spectral_radius_estimate(const Matrix& a, int iterations = 100);
/// Solves a * x = b by Gaussian elimination with partial pivoting.
State solve(Matrix a, State b);

// ---- vector fields --------------------------------------------------------

/// The right-hand side f of u_t = f(u, t), with an optional analytic Jacobian.
struct VectorField {
  using Evaluate = std::function<State(const State&, double)>;
  using Jacobian = std::function<Matrix(const State&, double)>;

  std::size_t dim = 0;
  Evaluate evaluate;
  Jacobian jacobian;  // empty when unavailable

  State operator()(const State& u, double t) const;
  bool has_jacobian() const noexcept { return static_cast<bool>(jacobian); }
};

/// u -> A u with constant Jacobian A. Throws DimensionError for non-square A.
VectorField linear_field(const Matrix& a);

/// Central-difference Jacobian with step h = 1e-6 * max(1, |x_i|).
Matrix finite_difference_jacobian(const VectorField& f, const State& u, double t);

/// Max over entries of |J_analytic - J_fd| / max(1, |J_analytic|).
double jacobian_check(const VectorField& f, const State& u, double t);

// ---- trajectories ---------------------------------------------------------

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;

  std::size_t size() const noexcept { return times.size(); }
  const State& back() const { return states.back(); }
  void push(double t, State u);
};

// ---- test problems --------------------------------------------------------

enum class ProblemKind { exp_decay, harmonic, quadratic_gradflow };

ProblemKind parse_problem_kind(std::string_view name);
std::string_view to_string(ProblemKind kind);

struct TestProblem {
  std::string name;
  VectorField field;
  std::function<State(double)> exact;
  State u0;
  double horizon = 1.0;
};

/// Canonical problems with closed-form solutions. u0 defaults per problem.
TestProblem make_test_problem(ProblemKind kind, std::optional<State> u0 = std::nullopt);
TestProblem make_test_problem(std::string_view name, std::optional<State> u0 = std::nullopt);

// ---- random numbers -------------------------------------------------------

/// Seedable generator with named, order-independent sub-streams.
///
/// `stream("init")` and `stream("dropout")` derive their seeds from the parent
/// seed and the name only, so drawing from one never shifts the other.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  Rng stream(std::string_view name) const;
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev);
  bool bernoulli(double p);
  std::size_t index(std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace odenet
