#include <benchmark/benchmark.h>

#include "odenet/archblocks.hpp"
#include "odenet/odeschemes.hpp"
#include "odenet/sdeschemes.hpp"

using namespace odenet;

namespace {

void BM_ForwardEulerHarmonic(benchmark::State& state) {
  const auto p = make_test_problem("harmonic");
  const double dt = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) {
    auto traj = ode::integrate(ode::SchemeSpec::of(ode::SchemeKind::forward_euler), p.field, p.u0, 0.0, 1.0, dt);
    benchmark::DoNotOptimize(traj.back());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardEulerHarmonic)->Arg(512)->Arg(4096);

void BM_RK4Harmonic(benchmark::State& state) {
  const auto p = make_test_problem("harmonic");
  const double dt = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) {
    auto traj = ode::integrate(ode::SchemeSpec::of(ode::SchemeKind::rk4), p.field, p.u0, 0.0, 1.0, dt);
    benchmark::DoNotOptimize(traj.back());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RK4Harmonic)->Arg(512)->Arg(4096);

void BM_BackwardEulerGradflow(benchmark::State& state) {
  const auto p = make_test_problem("quadratic_gradflow");
  for (auto _ : state) {
    auto traj = ode::integrate(ode::SchemeSpec::of(ode::SchemeKind::backward_euler), p.field, p.u0, 0.0, 1.0, 1.0 / 512);
    benchmark::DoNotOptimize(traj.back());
  }
}
BENCHMARK(BM_BackwardEulerGradflow);

void BM_NetworkForwardBackward(benchmark::State& state) {
  arch::NetworkSpec spec;
  spec.kind = static_cast<arch::ArchKind>(state.range(0));
  spec.depth = 6;
  spec.width = 16;
  Rng rng(1);
  ad::ParamStore params = arch::init_params(spec, rng);
  Matrix x(32, 2);
  for (double& v : x.values()) v = rng.normal();
  std::vector<int> labels(32);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  for (auto _ : state) {
    params.zero_grad();
    ad::Tape tape;
    auto loss = ad::softmax_cross_entropy(arch::network_forward(tape, spec, params, x, arch::Mode::eval).logits, labels);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.scalar());
  }
  state.SetLabel(std::string(arch::to_string(spec.kind)));
}
BENCHMARK(BM_NetworkForwardBackward)->DenseRange(0, 4);

void BM_EulerMaruyamaGbm(benchmark::State& state) {
  const auto p = sde::gbm_problem(0.5, 0.2, 1.0);
  const auto paths = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto e = sde::simulate_expectation(p, sde::IncrementKind::gaussian, "identity", 0.01, paths, 42);
    benchmark::DoNotOptimize(e.estimate);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 100);
}
BENCHMARK(BM_EulerMaruyamaGbm)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
