// Serial reference path against the OpenMP path for the batch kernels.
#include "clfstab/clf_smooth.hpp"
#include "clfstab/iss_analysis.hpp"
#include "clfstab/nonsmooth_clf.hpp"
#include "clfstab/obstructions.hpp"
#include "clfstab/robust.hpp"

#include <benchmark/benchmark.h>

using namespace clfstab;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) == 0 ? Execution::Serial : Execution::Parallel; }

void region_check(benchmark::State& state) {
  const auto art = zoo_build("artstein-circles");
  const auto U = ControlSet::interval(-1, 1, 101);
  const auto clf = artstein_smooth_view();
  for (auto _ : state) {
    benchmark::DoNotOptimize(verify_clf_on_region(clf, art, U, Region{0.1, 2.0, {}}, 81, 1e-9, mode(state)));
  }
}

void envelope_grid(benchmark::State& state) {
  const auto pts = region_grid(2, Region{0.1, 1.5, {}}, 31);
  for (auto _ : state) {
    const MoreauEnvelope env(artstein_clf(), 0.05, EnvelopeOptions{3, 1e-8, 20000, 0x2545F4914F6CDD1DULL, false});
    benchmark::DoNotOptimize(
        map_indices<double>(pts.size(), mode(state), [&](std::size_t i) { return env.value(pts[i]); }));
  }
}

void lyapunov_grid(benchmark::State& state) {
  LyapunovCandidate c;
  c.name = "young";
  c.n = 1;
  c.V = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  c.grad = [](const Vec& x) { return Vec(x); };
  c.alpha = [](double r) { return 0.5 * r * r; };
  c.gamma = [](double r) { return 0.5 * r * r; };
  const auto sys = zoo_build("scalar-linear", {{"a", -1.0}});
  const auto xs = box_grid(1, 5, 401);
  const auto us = box_grid(1, 2, 201);
  for (auto _ : state) benchmark::DoNotOptimize(verify_lyapunov_candidate(c, sys, xs, us, mode(state)));
}

void brockett_probe(benchmark::State& state) {
  const auto sys = zoo_build("uuu");
  ProbeOptions opt;
  opt.exec = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(onto_neighborhood_probe(sys, 1, 1, 64, opt));
}

void gain_probe(benchmark::State& state) {
  const auto sys = zoo_build("arctan-iiss");
  std::vector<InputSignal> inputs;
  for (int i = 1; i <= 8; ++i) inputs.push_back(Signal::constant(make_vec({0.1 * i})));
  const std::vector<Vec> x0s{make_vec({-1.0}), make_vec({0.0}), make_vec({1.0})};
  for (auto _ : state) benchmark::DoNotOptimize(asymptotic_gain_probe(sys, nullptr, inputs, x0s, 10, 0.01, 0.25, mode(state)));
}

void robust_cells(benchmark::State& state) {
  const auto sys = zoo_build("integrator");
  const auto U = ControlSet::interval(-1, 1, 101);
  const auto c = constants_for(continuous_from_smooth(quadratic_clf(1)), sys, U, 0.5, 2.0);
  RobustExperimentSpec spec;
  spec.initial_states = {make_vec({1.0}), make_vec({-1.0})};
  spec.schedules = {{"compliant", 1.0}};
  spec.errors = {{"none", ErrorModel::None}};
  spec.substeps = 4;
  spec.exec = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(robust_stabilization_experiment(sys, c, U, spec));
}

}  // namespace

BENCHMARK(region_check)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(envelope_grid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(lyapunov_grid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(brockett_probe)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(gain_probe)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(robust_cells)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
