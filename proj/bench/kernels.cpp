// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to the
// core count; on one core the two variants should take the same time.

#include <random>

#include <benchmark/benchmark.h>

#include "geminet/descriptor.hpp"
#include "geminet/fci.hpp"
#include "geminet/geometry.hpp"
#include "geminet/integrals.hpp"
#include "geminet/ml/model.hpp"
#include "geminet/ml/params.hpp"
#include "geminet/units.hpp"
#include "support.hpp"

using namespace geminet;

namespace {

Exec policy(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

const char* label(const benchmark::State& state) { return state.range(0) == 0 ? "serial" : "parallel"; }

Geometry chain(int n) { return gen_chain(n, {1.2, 2.0, 2}).front(); }

std::vector<ContractedShell> shells_of(const Geometry& g) {
    std::vector<ContractedShell> out;
    for (const auto& p : g.positions) out.push_back(sto6g_hydrogen(p * units::bohr_per_angstrom));
    return out;
}

void eri_build(benchmark::State& state) {
    const auto shells = shells_of(chain(static_cast<int>(state.range(1))));
    for (auto _ : state) benchmark::DoNotOptimize(build_eri(shells, policy(state)));
    state.SetLabel(label(state));
}

void eri_reference(benchmark::State& state) {
    const auto shells = shells_of(chain(static_cast<int>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(build_eri_reference(shells));
}

void fci_sigma(benchmark::State& state) {
    const int n = static_cast<int>(state.range(1));
    const auto ints = orthonormalize(build_integrals(chain(n)));
    const FciSpace space(n, n / 2, n / 2);
    Eigen::VectorXd c = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(space.dimension()));
    c.normalize();
    for (auto _ : state) benchmark::DoNotOptimize(space.sigma(ints, c, policy(state)));
    state.SetLabel(label(state));
    state.counters["dim"] = static_cast<double>(space.dimension());
}

void describe_batch(benchmark::State& state) {
    std::vector<IntegralSet> systems;
    const auto geoms = generate(6, "octahedral", default_grid(6, "octahedral"));
    for (int i = 0; i < 64; ++i) systems.push_back(orthonormalize(build_integrals(geoms[i])));
    for (auto _ : state) benchmark::DoNotOptimize(describe_all(systems, policy(state)));
    state.SetLabel(label(state));
}

void set_model_gradient(benchmark::State& state) {
    const auto p = ml::init_params(ml::SetModelSpec{}, 1);
    const auto data = testing::synthetic_samples(64, static_cast<int>(state.range(1)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(ml::backward(p, data, {}, policy(state)));
    state.SetLabel(label(state));
}

}  // namespace

BENCHMARK(eri_build)->ArgsProduct({{0, 1}, {8, 10}})->Unit(benchmark::kMillisecond);
BENCHMARK(eri_reference)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(fci_sigma)->ArgsProduct({{0, 1}, {8, 10}})->Unit(benchmark::kMillisecond);
BENCHMARK(describe_batch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(set_model_gradient)->ArgsProduct({{0, 1}, {28, 120}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
