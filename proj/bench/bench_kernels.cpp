// Parallel kernels against their serial references. Run with
// BNNCERT_THREADS unset to use the OpenMP default thread count.

#include <benchmark/benchmark.h>

#include <random>

#include "bnncert/certifier.hpp"
#include "bnncert/estimate.hpp"

using namespace bnncert;

namespace {

BnnModel bench_model() {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto layer = [&](std::size_t n_in, std::size_t n_out, ActivationKind act) {
    LayerPosterior l;
    l.weight_mean = Matrix(n_out, n_in);
    l.weight_var = Matrix(n_out, n_in, 1e-3 / static_cast<double>(n_in));
    for (auto& v : l.weight_mean.data()) v = normal(rng) / std::sqrt(static_cast<double>(n_in));
    l.bias_mean.assign(n_out, 0.0);
    l.bias_var.assign(n_out, 1e-4);
    l.activation = act;
    return l;
  };
  return BnnModel({layer(2, 32, ActivationKind::ReLU), layer(32, 32, ActivationKind::ReLU),
                   layer(32, 1, ActivationKind::Identity)});
}

const BnnModel& model() {
  static const BnnModel m = bench_model();
  return m;
}

const InputRegion& region() {
  static const InputRegion r = InputRegion::single(IntervalBox({Interval(-0.1, 0.1), Interval(0.0, 0.1)}));
  return r;
}

const SafetySpec& spec() {
  static const SafetySpec s = band_spec(2.0);
  return s;
}

CertifyConfig config(const benchmark::State& state) {
  CertifyConfig cfg;
  cfg.n_samples = static_cast<std::size_t>(state.range(0));
  cfg.method = state.range(1) ? CheckMethod::LBP : CheckMethod::IBP;
  cfg.weight_margin = 0.5;
  return cfg;
}

void BM_Certify(benchmark::State& state) {
  const auto cfg = config(state);
  for (auto _ : state) benchmark::DoNotOptimize(certify(model(), region(), spec(), cfg).p_lower);
}

void BM_CertifySerial(benchmark::State& state) {
  const auto cfg = config(state);
  for (auto _ : state) benchmark::DoNotOptimize(certify_serial(model(), region(), spec(), cfg).p_lower);
}

void BM_Psafe(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mc_estimate_psafe(model(), region(), spec(), n, 1).value);
}

void BM_PsafeSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mc_estimate_psafe_serial(model(), region(), spec(), n, 1).value);
}

struct MassInputs {
  std::vector<WeightSample> samples;
  SafeWeightSet set;
};

const MassInputs& mass_inputs() {
  static const MassInputs in = [] {
    MassInputs m;
    for (std::uint64_t i = 0; i < 20000; ++i) m.samples.push_back(sample_weights(model(), 2, i));
    CertifyConfig cfg;
    cfg.n_samples = 64;
    cfg.weight_margin = 2.0;
    m.set = certify(model(), region(), band_spec(1e9), cfg).safe_set;
    return m;
  }();
  return in;
}

void BM_BoxMass(benchmark::State& state) {
  const auto& in = mass_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(mc_box_mass(in.samples, in.set).value);
}

void BM_BoxMassSerial(benchmark::State& state) {
  const auto& in = mass_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(mc_box_mass_serial(in.samples, in.set).value);
}

}  // namespace

BENCHMARK(BM_Certify)->ArgsProduct({{256, 1024}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CertifySerial)->ArgsProduct({{256, 1024}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Psafe)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PsafeSerial)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BoxMass)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BoxMassSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
