#include <benchmark/benchmark.h>

#include "matfdr/multitest.hpp"
#include "matfdr/rng.hpp"
#include "matfdr/simulate.hpp"
#include "matfdr/whitening.hpp"

using namespace matfdr;

namespace {

ObservationSet scenario_observations(int d, int r, int n, std::uint64_t seed) {
  const FactorModel m =
      generate_low_rank(d, d, r, static_cast<double>(d), 2.0, seed);
  return sample_observations(m, n, 0.5, NoiseSpec{}, seed + 1);
}

void BM_GradientDescentInit(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const ObservationSet obs = scenario_observations(d, 2, 40 * d, 7);
  GdConfig cfg;
  cfg.rank = 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradient_descent_init(obs, cfg));
  }
}
BENCHMARK(BM_GradientDescentInit)->Arg(60)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_FullEstimate(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const ObservationSet obs = scenario_observations(d, 2, 40 * d, 9);
  GdConfig cfg;
  cfg.rank = 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(full_estimate(obs, cfg));
  }
}
BENCHMARK(BM_FullEstimate)->Arg(60)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_EstimateSigma(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  const int d = 100;
  const FactorModel m = generate_low_rank(d, d, 3, 100.0, 2.0, 11);
  DesignStack stack{d, d, {}};
  Rng rng(13);
  for (int i = 0; i < q; ++i)
    stack.forms.push_back(LinearForm::entry(
        static_cast<int>(rng.below(d)), static_cast<int>(rng.below(d))));
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_sigma(stack, m.U, m.V));
  }
}
BENCHMARK(BM_EstimateSigma)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Lasso(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  Rng rng(17);
  Eigen::MatrixXd design(q, q);
  Eigen::VectorXd response(q);
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < q; ++i) design(i, j) = rng.normal() / std::sqrt(q);
  for (int i = 0; i < q; ++i) response(i) = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(lasso(design, response, 0.5));
  }
}
BENCHMARK(BM_Lasso)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_Threshold(benchmark::State& state) {
  Rng rng(19);
  std::vector<double> w(static_cast<std::size_t>(state.range(0)));
  for (double& x : w) x = rng.normal() * rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(data_driven_threshold(w, 0.1));
  }
}
BENCHMARK(BM_Threshold)->Arg(1000)->Arg(40000);

}  // namespace

BENCHMARK_MAIN();
