#include "ipsukf/experiment.hpp"
#include "ipsukf/input_estimator.hpp"
#include "ipsukf/simulator.hpp"
#include "ipsukf/ukf.hpp"

#include <benchmark/benchmark.h>

using namespace ipsukf;

namespace {

struct Setup {
  ExperimentConfig config;
  ChainModel model;
  FilterConfig filter;
  std::vector<Vector> measurements;
  RunInit init;

  explicit Setup(const char* name)
      : config(preset(name)), model(config.build_model()), filter(config.filter_config()) {
    const Trajectory tr = rk4_simulate(config.truth(), config.excitation,
                                       Vector::Zero(2 * model.n_dof()), config.filter.dt,
                                       config.filter.duration, 1);
    const auto y = synthesize_measurements(tr, config.layout, {config.noise_rms_ratio, 1});
    measurements.assign(y.begin() + 1, y.end());
    init = config.run_init();
  }
};

void BM_SigmaPoints(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  FilterConfig c;
  const Vector z = Vector::LinSpaced(L, -1.0, 1.0);
  const Matrix P = Matrix::Identity(L, L) * 0.1 + Matrix::Constant(L, L, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(generate_sigma_points(z, P, c));
}
BENCHMARK(BM_SigmaPoints)->Arg(6)->Arg(10)->Arg(12)->Arg(24);

void BM_IpsStep(benchmark::State& state, const char* name) {
  const Setup s(name);
  FilterState fs{s.init.state, s.init.covariance};
  InputFrame prev = apply_known_mask(s.init.input);
  size_t k = 0;
  for (auto _ : state) {
    if (k == s.measurements.size()) {
      fs = {s.init.state, s.init.covariance};
      k = 0;
    }
    const StepResult r = ips_step(fs, s.measurements[k], s.model, prev, s.filter, long(k) + 1);
    prev = r.input_estimate;
    ++k;
  }
}
BENCHMARK_CAPTURE(BM_IpsStep, linear3dof, "linear3dof-pulse");
BENCHMARK_CAPTURE(BM_IpsStep, duffing2dof, "duffing2dof");

void BM_FullRun(benchmark::State& state) {
  const Setup s("linear3dof-pulse");
  for (auto _ : state) benchmark::DoNotOptimize(run(s.model, s.filter, s.measurements, s.init));
}
BENCHMARK(BM_FullRun)->Unit(benchmark::kMillisecond);

void BM_Rk4Truth(benchmark::State& state) {
  const ExperimentConfig c = preset("duffing2dof");
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rk4_simulate(c.truth(), c.excitation, Vector::Zero(4), c.filter.dt, c.filter.duration, 1));
  }
}
BENCHMARK(BM_Rk4Truth)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
