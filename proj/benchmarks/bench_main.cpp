#include <benchmark/benchmark.h>

#include "bussim/datagen.hpp"
#include "bussim/objective.hpp"
#include "bussim/pf.hpp"
#include "bussim/sim.hpp"

using namespace bussim;

namespace {

sim::SimConfig truth_config(double xi = 7.0) {
  sim::SimConfig c;
  c.variant = sim::Variant::kTruth;
  c.max_demand = 2.0;
  c.dynamic_rate = xi;
  return c;
}

sim::ModelParams params_for(const sim::SimConfig& c) {
  Rng rng(1);
  return datagen::sample_params(c.min_demand, c.max_demand, c.num_stops, c.initial_speed, rng);
}

void BM_Step(benchmark::State& state) {
  const auto cfg = truth_config();
  const auto p = params_for(cfg);
  auto s0 = sim::initial_state(cfg, p);
  Rng rng(2);
  sim::run_until(s0, cfg, rng, 3600);
  for (auto _ : state) {
    auto s = s0;
    sim::advance(s, cfg, rng);
    benchmark::DoNotOptimize(s.clock);
  }
}
BENCHMARK(BM_Step);

void BM_FullRun(benchmark::State& state) {
  auto cfg = truth_config();
  cfg.variant = static_cast<sim::Variant>(state.range(0));
  const auto p = params_for(cfg);
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_positions(cfg, p, rng));
}
BENCHMARK(BM_FullRun)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_PerformanceIndex(benchmark::State& state) {
  const auto cfg = truth_config();
  const auto sc = datagen::make_scenario(cfg, 4, 10);
  const auto hist = datagen::generate_historical(sc);
  sim::SimConfig model = cfg;
  model.variant = sim::Variant::kDeterministic;
  const calib::Objective obj(hist, model, 1);
  for (auto _ : state) benchmark::DoNotOptimize(obj(sc.params0, 0));
}
BENCHMARK(BM_PerformanceIndex)->Unit(benchmark::kMillisecond);

// One assimilation round: predict 30 s, weight, resample.
void BM_FilterRound(benchmark::State& state) {
  const auto cfg = truth_config();
  const auto sc = datagen::make_scenario(cfg, 5, 2);
  const auto rt = datagen::generate_realtime(sc).runs.front();
  const auto sched = pf::assimilation_schedule(rt, 30.0);
  sim::SimConfig model = cfg;
  model.variant = sim::Variant::kStochastic;
  const auto space = calib::ParameterSpace{}.for_truth(cfg);
  Rng rng(6);
  const auto init = pf::init_particles(sc.params0, model, space, pf::diversify_std(space, 0.0),
                                       static_cast<int>(state.range(0)), rng);
  auto ps0 = init;
  pf::predict(ps0, model, sim::ticks_for(sched[60].time, model.dt), 7, 0);
  const auto& obs = sched[61];
  std::uint64_t round = 1;
  for (auto _ : state) {
    auto ps = ps0;
    pf::predict(ps, model, sim::ticks_for(obs.time, model.dt), 7, round);
    pf::weight(ps, obs, 20.0);
    Rng r(round++);
    benchmark::DoNotOptimize(pf::resample(ps, r));
  }
}
BENCHMARK(BM_FilterRound)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Systematic(benchmark::State& state) {
  std::vector<double> w(static_cast<std::size_t>(state.range(0)));
  Rng rng(8);
  std::exponential_distribution<double> e(1.0);
  for (double& x : w) x = e(rng);
  for (auto _ : state) benchmark::DoNotOptimize(pf::systematic_indices(w, w.size(), 0.5));
}
BENCHMARK(BM_Systematic)->Arg(500)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
