#include <benchmark/benchmark.h>

#include "hover/dynamics.hpp"
#include "hover/env.hpp"
#include "hover/geometry.hpp"
#include "hover/lidar.hpp"
#include "hover/nn/distribution.hpp"
#include "hover/nn/networks.hpp"
#include "hover/ppo.hpp"

namespace {

using namespace hover;

void BM_Scan(benchmark::State& state) {
  geometry::AsteroidGenConfig gc;
  gc.subdivision_level = static_cast<int>(state.range(0));
  const auto asteroid = geometry::synthesize_asteroid(1, gc, {});
  const lidar::MeshIntersector target(asteroid.mesh);
  const Vec3 pos(0.0, 0.0, 900.0);
  const lidar::SensorConfig sensor;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lidar::scan(target, pos, Quat::Identity(), sensor));
  }
  state.counters["faces"] = static_cast<double>(asteroid.mesh.face_count());
}
BENCHMARK(BM_Scan)->Arg(2)->Arg(3)->Arg(4);

void BM_Rk4Step(benchmark::State& state) {
  const auto model = geometry::synthesize_asteroid(2, {}, {});
  const auto forces = dynamics::env_forces_for(model);
  const auto table = dynamics::default_thruster_table();
  dynamics::SpacecraftState s;
  s.r = Vec3(200.0, 300.0, 500.0);
  s.omega = Vec3(0.01, -0.02, 0.005);
  dynamics::Action a{};
  a[0] = a[5] = a[9] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dynamics::rk4_step(s, a, table, 2.0, model, forces, {}));
  }
}
BENCHMARK(BM_Rk4Step);

void BM_PolicyStep(benchmark::State& state) {
  nn::PolicyNetwork net;
  net.initialize(1);
  const nn::Vector x = nn::Vector::Constant(env::kPolicyInputSize, 0.1);
  nn::Vector h = net.initial_hidden();
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.step(x, h));
  }
}
BENCHMARK(BM_PolicyStep);

void BM_PolicyBackward(benchmark::State& state) {
  nn::PolicyNetwork net;
  net.initialize(1);
  const int len = static_cast<int>(state.range(0));
  std::vector<nn::Vector> xs(len, nn::Vector::Constant(env::kPolicyInputSize, 0.1));
  std::vector<nn::Vector> ds(len, nn::Vector::Constant(nn::kActionLogits, 0.01));
  for (auto _ : state) {
    const auto trace = net.forward_sequence(xs, net.initial_hidden());
    benchmark::DoNotOptimize(net.backward_sequence(trace, ds));
  }
}
BENCHMARK(BM_PolicyBackward)->Arg(50)->Arg(100);

void BM_EnvStep(benchmark::State& state) {
  env::Environment environment(env::EpisodeConfig{});
  std::uint64_t seed = 0;
  environment.reset(seed);
  dynamics::Action a{};
  a[2] = a[7] = 1;
  for (auto _ : state) {
    if (environment.done()) {
      state.PauseTiming();
      environment.reset(++seed);
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(environment.step(a));
  }
}
BENCHMARK(BM_EnvStep);

void BM_EnvReset(benchmark::State& state) {
  env::Environment environment(env::EpisodeConfig{});
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(environment.reset(++seed));
  }
}
BENCHMARK(BM_EnvReset);

void BM_Rollout(benchmark::State& state) {
  env::EpisodeConfig cfg;
  cfg.duration = 300.0;
  const ppo::EnvFactory factory = [cfg] { return std::make_unique<env::Environment>(cfg); };
  nn::PolicyNetwork policy;
  nn::ValueNetwork value;
  policy.initialize(1);
  value.initialize(2);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ppo::collect_rollouts(factory, policy, value, 1, ++seed));
  }
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
