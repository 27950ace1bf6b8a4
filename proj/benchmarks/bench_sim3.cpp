// Copyright 2026 The rangefuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "rangefuse/measurements.hpp"
#include "rangefuse/random.hpp"
#include "rangefuse/sim3.hpp"

namespace rangefuse {
namespace {

Twist7 random_twist(CounterRng& rng) {
  Vec7 v;
  for (int i = 0; i < 7; ++i) v(i) = rng.normal(0.3);
  return Twist7(v);
}

void BM_Exp(benchmark::State& state) {
  CounterRng rng(1, 0);
  const Twist7 xi = random_twist(rng);
  for (auto _ : state) benchmark::DoNotOptimize(exp(xi));
}
BENCHMARK(BM_Exp);

void BM_Log(benchmark::State& state) {
  CounterRng rng(2, 0);
  const Sim3Pose p = exp(random_twist(rng));
  for (auto _ : state) benchmark::DoNotOptimize(log(p));
}
BENCHMARK(BM_Log);

void BM_Compose(benchmark::State& state) {
  CounterRng rng(3, 0);
  const Sim3Pose a = exp(random_twist(rng));
  const Sim3Pose b = exp(random_twist(rng));
  for (auto _ : state) benchmark::DoNotOptimize(a * b);
}
BENCHMARK(BM_Compose);

void BM_OdometryJacobians(benchmark::State& state) {
  CounterRng rng(4, 0);
  const Sim3Pose a = exp(random_twist(rng));
  const Sim3Pose b = exp(random_twist(rng));
  const Sim3Pose z = b * inverse(a);
  for (auto _ : state) benchmark::DoNotOptimize(odometry_jacobians(a, b, z));
}
BENCHMARK(BM_OdometryJacobians);

void BM_RangeJacobians(benchmark::State& state) {
  CounterRng rng(5, 0);
  const Sim3Pose a = exp(random_twist(rng));
  const Sim3Pose b = Sim3Pose(Rotation3(), Vec3(5, 1, 0), 1.0) * a;
  for (auto _ : state) benchmark::DoNotOptimize(range_jacobians(a, b));
}
BENCHMARK(BM_RangeJacobians);

}  // namespace
}  // namespace rangefuse

BENCHMARK_MAIN();
