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

#include <string>

#include <benchmark/benchmark.h>

#include "rangefuse/experiment.hpp"

namespace rangefuse {
namespace {

// One KITTI-00 seed, every agent, per fusion mode.
void BM_FuseKitti(benchmark::State& state) {
  const ExperimentConfig config =
      load_config(std::string(RANGEFUSE_SOURCE_DIR) + "/configs/kitti00_mono.json");
  const Simulation sim = simulate(config, build_scenario(config), 1);
  const auto stream = message_stream(sim);
  const auto mode = static_cast<FusionMode>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fuse(config, stream, sim.priors, mode, 1));
  }
  state.SetLabel(std::string(to_string(mode)));
}
BENCHMARK(BM_FuseKitti)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_SimulateKitti(benchmark::State& state) {
  const ExperimentConfig config =
      load_config(std::string(RANGEFUSE_SOURCE_DIR) + "/configs/kitti00_mono.json");
  const SwarmScenario scenario = build_scenario(config);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(config, scenario, 1));
}
BENCHMARK(BM_SimulateKitti)->Unit(benchmark::kMillisecond);

void BM_Linearize(benchmark::State& state) {
  const ExperimentConfig config =
      load_config(std::string(RANGEFUSE_SOURCE_DIR) + "/configs/kitti00_mono.json");
  const Simulation sim = simulate(config, build_scenario(config), 1);
  std::vector<KeyframeMsg> keyframes;
  std::vector<OdometryEdge> edges;
  for (std::size_t a = 0; a < sim.odometry.keyframes.size(); ++a) {
    keyframes.insert(keyframes.end(), sim.odometry.keyframes[a].begin(),
                     sim.odometry.keyframes[a].end());
    edges.insert(edges.end(), sim.odometry.edges[a].begin(), sim.odometry.edges[a].end());
  }
  const GraphState graph = build_graph(keyframes, edges, sim.ranges.inter, sim.ranges.anchor,
                                       config.anchors, sim.priors);
  for (auto _ : state) benchmark::DoNotOptimize(linearize(graph));
}
BENCHMARK(BM_Linearize)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace rangefuse

BENCHMARK_MAIN();
