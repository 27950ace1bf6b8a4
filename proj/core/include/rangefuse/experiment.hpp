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

// End-to-end pipeline: scenario -> simulated messages -> fusion per mode ->
// metrics and artifacts. Each stage is exposed on its own so the command-line
// tool can run them separately against files.

#ifndef RANGEFUSE_EXPERIMENT_HPP
#define RANGEFUSE_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rangefuse/comms.hpp"
#include "rangefuse/factor_graph.hpp"
#include "rangefuse/metrics.hpp"
#include "rangefuse/swarm_sim.hpp"

namespace rangefuse {

enum class FusionMode {
  kVoOnly,
  kVoInter,
  kVoInterAnchor,
};

[[nodiscard]] std::string_view to_string(FusionMode mode);
/// "vo-only", "vo+inter" or "vo+inter+anchor"; throws kConfigError.
[[nodiscard]] FusionMode parse_mode(std::string_view name);

struct DatasetConfig {
  std::string source = "synthetic";  ///< "kitti", "tum" or "synthetic"
  std::filesystem::path path;
  double rate_hz = 10.0;      ///< KITTI timestamp synthesis
  bool kitti_z_up = true;     ///< apply kitti_to_z_up after loading
  int keyframe_stride = 1;
  int synthetic_poses = 400;
  double synthetic_extent = 120.0;
  double synthetic_duration = 40.0;
};

struct PerturbationConfig {
  double rotation_sigma = 0.0;
  double translation_sigma = 0.0;
  double log_scale_sigma = 0.0;
};

struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  DatasetConfig dataset;
  int agents = 4;
  std::map<AnchorId, Vec3> anchors;
  double max_range = 200.0;
  double association_tolerance = 0.05;
  OdometryNoiseConfig odometry;
  RangingNoiseConfig ranging;
  PriorConfig priors;
  SolverConfig solver;
  BaselineCostModel baselines;
  /// Noise added to the initial guess of every node before solving.
  PerturbationConfig initial_perturbation;
  std::vector<std::uint64_t> seeds{1};
  std::vector<FusionMode> modes{FusionMode::kVoOnly, FusionMode::kVoInter,
                                FusionMode::kVoInterAnchor};
  std::filesystem::path output_dir = "out";
  int workers = 0;  ///< 0: one per hardware thread
};

/// Parses the versioned JSON schema; unknown keys anywhere are rejected with
/// kConfigError. Relative dataset paths resolve against `base_dir`.
[[nodiscard]] ExperimentConfig parse_config(
    const std::string& json_text, const std::filesystem::path& base_dir = {});
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved config; parse_config(to_json(c)) == c.
[[nodiscard]] std::string to_json(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Stages

[[nodiscard]] SwarmScenario build_scenario(const ExperimentConfig& config);

struct Simulation {
  OdometryRun odometry;
  RangeRun ranges;
  std::vector<PriorFactor> priors;
};

[[nodiscard]] Simulation simulate(const ExperimentConfig& config,
                                  const SwarmScenario& scenario,
                                  std::uint64_t seed);

/// All messages of a run in transmission order (by timestamp; keyframes
/// before ranges at equal times).
[[nodiscard]] std::vector<WireMessage> message_stream(const Simulation& sim);

struct FusionResult {
  FusionMode mode = FusionMode::kVoOnly;
  std::vector<std::vector<TimedSim3>> estimates;  ///< per agent
  SolveReport solver;
  std::size_t dangling_ranges = 0;
  /// Largest |t_range - t_keyframe| over the range factors used.
  double max_range_time_gap = 0.0;
};

/// Keyframes, odometry and priors always; inter-agent and anchor ranges as
/// the mode allows. Odometry edges are rebuilt from the keyframes.
[[nodiscard]] FusionResult fuse(const ExperimentConfig& config,
                                std::span<const WireMessage> messages,
                                std::span<const PriorFactor> priors,
                                FusionMode mode, std::uint64_t seed);

struct AgentMetrics {
  AgentId agent = 0;
  double ate_rmse = 0.0;
  double median_scale_error = 0.0;
  std::vector<double> timestamps;
  std::vector<double> position_errors;
  std::vector<double> scale_errors;
};

struct ModeMetrics {
  FusionMode mode = FusionMode::kVoOnly;
  double ate_rmse = 0.0;  ///< over the keyframes of all agents together
  double median_scale_error = 0.0;
  std::vector<AgentMetrics> agents;
};

[[nodiscard]] std::vector<std::vector<TimedSim3>> truth_trajectories(
    const SwarmScenario& scenario);

[[nodiscard]] ModeMetrics evaluate(
    FusionMode mode, const std::vector<std::vector<TimedSim3>>& estimates,
    const std::vector<std::vector<TimedSim3>>& truth,
    const std::vector<AgentId>& agent_ids);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<FusionResult> fusion;
  std::vector<ModeMetrics> metrics;
  AccountingReport accounting;
  std::vector<AvailabilityRow> availability;
};

struct ExperimentReport {
  std::vector<SeedResult> seeds;
  std::map<FusionMode, double> median_ate;
  std::map<FusionMode, double> median_scale_error;
};

/// Seeds run in a worker pool; results are ordered as config.seeds, so the
/// written artifacts do not depend on scheduling.
[[nodiscard]] ExperimentReport run_experiment(const ExperimentConfig& config,
                                              bool write_outputs = true);

// ---------------------------------------------------------------------------
// Artifacts

/// Writes through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);
[[nodiscard]] std::string read_file(const std::filesystem::path& path);

[[nodiscard]] std::string metrics_json(const ExperimentConfig& config,
                                       const ExperimentReport& report);
[[nodiscard]] std::string series_csv(const ModeMetrics& metrics);
[[nodiscard]] std::string availability_csv(
    const std::vector<AvailabilityRow>& rows);
[[nodiscard]] std::string accounting_csv(const AccountingReport& report);

struct PlotSeries {
  std::string color;
  std::vector<std::vector<TimedSim3>> agents;
};

/// Top view (x, y); ground truth in gray first, then each series.
[[nodiscard]] std::string trajectory_svg(
    const std::vector<std::vector<TimedSim3>>& truth,
    const std::vector<PlotSeries>& series);

[[nodiscard]] std::string_view mode_color(FusionMode mode);

/// Estimates as "agent_<id>.tum" plus "scales.csv" (TUM carries no scale).
void write_estimates(const std::filesystem::path& dir,
                     const std::vector<std::vector<TimedSim3>>& estimates,
                     const std::vector<AgentId>& agent_ids);
[[nodiscard]] std::vector<std::vector<TimedSim3>> read_estimates(
    const std::filesystem::path& dir, const std::vector<AgentId>& agent_ids);

}  // namespace rangefuse

#endif  // RANGEFUSE_EXPERIMENT_HPP
