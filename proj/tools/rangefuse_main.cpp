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

// rangefuse command-line front end.
//
//   rangefuse simulate --config c.json [--seed N] [--out DIR]
//   rangefuse fuse     --config c.json [--seed N] [--mode M] [--out DIR]
//   rangefuse evaluate --config c.json [--seed N] [--mode M] [--out DIR]
//   rangefuse report   --config c.json [--seed N] [--mode M] [--out DIR]
//
// simulate writes DIR/seed_N/messages.{bin,jsonl}; fuse reads messages.bin and
// writes DIR/seed_N/<mode>/; evaluate scores those estimates; report runs the
// whole pipeline for every configured seed and mode.
//
// Exit status: 0 success, 1 usage or config error, 2 runtime or data error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rangefuse/comms.hpp"
#include "rangefuse/error.hpp"
#include "rangefuse/experiment.hpp"

namespace {

using namespace rangefuse;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> out;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) c.seeds = {*o.seed};
  if (o.mode) c.modes = {parse_mode(*o.mode)};
  if (o.out) c.output_dir = *o.out;
  return c;
}

std::filesystem::path seed_dir(const ExperimentConfig& c) {
  return c.output_dir / ("seed_" + std::to_string(c.seeds.front()));
}

std::vector<AgentId> ids_of(const SwarmScenario& s) {
  std::vector<AgentId> ids;
  for (const AgentTrack& a : s.agents) ids.push_back(a.id);
  return ids;
}

int cmd_simulate(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const SwarmScenario scenario = build_scenario(c);
  const Simulation sim = simulate(c, scenario, c.seeds.front());
  const auto stream = message_stream(sim);
  const Bytes bytes = encode_stream(stream);
  const auto dir = seed_dir(c);
  write_file_atomic(dir / "messages.bin", std::string(bytes.begin(), bytes.end()));
  std::string lines;
  for (const WireMessage& m : stream) lines += to_json_line(m) + "\n";
  write_file_atomic(dir / "messages.jsonl", lines);
  write_file_atomic(c.output_dir / "resolved_config.json", to_json(c));
  std::cout << stream.size() << " messages, " << bytes.size() << " bytes -> "
            << (dir / "messages.bin").string() << "\n";
  return 0;
}

int cmd_fuse(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const SwarmScenario scenario = build_scenario(c);
  const auto dir = seed_dir(c);
  const std::string raw = read_file(dir / "messages.bin");
  const Bytes bytes(raw.begin(), raw.end());
  const auto stream = decode_stream(bytes);
  const auto priors = make_priors(scenario, c.priors);
  for (FusionMode mode : c.modes) {
    const FusionResult r = fuse(c, stream, priors, mode, c.seeds.front());
    const auto mode_dir = dir / std::string(to_string(mode));
    write_estimates(mode_dir, r.estimates, ids_of(scenario));
    const nlohmann::json report{
        {"iterations", r.solver.iterations},
        {"initial_cost", r.solver.costs.front()},
        {"final_cost", r.solver.costs.back()},
        {"termination", std::string(to_string(r.solver.termination))},
        {"dangling_ranges", r.dangling_ranges},
        {"max_range_time_gap_s", r.max_range_time_gap}};
    write_file_atomic(mode_dir / "solver.json", report.dump(2) + "\n");
    std::cout << to_string(mode) << ": " << r.solver.iterations << " iterations, cost "
              << r.solver.costs.front() << " -> " << r.solver.costs.back() << " ("
              << to_string(r.solver.termination) << ")\n";
  }
  return 0;
}

int cmd_evaluate(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const SwarmScenario scenario = build_scenario(c);
  const auto truth = truth_trajectories(scenario);
  const auto ids = ids_of(scenario);
  for (FusionMode mode : c.modes) {
    const auto mode_dir = seed_dir(c) / std::string(to_string(mode));
    const ModeMetrics m = evaluate(mode, read_estimates(mode_dir, ids), truth, ids);
    nlohmann::json agents = nlohmann::json::array();
    for (const AgentMetrics& a : m.agents) {
      agents.push_back({{"agent", a.agent},
                        {"ate_rmse_m", a.ate_rmse},
                        {"median_scale_error", a.median_scale_error}});
    }
    const nlohmann::json out{{"mode", std::string(to_string(mode))},
                             {"ate_rmse_m", m.ate_rmse},
                             {"median_scale_error", m.median_scale_error},
                             {"agents", agents}};
    write_file_atomic(mode_dir / "metrics.json", out.dump(2) + "\n");
    write_file_atomic(mode_dir / "series.csv", series_csv(m));
    std::cout << to_string(mode) << ": ATE RMSE " << m.ate_rmse
              << " m, median scale error " << m.median_scale_error << "\n";
  }
  return 0;
}

int cmd_report(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const ExperimentReport r = run_experiment(c);
  for (const auto& [mode, ate] : r.median_ate) {
    std::cout << to_string(mode) << ": median ATE " << ate
              << " m, median scale error " << r.median_scale_error.at(mode) << "\n";
  }
  std::cout << "outputs in " << c.output_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-aided collaborative monocular VO fusion"};
  app.require_subcommand(1);
  Options options;
  std::uint64_t seed = 0;
  std::string mode;
  std::string out;
  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", options.config, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed list");
    sub->add_option("--mode", mode, "vo-only, vo+inter or vo+inter+anchor");
    sub->add_option("--out", out, "output directory");
    return sub;
  };
  CLI::App* simulate_cmd = add("simulate", "generate the message stream for one seed");
  CLI::App* fuse_cmd = add("fuse", "fuse a simulated message stream");
  CLI::App* evaluate_cmd = add("evaluate", "score fused estimates against truth");
  CLI::App* report_cmd = add("report", "run every stage for all seeds and modes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? 0 : 1;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) options.seed = seed;
    if (sub->count("--mode") > 0) options.mode = mode;
    if (sub->count("--out") > 0) options.out = out;
  }

  try {
    if (simulate_cmd->parsed()) return cmd_simulate(options);
    if (fuse_cmd->parsed()) return cmd_fuse(options);
    if (evaluate_cmd->parsed()) return cmd_evaluate(options);
    if (report_cmd->parsed()) return cmd_report(options);
  } catch (const Error& e) {
    std::cerr << "rangefuse: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfigError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "rangefuse: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
