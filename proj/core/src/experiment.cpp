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

#include "rangefuse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <span>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "rangefuse/error.hpp"
#include "rangefuse/random.hpp"
#include "rangefuse/trajectory_io.hpp"

namespace rangefuse {

namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects the keys nobody asked for.
class Fields {
 public:
  Fields(const json& object, std::string path) : path_(std::move(path)) {
    if (!object.is_object()) {
      throw Error(ErrorCode::kConfigError, path_ + " must be an object");
    }
    object_ = &object;
  }

  template <typename T>
  void read(const char* key, T& out) {
    used_.insert(key);
    const auto it = object_->find(key);
    if (it == object_->end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::kConfigError,
                  path_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    used_.insert(key);
    const auto it = object_->find(key);
    return it == object_->end() ? nullptr : &*it;
  }

  bool has(const char* key) const { return object_->contains(key); }

  void finish() const {
    for (const auto& [key, value] : object_->items()) {
      if (!used_.contains(key)) {
        throw Error(ErrorCode::kConfigError,
                    "unknown key " + path_ + "." + key);
      }
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json* object_ = nullptr;
  std::string path_;
  std::set<std::string> used_;
};

Vec3 to_vec3(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 3) {
    throw Error(ErrorCode::kConfigError, what + " needs 3 numbers");
  }
  return {v[0], v[1], v[2]};
}

std::vector<double> from_vec3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kConfigError, what);
}

void check_config(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  require(d.source == "kitti" || d.source == "tum" || d.source == "synthetic",
          "dataset.source must be kitti, tum or synthetic");
  require(d.source == "synthetic" || !d.path.empty(), "dataset.path is required");
  require(d.rate_hz > 0.0, "dataset.rate_hz must be positive");
  require(d.keyframe_stride >= 1, "dataset.keyframe_stride must be >= 1");
  require(d.synthetic_poses >= 2 && d.synthetic_extent > 0.0 &&
              d.synthetic_duration > 0.0,
          "synthetic path parameters must be positive");
  require(c.agents >= 1 && c.agents <= 1000, "agents must be in [1, 1000]");
  require(c.max_range > 0.0, "max_range must be positive");
  require(c.association_tolerance >= 0.0,
          "association_tolerance must be non-negative");
  const auto& o = c.odometry;
  require(o.rotation_sigma >= 0.0 && o.translation_sigma >= 0.0 &&
              o.scale_sigma >= 0.0 && o.initial_scale > 0.0,
          "odometry_noise values must be non-negative");
  require(c.ranging.sigma_eta >= 0.0 && c.ranging.multipath_step_sigma >= 0.0,
          "ranging_noise sigmas must be non-negative");
  require(c.ranging.anchor_axis.norm() > 0.0, "anchor_axis must be non-zero");
  for (double s : c.priors.gauge_sigma) require(s > 0.0, "prior sigmas must be > 0");
  for (double s : c.priors.agent_sigma) require(s > 0.0, "prior sigmas must be > 0");
  validate(c.solver);
  validate(c.baselines);
  const auto& p = c.initial_perturbation;
  require(p.rotation_sigma >= 0.0 && p.translation_sigma >= 0.0 &&
              p.log_scale_sigma >= 0.0,
          "initial_perturbation sigmas must be non-negative");
  require(!c.seeds.empty(), "seeds must not be empty");
  require(!c.modes.empty(), "modes must not be empty");
  require(c.workers >= 0, "workers must be >= 0");
}

json solver_json(const SolveReport& r) {
  return json{{"iterations", r.iterations},
              {"accepted_steps", r.accepted_steps},
              {"rejected_steps", r.rejected_steps},
              {"initial_cost", r.costs.front()},
              {"final_cost", r.costs.back()},
              {"cost_history", r.costs},
              {"final_gradient_norm", r.final_gradient_norm},
              {"final_damping", r.final_damping},
              {"termination", std::string(to_string(r.termination))},
              {"skipped_factors", r.skipped_factors}};
}

json availability_json(const std::vector<AvailabilityRow>& rows) {
  json out = json::array();
  for (const AvailabilityRow& r : rows) {
    out.push_back({{"agent", r.agent},
                   {"anchor_percent", r.anchor},
                   {"peers_at_least_percent", r.peers},
                   {"peers_exactly_percent", r.exact_peers}});
  }
  return out;
}

std::vector<AgentId> agent_ids(const SwarmScenario& scenario) {
  std::vector<AgentId> ids;
  for (const AgentTrack& a : scenario.agents) ids.push_back(a.id);
  return ids;
}

}  // namespace

// ---------------------------------------------------------------------------
// Modes and config

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kVoOnly:
      return "vo-only";
    case FusionMode::kVoInter:
      return "vo+inter";
    case FusionMode::kVoInterAnchor:
      return "vo+inter+anchor";
  }
  return "unknown";
}

FusionMode parse_mode(std::string_view name) {
  for (FusionMode m : {FusionMode::kVoOnly, FusionMode::kVoInter,
                       FusionMode::kVoInterAnchor}) {
    if (name == to_string(m)) return m;
  }
  throw Error(ErrorCode::kConfigError, "unknown fusion mode '" +
                                           std::string(name) + "'");
}

ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  ExperimentConfig c;
  Fields top(root, "config");
  int version = 0;
  require(top.has("schema_version"), "schema_version is required");
  top.read("schema_version", version);
  require(version == ExperimentConfig::kSchemaVersion,
          "unsupported schema_version " + std::to_string(version));

  if (const json* j = top.child("dataset")) {
    Fields f(*j, "dataset");
    std::string path;
    f.read("source", c.dataset.source);
    f.read("path", path);
    f.read("rate_hz", c.dataset.rate_hz);
    f.read("kitti_z_up", c.dataset.kitti_z_up);
    f.read("keyframe_stride", c.dataset.keyframe_stride);
    f.read("synthetic_poses", c.dataset.synthetic_poses);
    f.read("synthetic_extent", c.dataset.synthetic_extent);
    f.read("synthetic_duration", c.dataset.synthetic_duration);
    f.finish();
    if (!path.empty()) {
      c.dataset.path = path;
      if (c.dataset.path.is_relative() && !base_dir.empty()) {
        c.dataset.path = (base_dir / c.dataset.path).lexically_normal();
      }
    }
  }
  top.read("agents", c.agents);
  if (const json* j = top.child("anchors")) {
    require(j->is_array(), "anchors must be an array");
    for (const json& a : *j) {
      Fields f(a, "anchors[]");
      int id = -1;
      std::vector<double> position;
      f.read("id", id);
      f.read("position", position);
      f.finish();
      require(id >= 0 && id <= 0xFFFF, "anchor id must fit in 16 bits");
      require(!c.anchors.contains(static_cast<AnchorId>(id)), "duplicate anchor id");
      c.anchors[static_cast<AnchorId>(id)] = to_vec3(position, "anchor position");
    }
  }
  top.read("max_range", c.max_range);
  top.read("association_tolerance", c.association_tolerance);
  if (const json* j = top.child("odometry_noise")) {
    Fields f(*j, "odometry_noise");
    f.read("rotation_sigma", c.odometry.rotation_sigma);
    f.read("translation_sigma", c.odometry.translation_sigma);
    f.read("scale_sigma", c.odometry.scale_sigma);
    f.read("monocular", c.odometry.monocular);
    f.read("initial_scale", c.odometry.initial_scale);
    f.finish();
  }
  if (const json* j = top.child("ranging_noise")) {
    Fields f(*j, "ranging_noise");
    f.read("sigma_eta", c.ranging.sigma_eta);
    f.read("multipath_step_sigma", c.ranging.multipath_step_sigma);
    std::vector<double> axis = from_vec3(c.ranging.anchor_axis);
    f.read("anchor_axis", axis);
    c.ranging.anchor_axis = to_vec3(axis, "anchor_axis");
    if (const json* b = f.child("bias")) {
      Fields fb(*b, "ranging_noise.bias");
      fb.read("enabled", c.ranging.bias.enabled);
      std::vector<double> coefficients(c.ranging.bias.coefficients.begin(),
                                       c.ranging.bias.coefficients.end());
      fb.read("coefficients", coefficients);
      require(coefficients.size() == 7, "bias.coefficients needs 7 numbers");
      std::copy(coefficients.begin(), coefficients.end(),
                c.ranging.bias.coefficients.begin());
      fb.finish();
    }
    f.finish();
  }
  if (const json* j = top.child("priors")) {
    Fields f(*j, "priors");
    f.read("gauge_sigma", c.priors.gauge_sigma);
    f.read("agent_sigma", c.priors.agent_sigma);
    f.finish();
  }
  if (const json* j = top.child("solver")) {
    Fields f(*j, "solver");
    f.read("initial_damping", c.solver.initial_damping);
    f.read("damping_increase", c.solver.damping_increase);
    f.read("damping_decrease", c.solver.damping_decrease);
    f.read("max_damping", c.solver.max_damping);
    f.read("max_iterations", c.solver.max_iterations);
    f.read("relative_cost_tolerance", c.solver.relative_cost_tolerance);
    f.read("step_norm_tolerance", c.solver.step_norm_tolerance);
    f.read("step_norm_cap", c.solver.step_norm_cap);
    f.read("max_consecutive_rejections", c.solver.max_consecutive_rejections);
    f.finish();
  }
  if (const json* j = top.child("baselines")) {
    Fields f(*j, "baselines");
    f.read("ccm_slam_lb", c.baselines.ccm_slam_lb);
    f.read("ccm_slam_ub", c.baselines.ccm_slam_ub);
    f.read("dslam", c.baselines.dslam);
    f.finish();
  }
  if (const json* j = top.child("initial_perturbation")) {
    Fields f(*j, "initial_perturbation");
    f.read("rotation_sigma", c.initial_perturbation.rotation_sigma);
    f.read("translation_sigma", c.initial_perturbation.translation_sigma);
    f.read("log_scale_sigma", c.initial_perturbation.log_scale_sigma);
    f.finish();
  }
  top.read("seeds", c.seeds);
  if (const json* j = top.child("modes")) {
    std::vector<std::string> names;
    try {
      names = j->get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::kConfigError, "modes must be a list of strings");
    }
    c.modes.clear();
    for (const std::string& n : names) c.modes.push_back(parse_mode(n));
  }
  std::string output_dir = c.output_dir.string();
  top.read("output_dir", output_dir);
  c.output_dir = output_dir;
  top.read("workers", c.workers);
  top.finish();
  check_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

std::string to_json(const ExperimentConfig& c) {
  json anchors = json::array();
  for (const auto& [id, p] : c.anchors) {
    anchors.push_back({{"id", id}, {"position", from_vec3(p)}});
  }
  std::vector<std::string> modes;
  for (FusionMode m : c.modes) modes.emplace_back(to_string(m));
  const json root{
      {"schema_version", ExperimentConfig::kSchemaVersion},
      {"dataset",
       {{"source", c.dataset.source},
        {"path", c.dataset.path.string()},
        {"rate_hz", c.dataset.rate_hz},
        {"kitti_z_up", c.dataset.kitti_z_up},
        {"keyframe_stride", c.dataset.keyframe_stride},
        {"synthetic_poses", c.dataset.synthetic_poses},
        {"synthetic_extent", c.dataset.synthetic_extent},
        {"synthetic_duration", c.dataset.synthetic_duration}}},
      {"agents", c.agents},
      {"anchors", anchors},
      {"max_range", c.max_range},
      {"association_tolerance", c.association_tolerance},
      {"odometry_noise",
       {{"rotation_sigma", c.odometry.rotation_sigma},
        {"translation_sigma", c.odometry.translation_sigma},
        {"scale_sigma", c.odometry.scale_sigma},
        {"monocular", c.odometry.monocular},
        {"initial_scale", c.odometry.initial_scale}}},
      {"ranging_noise",
       {{"sigma_eta", c.ranging.sigma_eta},
        {"multipath_step_sigma", c.ranging.multipath_step_sigma},
        {"anchor_axis", from_vec3(c.ranging.anchor_axis)},
        {"bias",
         {{"enabled", c.ranging.bias.enabled},
          {"coefficients", c.ranging.bias.coefficients}}}}},
      {"priors",
       {{"gauge_sigma", c.priors.gauge_sigma},
        {"agent_sigma", c.priors.agent_sigma}}},
      {"solver",
       {{"initial_damping", c.solver.initial_damping},
        {"damping_increase", c.solver.damping_increase},
        {"damping_decrease", c.solver.damping_decrease},
        {"max_damping", c.solver.max_damping},
        {"max_iterations", c.solver.max_iterations},
        {"relative_cost_tolerance", c.solver.relative_cost_tolerance},
        {"step_norm_tolerance", c.solver.step_norm_tolerance},
        {"step_norm_cap", c.solver.step_norm_cap},
        {"max_consecutive_rejections", c.solver.max_consecutive_rejections}}},
      {"baselines",
       {{"ccm_slam_lb", c.baselines.ccm_slam_lb},
        {"ccm_slam_ub", c.baselines.ccm_slam_ub},
        {"dslam", c.baselines.dslam}}},
      {"initial_perturbation",
       {{"rotation_sigma", c.initial_perturbation.rotation_sigma},
        {"translation_sigma", c.initial_perturbation.translation_sigma},
        {"log_scale_sigma", c.initial_perturbation.log_scale_sigma}}},
      {"seeds", c.seeds},
      {"modes", modes},
      {"output_dir", c.output_dir.string()},
      {"workers", c.workers}};
  return root.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Stages

SwarmScenario build_scenario(const ExperimentConfig& config) {
  const DatasetConfig& d = config.dataset;
  Trajectory trajectory;
  if (d.source == "synthetic") {
    trajectory = synthetic_trajectory(d.synthetic_poses, d.synthetic_extent,
                                      d.synthetic_duration);
  } else if (d.source == "kitti") {
    ReadOptions options;
    options.kitti_rate_hz = d.rate_hz;
    trajectory = load_trajectory(d.path, TrajectoryFormat::kKitti, options);
    if (d.kitti_z_up) trajectory = kitti_to_z_up(trajectory);
  } else {
    trajectory = load_trajectory(d.path, TrajectoryFormat::kTum);
  }
  SwarmScenario scenario =
      split_swarm(subsample(trajectory, d.keyframe_stride), config.agents);
  scenario.anchors = config.anchors;
  scenario.max_range = config.max_range;
  scenario.association_tolerance = config.association_tolerance;
  validate(scenario);
  return scenario;
}

Simulation simulate(const ExperimentConfig& config,
                    const SwarmScenario& scenario, std::uint64_t seed) {
  Simulation sim;
  sim.odometry = generate_odometry(scenario, config.odometry, config.priors, seed);
  sim.ranges = generate_ranges(scenario, config.ranging, seed);
  sim.priors = make_priors(scenario, config.priors);
  return sim;
}

std::vector<WireMessage> message_stream(const Simulation& sim) {
  struct Entry {
    double t;
    int kind;
    std::size_t order;
    WireMessage msg;
  };
  std::vector<Entry> entries;
  std::size_t order = 0;
  for (const auto& agent : sim.odometry.keyframes) {
    for (const KeyframeMsg& k : agent) entries.push_back({k.timestamp(), 0, order++, k});
  }
  for (const InterRangeMsg& m : sim.ranges.inter) {
    entries.push_back({m.timestamp(), 1, order++, m});
  }
  for (const AnchorRangeMsg& m : sim.ranges.anchor) {
    entries.push_back({m.timestamp(), 2, order++, m});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.t, a.kind, a.order) < std::tie(b.t, b.kind, b.order);
  });
  std::vector<WireMessage> out;
  out.reserve(entries.size());
  for (Entry& e : entries) out.push_back(std::move(e.msg));
  return out;
}

FusionResult fuse(const ExperimentConfig& config,
                  std::span<const WireMessage> messages,
                  std::span<const PriorFactor> priors, FusionMode mode,
                  std::uint64_t seed) {
  std::map<AgentId, std::vector<KeyframeMsg>> chains;
  std::vector<InterRangeMsg> inter;
  std::vector<AnchorRangeMsg> anchor;
  for (const WireMessage& m : messages) {
    if (const auto* k = std::get_if<KeyframeMsg>(&m)) {
      chains[k->agent_id()].push_back(*k);
    } else if (const auto* r = std::get_if<InterRangeMsg>(&m)) {
      if (mode != FusionMode::kVoOnly) inter.push_back(*r);
    } else if (const auto* a = std::get_if<AnchorRangeMsg>(&m)) {
      if (mode == FusionMode::kVoInterAnchor) anchor.push_back(*a);
    }
  }
  std::vector<KeyframeMsg> keyframes;
  std::vector<OdometryEdge> edges;
  for (auto& [agent, chain] : chains) {
    std::stable_sort(chain.begin(), chain.end(),
                     [](const KeyframeMsg& a, const KeyframeMsg& b) {
                       return a.timestamp() < b.timestamp();
                     });
    const auto chain_edges = odometry_from_keyframes(chain);
    edges.insert(edges.end(), chain_edges.begin(), chain_edges.end());
    keyframes.insert(keyframes.end(), chain.begin(), chain.end());
  }

  BuildOptions options;
  options.association_tolerance = config.association_tolerance;
  GraphState graph = build_graph(keyframes, edges, inter, anchor, config.anchors,
                                 priors, options);

  const PerturbationConfig& p = config.initial_perturbation;
  if (p.rotation_sigma > 0.0 || p.translation_sigma > 0.0 ||
      p.log_scale_sigma > 0.0) {
    CounterRng rng(seed, stream_id(StreamKind::kPerturbation, 0));
    for (std::size_t k = 0; k < graph.keys().size(); ++k) {
      Vec7 xi;
      for (int i = 0; i < 7; ++i) {
        const double sigma = i < 3 ? p.rotation_sigma
                                   : (i < 6 ? p.translation_sigma : p.log_scale_sigma);
        xi[i] = rng.normal(sigma);
      }
      graph.set_pose(k, retract(graph.pose(k), Twist7(xi)));
    }
  }

  SolveResult solved = solve_lm(graph, config.solver);
  FusionResult result;
  result.mode = mode;
  result.solver = std::move(solved.report);
  result.dangling_ranges = solved.graph.dangling_count();
  for (const Factor& f : solved.graph.factors()) {
    if (const auto* r = std::get_if<InterRangeTerm>(&f)) {
      result.max_range_time_gap = std::max(result.max_range_time_gap, r->time_gap);
    } else if (const auto* a = std::get_if<AnchorRangeTerm>(&f)) {
      result.max_range_time_gap = std::max(result.max_range_time_gap, a->time_gap);
    }
  }
  const auto& keys = solved.graph.keys();
  AgentId current = 0;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (k == 0 || keys[k].agent != current) {
      current = keys[k].agent;
      result.estimates.emplace_back();
    }
    result.estimates.back().push_back({keys[k].timestamp, solved.graph.pose(k)});
  }
  return result;
}

std::vector<std::vector<TimedSim3>> truth_trajectories(
    const SwarmScenario& scenario) {
  std::vector<std::vector<TimedSim3>> out;
  for (const AgentTrack& a : scenario.agents) {
    std::vector<TimedSim3> track;
    track.reserve(a.truth.size());
    for (const TimedPose& p : a.truth) {
      track.push_back({p.timestamp, lift_se3(p.pose, 1.0)});
    }
    out.push_back(std::move(track));
  }
  return out;
}

ModeMetrics evaluate(FusionMode mode,
                     const std::vector<std::vector<TimedSim3>>& estimates,
                     const std::vector<std::vector<TimedSim3>>& truth,
                     const std::vector<AgentId>& agent_ids) {
  if (estimates.size() != truth.size() || truth.size() != agent_ids.size()) {
    throw Error(ErrorCode::kTimestampMismatch,
                "estimate and truth cover different agents");
  }
  ModeMetrics out;
  out.mode = mode;
  double sum_sq = 0.0;
  std::size_t count = 0;
  std::vector<double> all_scale;
  for (std::size_t a = 0; a < truth.size(); ++a) {
    AgentMetrics m;
    m.agent = agent_ids[a];
    m.position_errors = position_errors(estimates[a], truth[a]);
    m.scale_errors = scale_error_series(estimates[a], truth[a]);
    for (const TimedSim3& p : truth[a]) m.timestamps.push_back(p.timestamp);
    double agent_sq = 0.0;
    for (double e : m.position_errors) agent_sq += e * e;
    if (!m.position_errors.empty()) {
      m.ate_rmse = std::sqrt(agent_sq / static_cast<double>(m.position_errors.size()));
    }
    m.median_scale_error = median(m.scale_errors);
    sum_sq += agent_sq;
    count += m.position_errors.size();
    all_scale.insert(all_scale.end(), m.scale_errors.begin(), m.scale_errors.end());
    out.agents.push_back(std::move(m));
  }
  out.ate_rmse = count > 0 ? std::sqrt(sum_sq / static_cast<double>(count)) : 0.0;
  out.median_scale_error = median(all_scale);
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config,
                                bool write_outputs) {
  check_config(config);
  const SwarmScenario scenario = build_scenario(config);
  const auto truth = truth_trajectories(scenario);
  const std::vector<AgentId> ids = agent_ids(scenario);

  ExperimentReport report;
  report.seeds.resize(config.seeds.size());
  std::vector<std::exception_ptr> failures(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        SeedResult& r = report.seeds[i];
        r.seed = config.seeds[i];
        const Simulation sim = simulate(config, scenario, r.seed);
        const std::vector<WireMessage> stream = message_stream(sim);
        for (FusionMode mode : config.modes) {
          r.fusion.push_back(fuse(config, stream, sim.priors, mode, r.seed));
          r.metrics.push_back(evaluate(mode, r.fusion.back().estimates, truth, ids));
        }
        r.accounting = account(stream, config.baselines);
        r.availability = availability_stats(scenario, sim.ranges);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  unsigned workers = config.workers > 0 ? static_cast<unsigned>(config.workers)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(config.seeds.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  for (FusionMode mode : config.modes) {
    std::vector<double> ate;
    std::vector<double> scale;
    for (const SeedResult& r : report.seeds) {
      for (const ModeMetrics& m : r.metrics) {
        if (m.mode == mode) {
          ate.push_back(m.ate_rmse);
          scale.push_back(m.median_scale_error);
        }
      }
    }
    report.median_ate[mode] = median(ate);
    report.median_scale_error[mode] = median(scale);
  }

  if (!write_outputs) return report;

  const std::filesystem::path& out = config.output_dir;
  std::filesystem::create_directories(out);
  write_file_atomic(out / "resolved_config.json", to_json(config));
  write_file_atomic(out / "metrics.json", metrics_json(config, report));
  write_file_atomic(out / "availability.csv",
                    availability_csv(report.seeds.front().availability));
  write_file_atomic(out / "accounting.csv",
                    accounting_csv(report.seeds.front().accounting));
  std::ostringstream summary;
  summary << "seed,mode,agent,ate_rmse_m,median_scale_error\n"
          << std::setprecision(17);
  for (const SeedResult& r : report.seeds) {
    const std::filesystem::path seed_dir = out / ("seed_" + std::to_string(r.seed));
    for (std::size_t a = 0; a < truth.size(); ++a) {
      std::ostringstream tum;
      write_tum(tum, truth[a]);
      write_file_atomic(seed_dir / ("truth_agent_" + std::to_string(ids[a]) + ".tum"),
                        tum.str());
    }
    std::vector<PlotSeries> plots;
    for (std::size_t m = 0; m < r.fusion.size(); ++m) {
      const FusionResult& f = r.fusion[m];
      const std::filesystem::path mode_dir = seed_dir / std::string(to_string(f.mode));
      write_estimates(mode_dir, f.estimates, ids);
      write_file_atomic(mode_dir / "series.csv", series_csv(r.metrics[m]));
      plots.push_back({std::string(mode_color(f.mode)), f.estimates});
      for (const AgentMetrics& am : r.metrics[m].agents) {
        summary << r.seed << ',' << to_string(f.mode) << ',' << am.agent << ','
                << am.ate_rmse << ',' << am.median_scale_error << '\n';
      }
    }
    write_file_atomic(seed_dir / "trajectories.svg", trajectory_svg(truth, plots));
  }
  write_file_atomic(out / "summary.csv", summary.str());
  return report;
}

// ---------------------------------------------------------------------------
// Artifacts

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError,
                "cannot rename " + tmp.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string metrics_json(const ExperimentConfig& config,
                         const ExperimentReport& report) {
  json seeds = json::array();
  for (const SeedResult& r : report.seeds) {
    json modes = json::object();
    for (std::size_t m = 0; m < r.metrics.size(); ++m) {
      const ModeMetrics& mm = r.metrics[m];
      json agents = json::array();
      for (const AgentMetrics& a : mm.agents) {
        agents.push_back({{"agent", a.agent},
                          {"ate_rmse_m", a.ate_rmse},
                          {"median_scale_error", a.median_scale_error}});
      }
      modes[std::string(to_string(mm.mode))] = {
          {"ate_rmse_m", mm.ate_rmse},
          {"median_scale_error", mm.median_scale_error},
          {"agents", agents},
          {"dangling_ranges", r.fusion[m].dangling_ranges},
          {"max_range_time_gap_s", r.fusion[m].max_range_time_gap},
          {"solver", solver_json(r.fusion[m].solver)}};
    }
    seeds.push_back(
        {{"seed", r.seed},
         {"modes", modes},
         {"availability", availability_json(r.availability)},
         {"accounting",
          {{"keyframes", r.accounting.total.keyframes},
           {"range_messages", r.accounting.total.range_messages},
           {"covor_bytes", r.accounting.total.covor_bytes},
           {"ccm_slam_lb_bytes", r.accounting.total.ccm_slam_lb_bytes},
           {"ccm_slam_ub_bytes", r.accounting.total.ccm_slam_ub_bytes},
           {"dslam_bytes", r.accounting.total.dslam_bytes},
           {"covor_to_dslam_ratio", r.accounting.covor_to_dslam},
           {"note", "accounting identity under the configured baseline constants"}}}});
  }
  json medians = json::object();
  for (const auto& [mode, v] : report.median_ate) {
    medians[std::string(to_string(mode))] = {
        {"median_ate_rmse_m", v},
        {"median_scale_error", report.median_scale_error.at(mode)}};
  }
  const json root{{"schema_version", ExperimentConfig::kSchemaVersion},
                  {"agents", config.agents},
                  {"seeds", seeds},
                  {"summary", medians}};
  return root.dump(2) + "\n";
}

std::string series_csv(const ModeMetrics& metrics) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "agent,timestamp,position_error_m,scale_error\n";
  for (const AgentMetrics& a : metrics.agents) {
    for (std::size_t k = 0; k < a.timestamps.size(); ++k) {
      out << a.agent << ',' << a.timestamps[k] << ',' << a.position_errors[k] << ','
          << a.scale_errors[k] << '\n';
    }
  }
  return out.str();
}

std::string availability_csv(const std::vector<AvailabilityRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "agent,anchor_percent,peers_ge1_percent,peers_ge2_percent,"
         "peers_ge3_percent,peers_eq0_percent,peers_eq1_percent,"
         "peers_eq2_percent,peers_eq3_percent\n";
  for (const AvailabilityRow& r : rows) {
    out << r.agent << ',' << r.anchor;
    for (double v : r.peers) out << ',' << v;
    for (double v : r.exact_peers) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

std::string accounting_csv(const AccountingReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "keyframes,range_messages,covor_bytes,ccm_slam_lb_bytes,"
         "ccm_slam_ub_bytes,dslam_bytes\n";
  for (const AccountingRow& r : report.series) {
    out << r.keyframes << ',' << r.range_messages << ',' << r.covor_bytes << ','
        << r.ccm_slam_lb_bytes << ',' << r.ccm_slam_ub_bytes << ','
        << r.dslam_bytes << '\n';
  }
  return out.str();
}

std::string_view mode_color(FusionMode mode) {
  switch (mode) {
    case FusionMode::kVoOnly:
      return "#ff8c00";
    case FusionMode::kVoInter:
      return "#2ca02c";
    case FusionMode::kVoInterAnchor:
      return "#d62728";
  }
  return "#000000";
}

std::string trajectory_svg(const std::vector<std::vector<TimedSim3>>& truth,
                           const std::vector<PlotSeries>& series) {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  auto extend = [&](const std::vector<std::vector<TimedSim3>>& agents) {
    for (const auto& track : agents) {
      for (const TimedSim3& p : track) {
        const Vec3 q = p.pose.position();
        min_x = std::min(min_x, q.x());
        max_x = std::max(max_x, q.x());
        min_y = std::min(min_y, q.y());
        max_y = std::max(max_y, q.y());
      }
    }
  };
  extend(truth);
  for (const PlotSeries& s : series) extend(s.agents);
  if (!std::isfinite(min_x)) {
    min_x = min_y = 0.0;
    max_x = max_y = 1.0;
  }
  const double size = 800.0;
  const double margin = 20.0;
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-9});
  const double k = (size - 2.0 * margin) / span;
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
      << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << ' ' << size
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto polyline = [&](const std::vector<TimedSim3>& track, std::string_view color,
                      double width) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
        << width << "\" points=\"";
    for (const TimedSim3& p : track) {
      const Vec3 q = p.pose.position();
      out << margin + (q.x() - min_x) * k << ','
          << size - margin - (q.y() - min_y) * k << ' ';
    }
    out << "\"/>\n";
  };
  for (const auto& track : truth) polyline(track, "#808080", 3.0);
  for (const PlotSeries& s : series) {
    for (const auto& track : s.agents) polyline(track, s.color, 1.5);
  }
  out << "</svg>\n";
  return out.str();
}

void write_estimates(const std::filesystem::path& dir,
                     const std::vector<std::vector<TimedSim3>>& estimates,
                     const std::vector<AgentId>& agent_ids) {
  std::ostringstream scales;
  scales << std::setprecision(17) << "agent,timestamp,scale\n";
  for (std::size_t a = 0; a < estimates.size(); ++a) {
    std::ostringstream tum;
    write_tum(tum, estimates[a]);
    write_file_atomic(dir / ("agent_" + std::to_string(agent_ids[a]) + ".tum"),
                      tum.str());
    for (const TimedSim3& p : estimates[a]) {
      scales << agent_ids[a] << ',' << p.timestamp << ',' << p.pose.scale() << '\n';
    }
  }
  write_file_atomic(dir / "scales.csv", scales.str());
}

std::vector<std::vector<TimedSim3>> read_estimates(
    const std::filesystem::path& dir, const std::vector<AgentId>& agent_ids) {
  std::map<AgentId, std::vector<double>> scales;
  {
    std::istringstream in(read_file(dir / "scales.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string agent, t, s;
      if (!std::getline(row, agent, ',') || !std::getline(row, t, ',') ||
          !std::getline(row, s, ',')) {
        throw Error(ErrorCode::kParseError, "bad scales.csv line: " + line);
      }
      try {
        scales[static_cast<AgentId>(std::stoul(agent))].push_back(std::stod(s));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParseError, "bad scales.csv line: " + line);
      }
    }
  }
  std::vector<std::vector<TimedSim3>> out;
  for (AgentId id : agent_ids) {
    const Trajectory t = load_trajectory(dir / ("agent_" + std::to_string(id) + ".tum"),
                                         TrajectoryFormat::kTum);
    const auto& s = scales[id];
    if (s.size() != t.size()) {
      throw Error(ErrorCode::kTimestampMismatch,
                  "scales.csv does not match agent " + std::to_string(id));
    }
    std::vector<TimedSim3> track;
    for (std::size_t k = 0; k < t.size(); ++k) {
      // TUM stores the position s t; recover t for the pose triple.
      track.push_back({t[k].timestamp,
                       Sim3Pose(t[k].pose.rotation, t[k].pose.translation / s[k], s[k])});
    }
    out.push_back(std::move(track));
  }
  return out;
}

}  // namespace rangefuse
