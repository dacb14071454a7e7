#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dcada/seeds.hpp"
#include "dcada/sensing.hpp"
#include "dcada/world.hpp"

namespace dcada {

enum class EnvKind { warehouse, search_rescue, mapping };

std::string_view to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view name);

/// Tunable task constants. Fields irrelevant to an environment are ignored.
struct EnvConstants {
  double spawn_jitter = 1.5;
  int max_placement_retries = 2000;

  // warehouse
  int num_packages = 4;
  double pickup_radius = 0.5;
  double drop_radius = 1.0;
  double shelf_radius = 1.0;
  double package_radius = 0.2;

  // search and rescue
  int num_victims = 4;
  double detection_radius = 1.0;
  double rescue_radius = 0.5;
  int num_debris = 8;
  double debris_radius_min = 0.5;
  double debris_radius_max = 1.0;
  double health_decay = 0.002;
  int coverage_cells = 10;
  double mark_radius = 1.5;
  double victim_radius = 0.3;

  // mapping
  double grid_resolution = 0.5;
  double sensing_radius = 2.0;
  int num_map_obstacles = 4;
  double map_obstacle_radius_min = 0.5;
  double map_obstacle_radius_max = 1.0;

  friend bool operator==(const EnvConstants&, const EnvConstants&) = default;
};

struct EnvSpec {
  EnvKind kind = EnvKind::mapping;
  double width = 20.0;
  double height = 20.0;
  int horizon = 500;
  int extras_k = 2;
  double success_threshold = 0.75;
  EnvConstants constants;
  WorldParams world;
  SensingParams sensing;

  ObservationLayout layout() const { return ObservationLayout{extras_k}; }
  int obs_dim() const { return layout().dim(); }
};

/// Defaults for one environment (arena size, k, success threshold).
EnvSpec make_env_spec(EnvKind kind, const EnvConstants& constants = {});

struct Package {
  Vec2 position;
  int carrier = -1;
  bool delivered = false;
  bool on_floor() const { return carrier < 0 && !delivered; }
};

struct Victim {
  Vec2 position;
  double health = 1.0;
  bool found = false;
  bool rescued = false;
};

struct Counters {
  int delivered = 0;
  int picked_up = 0;
  int collisions = 0;
  int found = 0;
  int rescued = 0;
  friend bool operator==(const Counters&, const Counters&) = default;
};

struct EpisodeState {
  EnvKind kind = EnvKind::mapping;
  int t = 0;
  int horizon = 500;
  Arena arena;
  std::array<RobotState, kNumRobots> robots{};
  std::array<int, kNumRobots> carrying{-1, -1, -1, -1};
  std::array<bool, kNumRobots*(kNumRobots - 1) / 2> in_proximity{};

  std::vector<Package> packages;
  std::vector<Vec2> drop_zones;
  std::vector<Victim> victims;

  // Exploration grid (mapping grid or the coarse rescue grid), row-major by y.
  int grid_nx = 0;
  int grid_ny = 0;
  double cell_w = 0.0;
  double cell_h = 0.0;
  std::vector<std::uint8_t> explored;
  int explored_count = 0;
  double coverage = 0.0;

  Counters counters;
  bool done = false;
  bool success = false;

  // Environment-side randomness after placement (observation stress draws).
  Rng env_rng{0};
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  bool success = false;
  double progress = 0.0;
};

/// Deterministic in seed; throws std::runtime_error when placement fails.
EpisodeState reset(const EnvSpec& spec, EpisodeSeed seed);

/// Shared kinematics and event bookkeeping, then the task reward.
StepResult step_warehouse(const EnvSpec& spec, EpisodeState& state, std::span<const Vec2> actions);
StepResult step_search_rescue(const EnvSpec& spec, EpisodeState& state,
                              std::span<const Vec2> actions);
StepResult step_mapping(const EnvSpec& spec, EpisodeState& state, std::span<const Vec2> actions);
StepResult step(const EnvSpec& spec, EpisodeState& state, std::span<const Vec2> actions);

/// Team-level features, identical for every robot at one step.
std::vector<double> extras(const EpisodeState& state, const EnvSpec& spec);

/// Progress metric: delivered/2, rescued/2 or coverage.
double progress(const EpisodeState& state);
/// Raw completion variable used for threshold sweeps: delivered, rescued or coverage.
double terminal_metric(const EpisodeState& state);

/// Mean distance of robots to the team centroid.
double team_spread(const EpisodeState& state);

/// Shaping distance for the warehouse reward (nearest package or drop-off).
double warehouse_target_distance(const EpisodeState& state, int robot);

/// Observation of every robot as columns of a d x N matrix.
Eigen::MatrixXd observe(const EpisodeState& state, const EnvSpec& spec,
                        const HeterogeneityLevel& level);

}  // namespace dcada
