#include "dcada/tasks.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace dcada {
namespace {

constexpr std::array<std::pair<int, int>, 6> kPairs{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

bool overlaps_any(Vec2 p, double clearance, const std::vector<Circle>& circles) {
  return std::any_of(circles.begin(), circles.end(), [&](const Circle& c) {
    return distance(p, c.center) < c.radius + clearance;
  });
}

std::array<Vec2, kNumRobots> quadrant_centers(double w, double h) {
  return {Vec2{0.25 * w, 0.25 * h}, Vec2{0.75 * w, 0.25 * h}, Vec2{0.25 * w, 0.75 * h},
          Vec2{0.75 * w, 0.75 * h}};
}

[[noreturn]] void placement_failure(const char* what) {
  throw std::runtime_error(std::string("placement failed for ") + what +
                           " after bounded retries (check env constants)");
}

/// Random circles kept clear of the spawn quadrant centers.
void place_random_obstacles(EpisodeState& s, Rng& rng, int count, double rmin, double rmax,
                            const EnvConstants& c, double robot_radius) {
  const auto spawns = quadrant_centers(s.arena.width, s.arena.height);
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < c.max_placement_retries && !placed; ++attempt) {
      const double r = rng.uniform(rmin, rmax);
      const Vec2 p{rng.uniform(r, s.arena.width - r), rng.uniform(r, s.arena.height - r)};
      const bool near_spawn = std::any_of(spawns.begin(), spawns.end(), [&](Vec2 q) {
        return distance(p, q) < r + robot_radius + 1.0;
      });
      if (near_spawn) continue;
      s.arena.obstacles.push_back({p, r});
      placed = true;
    }
    if (!placed) placement_failure("obstacles");
  }
}

void place_robots(EpisodeState& s, Rng& rng, const EnvConstants& c, double robot_radius) {
  const auto spawns = quadrant_centers(s.arena.width, s.arena.height);
  for (int i = 0; i < kNumRobots; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < c.max_placement_retries && !placed; ++attempt) {
      const Vec2 p{spawns[i].x + rng.uniform(-c.spawn_jitter, c.spawn_jitter),
                   spawns[i].y + rng.uniform(-c.spawn_jitter, c.spawn_jitter)};
      if (p.x < 0.0 || p.x > s.arena.width || p.y < 0.0 || p.y > s.arena.height) continue;
      if (overlaps_any(p, robot_radius, s.arena.obstacles)) continue;
      s.robots[static_cast<std::size_t>(i)] = RobotState{p, {0.0, 0.0}, robot_radius};
      placed = true;
    }
    if (!placed) placement_failure("robots");
  }
}

/// Free-space point reachable by a robot disk, away from given circles.
Vec2 sample_free_point(const EpisodeState& s, Rng& rng, const EnvConstants& c,
                       double robot_radius, const std::vector<Circle>& keep_out,
                       const char* what) {
  constexpr double kMargin = 0.5;
  for (int attempt = 0; attempt < c.max_placement_retries; ++attempt) {
    const Vec2 p{rng.uniform(kMargin, s.arena.width - kMargin),
                 rng.uniform(kMargin, s.arena.height - kMargin)};
    if (overlaps_any(p, robot_radius + 0.1, s.arena.obstacles)) continue;
    if (overlaps_any(p, 0.0, keep_out)) continue;
    return p;
  }
  placement_failure(what);
}

void init_grid(EpisodeState& s, int nx, int ny) {
  s.grid_nx = nx;
  s.grid_ny = ny;
  s.cell_w = s.arena.width / nx;
  s.cell_h = s.arena.height / ny;
  s.explored.assign(static_cast<std::size_t>(nx * ny), 0);
  s.explored_count = 0;
  s.coverage = 0.0;
}

/// Marks cells whose centers lie within radius of p (and the cell holding p
/// when include_own_cell). Returns the number of newly explored cells.
int mark_cells(EpisodeState& s, Vec2 p, double radius, bool include_own_cell) {
  int added = 0;
  auto mark = [&](int ix, int iy) {
    auto& cell = s.explored[static_cast<std::size_t>(iy * s.grid_nx + ix)];
    if (!cell) {
      cell = 1;
      ++added;
    }
  };
  const int x0 = std::max(0, static_cast<int>(std::floor((p.x - radius) / s.cell_w)));
  const int x1 = std::min(s.grid_nx - 1, static_cast<int>(std::floor((p.x + radius) / s.cell_w)));
  const int y0 = std::max(0, static_cast<int>(std::floor((p.y - radius) / s.cell_h)));
  const int y1 = std::min(s.grid_ny - 1, static_cast<int>(std::floor((p.y + radius) / s.cell_h)));
  for (int iy = y0; iy <= y1; ++iy)
    for (int ix = x0; ix <= x1; ++ix) {
      const Vec2 center{(ix + 0.5) * s.cell_w, (iy + 0.5) * s.cell_h};
      if (distance(center, p) <= radius) mark(ix, iy);
    }
  if (include_own_cell) {
    const int ix = std::clamp(static_cast<int>(p.x / s.cell_w), 0, s.grid_nx - 1);
    const int iy = std::clamp(static_cast<int>(p.y / s.cell_h), 0, s.grid_ny - 1);
    mark(ix, iy);
  }
  s.explored_count += added;
  s.coverage = static_cast<double>(s.explored_count) / static_cast<double>(s.explored.size());
  return added;
}

/// Moves robots, carries packages and counts new proximity events.
int advance_kinematics(const EnvSpec& spec, EpisodeState& s, std::span<const Vec2> actions) {
  if (actions.size() != static_cast<std::size_t>(kNumRobots))
    throw std::invalid_argument("joint action must hold one action per robot");
  if (s.done) throw std::logic_error("step called on a finished episode");
  for (int i = 0; i < kNumRobots; ++i) {
    auto& robot = s.robots[static_cast<std::size_t>(i)];
    robot = integrate(robot, actions[static_cast<std::size_t>(i)], s.arena, spec.world).new_state;
    if (const int pkg = s.carrying[static_cast<std::size_t>(i)]; pkg >= 0)
      s.packages[static_cast<std::size_t>(pkg)].position = robot.position;
  }
  ++s.t;

  int new_events = 0;
  for (std::size_t k = 0; k < kPairs.size(); ++k) {
    const auto [a, b] = kPairs[k];
    const bool close = distance(s.robots[static_cast<std::size_t>(a)].position,
                                s.robots[static_cast<std::size_t>(b)].position) <
                       spec.world.collision_threshold;
    if (close && !s.in_proximity[k]) ++new_events;
    s.in_proximity[k] = close;
  }
  s.counters.collisions += new_events;
  return new_events;
}

void finish(EpisodeState& s, StepResult& r, bool success) {
  s.success = success;
  s.done = success || s.t >= s.horizon;
  r.success = s.success;
  r.done = s.done;
  r.progress = progress(s);
}

}  // namespace

std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::warehouse:
      return "warehouse";
    case EnvKind::search_rescue:
      return "search_rescue";
    case EnvKind::mapping:
      return "mapping";
  }
  return "?";
}

EnvKind parse_env_kind(std::string_view name) {
  if (name == "warehouse") return EnvKind::warehouse;
  if (name == "search_rescue") return EnvKind::search_rescue;
  if (name == "mapping") return EnvKind::mapping;
  throw std::invalid_argument("invalid environment '" + std::string(name) +
                              "' (expected warehouse, search_rescue or mapping)");
}

EnvSpec make_env_spec(EnvKind kind, const EnvConstants& constants) {
  EnvSpec spec;
  spec.kind = kind;
  spec.constants = constants;
  switch (kind) {
    case EnvKind::warehouse:
      spec.width = spec.height = 20.0;
      spec.extras_k = 5;
      spec.success_threshold = 2.0;
      break;
    case EnvKind::search_rescue:
      spec.width = spec.height = 30.0;
      spec.extras_k = 3;
      spec.success_threshold = 2.0;
      break;
    case EnvKind::mapping:
      spec.width = spec.height = 20.0;
      spec.extras_k = 2;
      spec.success_threshold = 0.75;
      break;
  }
  return spec;
}

EpisodeState reset(const EnvSpec& spec, EpisodeSeed seed) {
  const auto& c = spec.constants;
  const double rr = spec.world.robot_radius;
  EpisodeState s;
  s.kind = spec.kind;
  s.horizon = spec.horizon;
  s.arena.width = spec.width;
  s.arena.height = spec.height;
  Rng rng = spawn_stream(seed, StreamPurpose::env);

  switch (spec.kind) {
    case EnvKind::warehouse: {
      for (double fy : {0.35, 0.65})
        for (double fx : {0.3, 0.5, 0.7})
          s.arena.obstacles.push_back({{fx * spec.width, fy * spec.height}, c.shelf_radius});
      s.drop_zones = {{1.0, 0.5 * spec.height}, {spec.width - 1.0, 0.5 * spec.height}};
      place_robots(s, rng, c, rr);
      std::vector<Circle> keep_out;
      for (auto z : s.drop_zones) keep_out.push_back({z, c.drop_radius + 1.0});
      for (const auto& r : s.robots) keep_out.push_back({r.position, c.pickup_radius + 0.5});
      for (int k = 0; k < c.num_packages; ++k) {
        const Vec2 p = sample_free_point(s, rng, c, rr, keep_out, "packages");
        s.packages.push_back({p});
        keep_out.push_back({p, 2.0 * c.package_radius});
      }
      break;
    }
    case EnvKind::search_rescue: {
      place_random_obstacles(s, rng, c.num_debris, c.debris_radius_min, c.debris_radius_max, c, rr);
      place_robots(s, rng, c, rr);
      std::vector<Circle> keep_out;
      for (const auto& r : s.robots) keep_out.push_back({r.position, c.detection_radius + 0.5});
      for (int k = 0; k < c.num_victims; ++k) {
        const Vec2 p = sample_free_point(s, rng, c, rr, keep_out, "victims");
        s.victims.push_back({p});
        keep_out.push_back({p, 2.0 * c.victim_radius});
      }
      init_grid(s, c.coverage_cells, c.coverage_cells);
      break;
    }
    case EnvKind::mapping: {
      place_random_obstacles(s, rng, c.num_map_obstacles, c.map_obstacle_radius_min,
                             c.map_obstacle_radius_max, c, rr);
      place_robots(s, rng, c, rr);
      const int nx = static_cast<int>(std::lround(spec.width / c.grid_resolution));
      const int ny = static_cast<int>(std::lround(spec.height / c.grid_resolution));
      init_grid(s, nx, ny);
      break;
    }
  }
  for (std::size_t k = 0; k < kPairs.size(); ++k)
    s.in_proximity[k] = distance(s.robots[static_cast<std::size_t>(kPairs[k].first)].position,
                                 s.robots[static_cast<std::size_t>(kPairs[k].second)].position) <
                        spec.world.collision_threshold;
  s.env_rng = rng;
  return s;
}

double warehouse_target_distance(const EpisodeState& s, int robot) {
  constexpr double kNoTarget = 20.0;
  const Vec2 p = s.robots[static_cast<std::size_t>(robot)].position;
  double best = std::numeric_limits<double>::infinity();
  if (s.carrying[static_cast<std::size_t>(robot)] >= 0) {
    for (auto z : s.drop_zones) best = std::min(best, distance(p, z));
  } else {
    for (const auto& pkg : s.packages)
      if (pkg.on_floor()) best = std::min(best, distance(p, pkg.position));
  }
  return std::isfinite(best) ? best : kNoTarget;
}

StepResult step_warehouse(const EnvSpec& spec, EpisodeState& s, std::span<const Vec2> actions) {
  const auto& c = spec.constants;
  const int new_collisions = advance_kinematics(spec, s, actions);
  int new_deliveries = 0;
  int new_pickups = 0;
  for (int i = 0; i < kNumRobots; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Vec2 p = s.robots[ui].position;
    if (const int pkg = s.carrying[ui]; pkg >= 0) {
      const bool at_zone = std::any_of(s.drop_zones.begin(), s.drop_zones.end(),
                                       [&](Vec2 z) { return distance(p, z) <= c.drop_radius; });
      if (at_zone) {
        s.packages[static_cast<std::size_t>(pkg)].delivered = true;
        s.packages[static_cast<std::size_t>(pkg)].carrier = -1;
        s.carrying[ui] = -1;
        ++new_deliveries;
      }
    } else {
      int nearest = -1;
      double best = c.pickup_radius;
      for (std::size_t k = 0; k < s.packages.size(); ++k) {
        if (!s.packages[k].on_floor()) continue;
        const double d = distance(p, s.packages[k].position);
        if (d <= best) {
          best = d;
          nearest = static_cast<int>(k);
        }
      }
      if (nearest >= 0) {
        s.packages[static_cast<std::size_t>(nearest)].carrier = i;
        s.packages[static_cast<std::size_t>(nearest)].position = p;
        s.carrying[ui] = nearest;
        ++new_pickups;
      }
    }
  }
  s.counters.delivered += new_deliveries;
  s.counters.picked_up += new_pickups;

  double shaping = 0.0;
  for (int i = 0; i < kNumRobots; ++i) shaping += 20.0 - warehouse_target_distance(s, i);

  StepResult r;
  r.reward = -0.1 + 100.0 * new_deliveries + 1.0 * new_pickups - 10.0 * new_collisions +
             0.01 * shaping;
  finish(s, r, s.counters.delivered >= 2);
  return r;
}

StepResult step_search_rescue(const EnvSpec& spec, EpisodeState& s,
                              std::span<const Vec2> actions) {
  const auto& c = spec.constants;
  advance_kinematics(spec, s, actions);
  for (const auto& robot : s.robots) mark_cells(s, robot.position, c.mark_radius, true);

  int new_found = 0;
  int new_rescued = 0;
  double health_bonus = 0.0;
  for (auto& v : s.victims) {
    if (v.rescued) continue;
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& robot : s.robots) nearest = std::min(nearest, distance(robot.position, v.position));
    if (!v.found && nearest <= c.detection_radius) {
      v.found = true;
      ++new_found;
    }
    if (v.found && nearest <= c.rescue_radius) {
      v.rescued = true;
      ++new_rescued;
      health_bonus += v.health;
    }
  }
  for (auto& v : s.victims)
    if (!v.rescued) v.health = std::max(0.0, v.health - c.health_decay);
  s.counters.found += new_found;
  s.counters.rescued += new_rescued;

  StepResult r;
  r.reward = -0.1 + 5.0 * new_found + 20.0 * new_rescued + 0.1 * health_bonus + 0.5 * s.coverage;
  finish(s, r, s.counters.rescued >= 2);
  return r;
}

StepResult step_mapping(const EnvSpec& spec, EpisodeState& s, std::span<const Vec2> actions) {
  advance_kinematics(spec, s, actions);
  const double before = s.coverage;
  for (const auto& robot : s.robots) mark_cells(s, robot.position, spec.constants.sensing_radius, false);
  const double delta = s.coverage - before;

  StepResult r;
  r.reward = -0.1 + 10.0 * s.coverage + 50.0 * delta + 0.5 * team_spread(s);
  finish(s, r, s.coverage >= spec.success_threshold);
  return r;
}

StepResult step(const EnvSpec& spec, EpisodeState& state, std::span<const Vec2> actions) {
  switch (spec.kind) {
    case EnvKind::warehouse:
      return step_warehouse(spec, state, actions);
    case EnvKind::search_rescue:
      return step_search_rescue(spec, state, actions);
    case EnvKind::mapping:
      return step_mapping(spec, state, actions);
  }
  throw std::logic_error("unknown environment kind");
}

double team_spread(const EpisodeState& s) {
  Vec2 centroid;
  for (const auto& r : s.robots) centroid = centroid + r.position;
  centroid = centroid * (1.0 / kNumRobots);
  double total = 0.0;
  for (const auto& r : s.robots) total += distance(r.position, centroid);
  return total / kNumRobots;
}

std::vector<double> extras(const EpisodeState& s, const EnvSpec& spec) {
  const double time_remaining = static_cast<double>(spec.horizon - s.t) / spec.horizon;
  const auto& k = s.counters;
  switch (spec.kind) {
    case EnvKind::warehouse: {
      const auto remaining = std::count_if(s.packages.begin(), s.packages.end(),
                                           [](const Package& p) { return p.on_floor(); });
      const double total = std::max(1, spec.constants.num_packages);
      return {std::min(1.0, k.delivered / 2.0), std::min(1.0, k.picked_up / total),
              static_cast<double>(remaining) / total, std::min(1.0, k.collisions / 10.0),
              time_remaining};
    }
    case EnvKind::search_rescue:
      return {std::min(1.0, k.found / 2.0), std::min(1.0, k.rescued / 2.0), time_remaining};
    case EnvKind::mapping:
      return {s.coverage, time_remaining};
  }
  return {};
}

double progress(const EpisodeState& s) {
  switch (s.kind) {
    case EnvKind::warehouse:
      return s.counters.delivered / 2.0;
    case EnvKind::search_rescue:
      return s.counters.rescued / 2.0;
    case EnvKind::mapping:
      return s.coverage;
  }
  return 0.0;
}

double terminal_metric(const EpisodeState& s) {
  switch (s.kind) {
    case EnvKind::warehouse:
      return s.counters.delivered;
    case EnvKind::search_rescue:
      return s.counters.rescued;
    case EnvKind::mapping:
      return s.coverage;
  }
  return 0.0;
}

Eigen::MatrixXd observe(const EpisodeState& s, const EnvSpec& spec,
                        const HeterogeneityLevel& level) {
  const auto layout = spec.layout();
  const auto ex = extras(s, spec);

  std::vector<Circle> lidar_targets;
  std::vector<Circle> rgb_targets;
  switch (spec.kind) {
    case EnvKind::warehouse:
      for (const auto& p : s.packages)
        if (p.on_floor()) lidar_targets.push_back({p.position, spec.constants.package_radius});
      rgb_targets = lidar_targets;
      for (auto z : s.drop_zones) rgb_targets.push_back({z, spec.constants.drop_radius});
      break;
    case EnvKind::search_rescue:
      for (const auto& v : s.victims)
        if (!v.rescued) lidar_targets.push_back({v.position, spec.constants.victim_radius});
      rgb_targets = lidar_targets;
      break;
    case EnvKind::mapping:
      break;
  }

  Eigen::MatrixXd out(layout.dim(), kNumRobots);
  std::vector<Circle> teammates;
  for (int i = 0; i < kNumRobots; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    SensingScene scene{&s.arena, lidar_targets, rgb_targets, spec.sensing};
    if (spec.kind == EnvKind::mapping) {
      teammates.clear();
      for (int j = 0; j < kNumRobots; ++j)
        if (j != i) teammates.push_back({s.robots[static_cast<std::size_t>(j)].position, spec.world.robot_radius});
      scene.rgb_targets = teammates;
    }
    out.col(i) = assemble_observation(s.robots[ui], level.suites[ui], ex, scene, layout).values;
  }
  return out;
}

}  // namespace dcada
