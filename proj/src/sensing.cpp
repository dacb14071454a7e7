#include "dcada/sensing.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace dcada {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

SensorSuite suite(bool lidar, double range, int rays, bool rgb, bool depth, double fov) {
  SensorSuite s;
  s.has_lidar = lidar;
  s.lidar_range = range;
  s.lidar_rays = rays;
  s.has_rgb = rgb;
  s.has_depth = depth;
  s.camera_fov_deg = fov;
  return s;
}

}  // namespace

void SensorSuite::validate() const {
  if (has_lidar && (!(lidar_range > 0.0) || lidar_rays < 1))
    throw std::invalid_argument("lidar suite needs range > 0 and at least one ray");
  if (!(camera_fov_deg > 0.0) || camera_fov_deg > 360.0)
    throw std::invalid_argument("camera_fov must lie in (0, 360]");
}

std::string_view to_string(HeteroLevel level) {
  switch (level) {
    case HeteroLevel::H0:
      return "H0";
    case HeteroLevel::H1:
      return "H1";
    case HeteroLevel::H2:
      return "H2";
    case HeteroLevel::H3:
      return "H3";
  }
  return "?";
}

HeteroLevel parse_hetero_level(std::string_view name) {
  if (name == "H0") return HeteroLevel::H0;
  if (name == "H1") return HeteroLevel::H1;
  if (name == "H2") return HeteroLevel::H2;
  if (name == "H3") return HeteroLevel::H3;
  throw std::invalid_argument("invalid heterogeneity level '" + std::string(name) +
                              "' (expected H0, H1, H2 or H3)");
}

HeterogeneityLevel builtin_level(HeteroLevel level) {
  HeterogeneityLevel h;
  h.level = level;
  switch (level) {
    case HeteroLevel::H0:
      h.suites.fill(suite(true, 5.0, 16, true, true, 60.0));
      break;
    case HeteroLevel::H1:
      h.suites = {suite(true, 4.0, 16, true, true, 50.0), suite(true, 5.0, 16, false, true, 60.0),
                  suite(true, 6.0, 16, true, true, 70.0), suite(true, 4.0, 16, false, true, 80.0)};
      break;
    case HeteroLevel::H2:
      h.suites = {suite(true, 6.0, 16, true, false, 60.0), suite(true, 4.0, 24, false, true, 60.0),
                  suite(false, 0.0, 0, true, true, 60.0), suite(true, 5.0, 16, true, true, 60.0)};
      break;
    case HeteroLevel::H3:
      h.suites = {suite(true, 8.0, 32, false, false, 60.0), suite(false, 0.0, 0, true, false, 60.0),
                  suite(false, 0.0, 0, false, true, 60.0), suite(true, 3.0, 8, true, true, 60.0)};
      break;
  }
  return h;
}

Eigen::VectorXd ObservationLayout::neutral() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim());
  v.segment(lidar_offset(), kLidarSegment).setConstant(kNeutralDistance);
  v.segment(rgb_offset(), kRgbSegment).setConstant(kNeutralRgb);
  v.segment(depth_offset(), kDepthSegment).setConstant(kNeutralDistance);
  return v;
}

double camera_heading(const RobotState& robot) {
  if (robot.velocity.norm() < 1e-6) return 0.0;
  return std::atan2(robot.velocity.y, robot.velocity.x);
}

std::vector<double> lidar_scan(const RobotState& robot, const SensorSuite& suite,
                               const Arena& arena, std::span<const Circle> targets) {
  if (!suite.has_lidar) throw std::logic_error("lidar_scan called on a robot without LiDAR");
  std::vector<double> out(static_cast<std::size_t>(suite.lidar_rays));
  for (int j = 0; j < suite.lidar_rays; ++j) {
    const double angle = kTwoPi * j / suite.lidar_rays;
    const double dist = ray_cast(robot.position, angle, suite.lidar_range, arena, targets);
    out[static_cast<std::size_t>(j)] = std::clamp(dist / suite.lidar_range, 0.0, 1.0);
  }
  return out;
}

std::vector<double> resample_lidar(std::span<const double> native, int target_len) {
  if (native.empty()) throw std::invalid_argument("resample_lidar needs at least one sample");
  if (target_len < 1) throw std::invalid_argument("resample_lidar target length must be positive");
  const auto m = static_cast<int>(native.size());
  if (m == target_len) return {native.begin(), native.end()};

  std::vector<double> out(static_cast<std::size_t>(target_len));
  for (int k = 0; k < target_len; ++k) {
    // Exact rational position k*m/target_len in native index units.
    const long num = static_cast<long>(k) * m;
    const int lo = static_cast<int>(num / target_len);
    const long rem = num % target_len;
    const double frac = static_cast<double>(rem) / target_len;
    const double a = native[static_cast<std::size_t>(lo % m)];
    const double b = native[static_cast<std::size_t>((lo + 1) % m)];
    out[static_cast<std::size_t>(k)] = rem == 0 ? a : a + (b - a) * frac;
  }
  return out;
}

std::array<double, kRgbSegment> rgb_features(const RobotState& robot, const SensorSuite& suite,
                                             std::span<const Circle> targets,
                                             const SensingParams& params) {
  if (!suite.has_rgb) throw std::logic_error("rgb_features called on a robot without RGB");
  const double heading = camera_heading(robot);
  const double half_fov = 0.5 * deg_to_rad(suite.camera_fov_deg);

  struct Seen {
    double dist;
    double bearing;
  };
  std::vector<Seen> seen;
  for (const auto& t : targets) {
    const Vec2 rel = t.center - robot.position;
    const double dist = rel.norm();
    if (dist > params.rgb_range) continue;
    const double bearing = dist > 0.0 ? wrap_angle(std::atan2(rel.y, rel.x) - heading) : 0.0;
    if (suite.camera_fov_deg < 360.0 && std::abs(bearing) > half_fov) continue;
    seen.push_back({dist, bearing});
  }
  std::stable_sort(seen.begin(), seen.end(),
                   [](const Seen& a, const Seen& b) { return a.dist < b.dist; });

  std::array<double, kRgbSegment> out{};
  const auto slots = std::min<std::size_t>(seen.size(), kRgbSlots);
  for (std::size_t s = 0; s < slots; ++s) {
    out[4 * s + 0] = 1.0;
    out[4 * s + 1] = seen[s].dist / params.rgb_range;
    out[4 * s + 2] = std::sin(seen[s].bearing);
    out[4 * s + 3] = std::cos(seen[s].bearing);
  }
  return out;
}

std::array<double, kDepthSegment> depth_sweep(const RobotState& robot, const SensorSuite& suite,
                                              const Arena& arena, const SensingParams& params) {
  if (!suite.has_depth) throw std::logic_error("depth_sweep called on a robot without depth");
  const double heading = camera_heading(robot);
  const double fov = deg_to_rad(suite.camera_fov_deg);
  std::array<double, kDepthSegment> out{};
  for (int j = 0; j < kDepthSegment; ++j) {
    const double angle = heading - 0.5 * fov + fov * j / (kDepthSegment - 1);
    const double dist = ray_cast(robot.position, angle, params.depth_range, arena);
    out[static_cast<std::size_t>(j)] = std::clamp(dist / params.depth_range, 0.0, 1.0);
  }
  return out;
}

Observation assemble_observation(const RobotState& robot, const SensorSuite& suite,
                                 std::span<const double> extras, const SensingScene& scene,
                                 const ObservationLayout& layout) {
  if (static_cast<int>(extras.size()) != layout.extra_k)
    throw std::invalid_argument("extras length " + std::to_string(extras.size()) +
                                " does not match layout extra_k " +
                                std::to_string(layout.extra_k));
  Observation obs{layout.neutral(), layout};
  auto& v = obs.values;
  const Arena& arena = *scene.arena;
  v[0] = robot.position.x / arena.width;
  v[1] = robot.position.y / arena.height;
  v[2] = robot.velocity.x;
  v[3] = robot.velocity.y;
  for (int i = 0; i < layout.extra_k; ++i) v[layout.extra_offset() + i] = extras[static_cast<std::size_t>(i)];

  if (suite.has_lidar) {
    const auto native = lidar_scan(robot, suite, arena, scene.lidar_targets);
    const auto lidar = resample_lidar(native, kLidarSegment);
    for (int i = 0; i < kLidarSegment; ++i) v[layout.lidar_offset() + i] = lidar[static_cast<std::size_t>(i)];
  }
  if (suite.has_rgb) {
    const auto rgb = rgb_features(robot, suite, scene.rgb_targets, scene.params);
    for (int i = 0; i < kRgbSegment; ++i) v[layout.rgb_offset() + i] = rgb[static_cast<std::size_t>(i)];
  }
  if (suite.has_depth) {
    const auto depth = depth_sweep(robot, suite, arena, scene.params);
    for (int i = 0; i < kDepthSegment; ++i) v[layout.depth_offset() + i] = depth[static_cast<std::size_t>(i)];
  }
  return obs;
}

}  // namespace dcada
