#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcada/world.hpp"

namespace dcada {

inline constexpr int kNumRobots = 4;
inline constexpr int kLidarSegment = 16;
inline constexpr int kRgbSegment = 32;
inline constexpr int kDepthSegment = 16;
inline constexpr int kRgbSlots = 8;

inline constexpr double kNeutralRgb = 0.0;
inline constexpr double kNeutralDistance = 1.0;

struct SensorSuite {
  bool has_lidar = true;
  double lidar_range = 5.0;
  int lidar_rays = 16;
  bool has_rgb = true;
  bool has_depth = true;
  double camera_fov_deg = 60.0;

  void validate() const;
  friend bool operator==(const SensorSuite&, const SensorSuite&) = default;
};

enum class HeteroLevel { H0, H1, H2, H3 };

std::string_view to_string(HeteroLevel level);
/// Throws std::invalid_argument naming the offending string.
HeteroLevel parse_hetero_level(std::string_view name);

struct HeterogeneityLevel {
  HeteroLevel level = HeteroLevel::H0;
  std::array<SensorSuite, kNumRobots> suites;
};

/// Built-in per-robot sensing table for H0-H3.
HeterogeneityLevel builtin_level(HeteroLevel level);

struct SensingParams {
  double depth_range = 5.0;
  double rgb_range = 6.0;
};

/// Fixed observation layout [pos(2), vel(2), extra(k), lidar(16), rgb(32), depth(16)].
struct ObservationLayout {
  int extra_k = 0;

  int pos_offset() const { return 0; }
  int vel_offset() const { return 2; }
  int extra_offset() const { return 4; }
  int lidar_offset() const { return 4 + extra_k; }
  int rgb_offset() const { return lidar_offset() + kLidarSegment; }
  int depth_offset() const { return rgb_offset() + kRgbSegment; }
  int dim() const { return depth_offset() + kDepthSegment; }

  /// Neutral value of every feature: 1 on lidar/depth, 0 elsewhere.
  Eigen::VectorXd neutral() const;
};

struct Observation {
  Eigen::VectorXd values;
  ObservationLayout layout;
};

/// Camera reference heading: direction of velocity, +x when nearly stationary.
double camera_heading(const RobotState& robot);

/// Native scan of lidar_rays rays at angles 2*pi*j/rays, normalized by range.
std::vector<double> lidar_scan(const RobotState& robot, const SensorSuite& suite,
                               const Arena& arena, std::span<const Circle> targets);

/// Circular linear interpolation from m native samples at 2*pi*j/m to
/// target_len samples at 2*pi*k/target_len.
std::vector<double> resample_lidar(std::span<const double> native, int target_len = kLidarSegment);

/// Up to eight in-view targets, nearest first, each [1, d/range, sin b, cos b]
/// with b the bearing relative to the camera heading.
std::array<double, kRgbSegment> rgb_features(const RobotState& robot, const SensorSuite& suite,
                                             std::span<const Circle> targets,
                                             const SensingParams& params = {});

/// 16 rays evenly spanning the camera FOV, normalized by depth range.
std::array<double, kDepthSegment> depth_sweep(const RobotState& robot, const SensorSuite& suite,
                                              const Arena& arena,
                                              const SensingParams& params = {});

struct SensingScene {
  const Arena* arena = nullptr;
  std::span<const Circle> lidar_targets;
  std::span<const Circle> rgb_targets;
  SensingParams params;
};

Observation assemble_observation(const RobotState& robot, const SensorSuite& suite,
                                 std::span<const double> extras, const SensingScene& scene,
                                 const ObservationLayout& layout);

}  // namespace dcada
