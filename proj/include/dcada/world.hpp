#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace dcada {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Circle {
  Vec2 center;
  double radius = 0.0;
};

struct Arena {
  double width = 20.0;
  double height = 20.0;
  std::vector<Circle> obstacles;

  /// Throws std::invalid_argument when a size, radius or placement is invalid.
  void validate() const;
};

struct WorldParams {
  double dt = 0.1;
  double speed_scale = 1.0;
  double robot_radius = 0.3;
  double collision_threshold = 0.5;
};

struct RobotState {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.3;
};

struct StepOutcome {
  RobotState new_state;
  bool obstacle_blocked = false;
};

/// Euler step with obstacle rejection and boundary clipping. Action
/// components are clamped to [-1, 1]. Velocity is the realized displacement
/// divided by dt (zero when blocked).
StepOutcome integrate(const RobotState& state, Vec2 action, const Arena& arena,
                      const WorldParams& params = {});

/// Unordered pairs with center distance strictly below threshold.
int detect_robot_collisions(std::span<const RobotState> states, double threshold);

/// Distance along the ray to the nearest obstacle, extra circle or wall,
/// capped at max_range. An origin inside a circle returns 0.
double ray_cast(Vec2 origin, double angle, double max_range, const Arena& arena,
                std::span<const Circle> extra_circles = {});

/// Ray-circle hit distance (smallest non-negative root), or +inf on a miss.
double ray_circle_distance(Vec2 origin, Vec2 direction, const Circle& circle);

}  // namespace dcada
