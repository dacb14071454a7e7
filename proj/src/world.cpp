#include "dcada/world.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace dcada {

void Arena::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) throw std::invalid_argument("arena size must be positive");
  for (const auto& c : obstacles) {
    if (!(c.radius > 0.0)) throw std::invalid_argument("obstacle radius must be positive");
    if (c.center.x < 0.0 || c.center.x > width || c.center.y < 0.0 || c.center.y > height)
      throw std::invalid_argument("obstacle center outside arena");
  }
}

StepOutcome integrate(const RobotState& state, Vec2 action, const Arena& arena,
                      const WorldParams& params) {
  const Vec2 a{std::clamp(action.x, -1.0, 1.0), std::clamp(action.y, -1.0, 1.0)};
  const Vec2 proposed = state.position + a * (params.speed_scale * params.dt);

  StepOutcome out;
  out.new_state = state;
  for (const auto& obstacle : arena.obstacles) {
    if (distance(proposed, obstacle.center) < obstacle.radius + state.radius) {
      out.obstacle_blocked = true;
      out.new_state.velocity = {0.0, 0.0};
      return out;
    }
  }
  out.new_state.position = {std::clamp(proposed.x, 0.0, arena.width),
                            std::clamp(proposed.y, 0.0, arena.height)};
  out.new_state.velocity = (out.new_state.position - state.position) * (1.0 / params.dt);
  return out;
}

int detect_robot_collisions(std::span<const RobotState> states, double threshold) {
  int count = 0;
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i + 1; j < states.size(); ++j)
      if (distance(states[i].position, states[j].position) < threshold) ++count;
  return count;
}

double ray_circle_distance(Vec2 origin, Vec2 direction, const Circle& circle) {
  const Vec2 oc = origin - circle.center;
  const double c = oc.dot(oc) - circle.radius * circle.radius;
  if (c <= 0.0) return 0.0;
  const double b = oc.dot(direction);
  if (b >= 0.0) return std::numeric_limits<double>::infinity();
  const double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  return -b - std::sqrt(disc);
}

double ray_cast(Vec2 origin, double angle, double max_range, const Arena& arena,
                std::span<const Circle> extra_circles) {
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  double best = max_range;

  // Walls, treating the arena as the box [0, width] x [0, height].
  constexpr double kTiny = 1e-12;
  if (dir.x > kTiny) best = std::min(best, (arena.width - origin.x) / dir.x);
  if (dir.x < -kTiny) best = std::min(best, (0.0 - origin.x) / dir.x);
  if (dir.y > kTiny) best = std::min(best, (arena.height - origin.y) / dir.y);
  if (dir.y < -kTiny) best = std::min(best, (0.0 - origin.y) / dir.y);
  best = std::max(best, 0.0);

  for (const auto& c : arena.obstacles) best = std::min(best, ray_circle_distance(origin, dir, c));
  for (const auto& c : extra_circles) best = std::min(best, ray_circle_distance(origin, dir, c));
  return best;
}

}  // namespace dcada
