#pragma once

#include <Eigen/Core>
#include <array>
#include <deque>
#include <span>
#include <string_view>

#include "dcada/seeds.hpp"
#include "dcada/sensing.hpp"

namespace dcada {

enum class StressKind { clean, gaussian_noise, dropout, delay, combined_mild };

std::string_view to_string(StressKind kind);
StressKind parse_stress_kind(std::string_view name);

/// Observation artifacts applied to the raw assembled observation.
/// combined_mild uses half of noise_sigma, half of dropout_prob and a one-step delay.
struct StressSpec {
  StressKind kind = StressKind::clean;
  double noise_sigma = 0.05;
  double dropout_prob = 0.10;
  int delay_steps = 2;

  void validate() const;
  double effective_sigma() const;
  double effective_dropout() const;
  int effective_delay() const;
};

/// history holds earlier observations of this robot, oldest first, padded with
/// the first observation of the episode. Delay is applied first, then noise,
/// then dropout to the neutral value.
Eigen::VectorXd apply_stress(const StressSpec& spec, const Eigen::VectorXd& o,
                             std::span<const Eigen::VectorXd> history,
                             const Eigen::VectorXd& neutral, Rng& rng);

/// Per-episode stress state for a team: histories and the neutral vector.
class StressProcess {
 public:
  StressProcess(const StressSpec& spec, const ObservationLayout& layout);
  /// Transforms the d x N observation matrix in place for one step.
  void apply(Eigen::MatrixXd& obs, Rng& rng);

 private:
  StressSpec spec_;
  Eigen::VectorXd neutral_;
  std::array<std::deque<Eigen::VectorXd>, kNumRobots> history_;
};

}  // namespace dcada
