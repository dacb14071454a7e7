#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <string_view>
#include <vector>

#include "dcada/checkpoint.hpp"
#include "dcada/seeds.hpp"
#include "dcada/tasks.hpp"

namespace dcada {

enum class PretrainOptimizer { adam, sgd };

std::string_view to_string(PretrainOptimizer opt);
PretrainOptimizer parse_optimizer(std::string_view name);

struct PretrainConfig {
  EnvSpec env = make_env_spec(EnvKind::mapping);
  std::int64_t total_steps = 300'000;
  int rollout_length = 100;
  double lr_policy = 0.05;
  double lr_value = 1e-3;
  double gamma = 0.99;
  double entropy_coef = 0.01;
  double grad_clip = 1.0;
  RunSeed seed{0};
  PretrainOptimizer optimizer = PretrainOptimizer::sgd;
  /// Multiplier on rewards for value targets; <= 0 selects the environment default.
  double reward_scale = 0.0;
  int hidden = nets::kPolicyHidden;
  int value_hidden = nets::kValueHidden;

  void validate() const;
  double effective_reward_scale() const;
  nlohmann::json to_json() const;
};

/// Value-target scale per environment (returns differ by two orders of magnitude).
double default_reward_scale(EnvKind kind);

struct CurvePoint {
  std::int64_t step = 0;
  double mean_return = 0.0;
  int episodes = 0;
};

struct PretrainReport {
  std::vector<CurvePoint> curve;
  std::int64_t episodes = 0;
  std::filesystem::path checkpoint_path;
  nlohmann::json config;
};

struct PretrainResult {
  PolicyCheckpoint checkpoint;
  PretrainReport report;
};

using ProgressCallback = std::function<void(const CurvePoint&)>;

/// On-policy advantage actor-critic under H0. Throws std::runtime_error on a
/// non-finite loss or gradient.
PretrainResult pretrain(const PretrainConfig& config, const ProgressCallback& progress = {});

/// Mean undiscounted team return of deterministic-action episodes with seeds
/// derive_episode_seed(run, 0..episodes-1).
double evaluate_deterministic(const nets::PolicyParams& policy, const EnvSpec& spec,
                              const HeterogeneityLevel& level, RunSeed run, int episodes);

}  // namespace dcada
