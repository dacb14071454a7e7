#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dcada/checkpoint.hpp"
#include "dcada/nets.hpp"
#include "dcada/seeds.hpp"
#include "dcada/stress.hpp"
#include "dcada/tasks.hpp"

namespace dcada {

enum class MethodKind { shared_policy, obs_norm, random_perturb, local_finetune, dc_ada };

std::string_view to_string(MethodKind kind);
MethodKind parse_method_kind(std::string_view name);

struct DcAdaConfig {
  int K = 3;
  int M = 8;
  double sigma = 0.05;
  double alpha = 1.0;
  double tau = 0.0;
  double tc_fraction = 0.25;
  bool crn = true;
  bool always_accept_best = false;
  int seeds_per_decision = 1;

  void validate() const;
};

struct RandomPerturbConfig {
  int K = 3;
  double sigma = 0.05;

  void validate() const;
};

struct FinetuneConfig {
  int K = 1;
  double tc_fraction = 0.25;
  double lr = 3e-4;
  double gamma = 0.99;
  double entropy_coef = 0.01;
  double grad_clip = 1.0;
  bool crn = true;

  void validate() const;
};

struct ObsNormConfig {
  double epsilon = 1e-8;
};

struct MethodConfig {
  MethodKind kind = MethodKind::shared_policy;
  DcAdaConfig dc_ada;
  RandomPerturbConfig random_perturb;
  FinetuneConfig local_finetune;
  ObsNormConfig obs_norm;
};

/// Short-rollout horizon round(fraction * T), at least 1.
int candidate_horizon(double tc_fraction, int horizon);

enum class LedgerCategory { nominal, baseline_rollout, candidate_rollout, finetune_rollout };
std::string_view to_string(LedgerCategory c);

/// Joint-step budget shared by nominal episodes and adaptation rollouts.
class BudgetLedger {
 public:
  static constexpr std::int64_t kBytesPerRollout = 8;

  explicit BudgetLedger(std::int64_t budget);

  std::int64_t budget() const { return budget_; }
  std::int64_t used() const { return used_; }
  std::int64_t remaining() const { return budget_ - used_; }
  std::int64_t used_in(LedgerCategory c) const { return by_category_[static_cast<std::size_t>(c)]; }
  std::int64_t rollouts() const { return rollouts_; }
  std::int64_t rollouts_in(LedgerCategory c) const { return rollouts_by_category_[static_cast<std::size_t>(c)]; }
  std::int64_t scalar_feedback_bytes() const { return kBytesPerRollout * rollouts_; }

  /// Throws std::logic_error if the charge would exceed the budget.
  void charge(LedgerCategory c, std::int64_t steps);
  /// One scalar return reported for a finished rollout.
  void record_rollout(LedgerCategory c);

 private:
  std::int64_t budget_;
  std::int64_t used_ = 0;
  std::int64_t rollouts_ = 0;
  std::array<std::int64_t, 4> by_category_{};
  std::array<std::int64_t, 4> rollouts_by_category_{};
};

/// Streaming per-robot mean/variance normalization.
class ObsNormalizer {
 public:
  ObsNormalizer(int dim, double epsilon = 1e-8);
  void reset();
  /// Updates robot's statistics with o, then returns (o - mean) / sqrt(var + eps).
  Eigen::VectorXd transform(int robot, const Eigen::VectorXd& o);
  const Eigen::VectorXd& mean(int robot) const { return mean_[static_cast<std::size_t>(robot)]; }
  /// Population variance.
  Eigen::VectorXd variance(int robot) const;
  std::int64_t count(int robot) const { return count_[static_cast<std::size_t>(robot)]; }

 private:
  int dim_;
  double epsilon_;
  std::array<std::int64_t, kNumRobots> count_{};
  std::array<Eigen::VectorXd, kNumRobots> mean_;
  std::array<Eigen::VectorXd, kNumRobots> m2_;
};

/// Everything a rollout needs besides the per-robot transforms.
struct RolloutContext {
  const EnvSpec* spec = nullptr;
  const HeterogeneityLevel* level = nullptr;
  const FrozenPolicy* policy = nullptr;
  StressSpec stress;
};

/// Per-robot transforms in front of the frozen policy. Empty adapters and a
/// null normalizer mean identity.
struct TransformChain {
  std::span<const nets::AdapterParams> adapters;
  ObsNormalizer* normalizer = nullptr;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& obs) const;
};

struct RolloutResult {
  double ret = 0.0;
  int length = 0;
  bool success = false;
  bool done = false;
  double progress = 0.0;
  double terminal_metric = 0.0;
  /// FNV-1a over the bit patterns of all robot positions at every step.
  std::uint64_t trajectory_digest = 0;
};

/// Deterministic-action rollout from reset(seed) for at most max_steps steps.
RolloutResult rollout(const RolloutContext& ctx, const TransformChain& tf, EpisodeSeed seed,
                      int max_steps);

/// Sampled-action rollout record used by local fine-tuning.
struct SampledRollout {
  RolloutResult result;
  std::vector<Eigen::MatrixXd> raw_obs;  // per step, d x N (after stress)
  std::vector<Eigen::MatrixXd> u;        // per step, 2 x N pre-squash samples
  std::vector<double> rewards;
};

SampledRollout sampled_rollout(const RolloutContext& ctx, std::span<const nets::AdapterParams> adapters,
                               EpisodeSeed seed, int max_steps, Rng& policy_rng);

/// Discounted return-to-go over a finite reward sequence.
std::vector<double> returns_to_go(std::span<const double> rewards, double gamma);

struct AcceptDecision {
  int best_index = -1;
  double best_return = 0.0;
  double improvement = 0.0;
  bool accepted = false;
};

/// Best-of-M selection with strict margin: accept iff best - baseline > tau,
/// or always when always_accept_best. Ties resolve to the lowest index.
AcceptDecision decide_accept(double baseline, std::span<const double> candidate_returns, double tau,
                             bool always_accept_best);

struct EpisodeLog {
  std::int64_t index = 0;
  std::uint64_t seed = 0;
  int length = 0;
  double ret = 0.0;
  bool success = false;
  double progress = 0.0;
  double terminal_metric = 0.0;
  std::uint64_t trajectory_digest = 0;
  /// Cut short by the budget before success or the horizon.
  bool truncated = false;
};

struct AdaptStats {
  int rounds = 0;
  int robot_decisions = 0;
  int accepts = 0;
  int perturbations = 0;
  int finetune_updates = 0;
  int finetune_skipped = 0;
  bool adaptation_stopped = false;
};

/// Per-run method state. The shared policy is referenced, never owned.
class AdaptMethod {
 public:
  AdaptMethod(const MethodConfig& config, int obs_dim);

  MethodKind kind() const { return config_.kind; }
  const MethodConfig& config() const { return config_; }
  std::vector<nets::AdapterParams>& adapters() { return adapters_; }
  const std::vector<nets::AdapterParams>& adapters() const { return adapters_; }
  ObsNormalizer* normalizer() { return config_.kind == MethodKind::obs_norm ? &normalizer_ : nullptr; }
  TransformChain transforms();
  AdaptStats& stats() { return stats_; }
  const AdaptStats& stats() const { return stats_; }

 private:
  MethodConfig config_;
  std::vector<nets::AdapterParams> adapters_;
  ObsNormalizer normalizer_;
  AdaptStats stats_;
};

/// Deterministic-action episode, truncated at the remaining budget.
EpisodeLog run_nominal_episode(AdaptMethod& method, const RolloutContext& ctx, BudgetLedger& ledger,
                               EpisodeSeed seed, std::int64_t index);

struct RoundReport {
  int robots_evaluated = 0;
  bool aborted = false;
  std::vector<AcceptDecision> decisions;
};

/// One accept/reject round over robots 0..N-1. Stops before a robot whose
/// rollouts could exceed the remaining budget and reports aborted.
RoundReport dcada_round(AdaptMethod& method, const RolloutContext& ctx, BudgetLedger& ledger,
                        Rng& round_rng);

/// phi_i += sigma * eps for every robot; no rollouts.
void random_perturb_round(AdaptMethod& method, Rng& round_rng);

/// Surrogate sum_t [log pi(u_t | g_phi(o_t)) G_t + beta H_t] for one robot and
/// its gradient with respect to phi.
double finetune_surrogate(const nets::PolicyParams& policy, const nets::AdapterParams& phi,
                          const Eigen::MatrixXd& obs, const Eigen::MatrixXd& u,
                          std::span<const double> returns, double entropy_coef,
                          Eigen::VectorXd* grad = nullptr);

/// One sampled short rollout and one clipped gradient-ascent step per robot.
/// Returns false (parameters unchanged) when a gradient is non-finite.
bool finetune_episode(AdaptMethod& method, const RolloutContext& ctx, BudgetLedger& ledger,
                      EpisodeSeed seed);

}  // namespace dcada
