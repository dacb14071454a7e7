#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcada/adapt.hpp"
#include "dcada/checkpoint.hpp"
#include "dcada/sensing.hpp"
#include "dcada/stress.hpp"
#include "dcada/tasks.hpp"

namespace dcada {

inline constexpr int kResultsSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr std::int64_t kDeskBudget = 20'000;
inline constexpr std::int64_t kFullBudget = 200'000;

/// Invalid configuration content (unknown keys, bad values, wrong types).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  EnvKind env = EnvKind::mapping;
  HeteroLevel hetero = HeteroLevel::H0;
  MethodConfig method;
  RunSeed seed{0};
  std::int64_t budget = kDeskBudget;
  StressSpec stress;
  std::string checkpoint;
  /// Row name in summaries; defaults to the method name.
  std::string label;
  EnvConstants env_constants;
  /// Replaces the built-in table for the level when present.
  std::optional<std::array<SensorSuite, kNumRobots>> sensor_suites;

  void validate() const;
  std::string display_label() const;
  EnvSpec env_spec() const;
  HeterogeneityLevel sensing_level() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Overlays j onto base. Throws ConfigError on unknown keys or invalid values.
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base = {});

struct Aggregates {
  int episodes = 0;  // episodes that reached success or the horizon
  int rows = 0;      // including a final budget-truncated episode
  double mean_return = 0.0;
  double std_return = 0.0;
  double success_rate = 0.0;
  double mean_progress = 0.0;
  double mean_terminal_metric = 0.0;
};

/// Population statistics over complete (non-truncated) episodes.
Aggregates aggregate(const std::vector<EpisodeLog>& episodes);

struct LedgerSnapshot {
  std::int64_t budget = 0;
  std::int64_t used = 0;
  std::array<std::int64_t, 4> steps{};
  std::array<std::int64_t, 4> rollouts{};
  std::int64_t scalar_feedback_bytes = 0;

  static LedgerSnapshot of(const BudgetLedger& ledger);
};

struct RunRecord {
  RunConfig config;
  bool ok = true;
  std::string error;
  std::vector<EpisodeLog> episodes;
  Aggregates aggregates;
  LedgerSnapshot ledger;
  AdaptStats adaptation;
  std::string policy_hash;
  bool policy_unchanged = true;
  double wall_seconds = 0.0;
  double steps_per_second = 0.0;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

/// Executes the method loop until the budget is spent. Loads the checkpoint
/// named in the config.
RunRecord run_one(const RunConfig& config);
/// Same, with an already frozen policy (its environment must match).
RunRecord run_one(const RunConfig& config, const FrozenPolicy& policy);

struct SweepOptions {
  int jobs = 1;
  /// Checkpoint per environment name; used when a config has no checkpoint path.
  std::map<std::string, std::string> checkpoints;
  /// Preloaded policies per environment name; take precedence over paths.
  std::map<std::string, const FrozenPolicy*> policies;
};

/// Runs every config, concurrently when jobs > 1. Failed runs are recorded
/// with ok = false. Output order matches the grid.
std::vector<RunRecord> sweep(const std::vector<RunConfig>& grid, const SweepOptions& options = {});

struct SummaryRow {
  std::string env;
  std::string hetero;
  std::string label;
  int runs = 0;
  int failed = 0;
  double reward_mean = 0.0, reward_std = 0.0;
  double success_mean = 0.0, success_std = 0.0;
  double progress_mean = 0.0, progress_std = 0.0;
  double episodes_mean = 0.0;
  double bytes_mean = 0.0;
  double wall_seconds_mean = 0.0;
  double steps_per_second_mean = 0.0;
};

/// Groups by (env, level, label); std is the sample std across seeds of
/// per-run means. Rows are sorted by key, so run order does not matter.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

struct ThresholdPoint {
  double threshold = 0.0;
  double fraction = 0.0;
};

/// Fraction of complete episodes whose terminal metric meets each threshold.
std::vector<ThresholdPoint> threshold_sensitivity(const std::vector<RunRecord>& records,
                                                  const std::vector<double>& thresholds);
std::vector<double> default_thresholds(EnvKind env);

/// Seven DC-Ada variants plus the shared-policy reference at H3.
std::vector<RunConfig> ablation_suite(EnvKind env, const std::vector<std::uint64_t>& seeds,
                                      const RunConfig& base = {});

std::vector<RunConfig> stress_suite(EnvKind env, HeteroLevel level, const std::vector<MethodKind>& methods,
                                    const std::vector<std::uint64_t>& seeds, const RunConfig& base = {});

/// Cartesian product of the given axes over a base config.
std::vector<RunConfig> grid(const RunConfig& base, const std::vector<EnvKind>& envs,
                            const std::vector<HeteroLevel>& levels, const std::vector<MethodKind>& methods,
                            const std::vector<std::uint64_t>& seeds);

struct ResultsFile {
  int schema_version = kResultsSchemaVersion;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<RunRecord> runs;
};

nlohmann::json results_to_json(const std::vector<RunRecord>& runs);
ResultsFile results_from_json(const nlohmann::json& j);
void write_results(const std::filesystem::path& path, const std::vector<RunRecord>& runs);
ResultsFile read_results(const std::filesystem::path& path);

/// Fields that depend on wall-clock time.
nlohmann::json strip_wall_clock(nlohmann::json results);

}  // namespace dcada
