#pragma once

#include <filesystem>
#include <memory>
#include <json.hpp>
#include <stdexcept>
#include <string>

#include "dcada/nets.hpp"
#include "dcada/tasks.hpp"

namespace dcada {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "dcada-policy-checkpoint";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PolicyCheckpoint {
  EnvKind env = EnvKind::mapping;
  int obs_dim = 0;
  nets::PolicyParams policy;
  nlohmann::json meta = nlohmann::json::object();
};

/// FNV-1a 64 over env name, dimensions and the raw parameter bytes, as 16 hex digits.
std::string parameter_hash(EnvKind env, const nets::PolicyParams& policy);

nlohmann::json checkpoint_to_json(const PolicyCheckpoint& ckpt);
/// Validates format, version, dimensions and hash.
PolicyCheckpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::filesystem::path& path);
PolicyCheckpoint read_checkpoint(const std::filesystem::path& path);

/// Shared policy that no adaptation method may modify.
class FrozenPolicy {
 public:
  FrozenPolicy(EnvKind env, nets::PolicyParams params);

  const nets::PolicyParams& params() const { return *params_; }
  EnvKind env() const { return env_; }
  int obs_dim() const { return params_->input_dim(); }
  const std::string& hash() const { return hash_; }
  /// Recomputes the parameter hash and compares with the load-time value.
  bool verify() const;

 private:
  EnvKind env_;
  std::shared_ptr<const nets::PolicyParams> params_;
  std::string hash_;
};

/// Loads and freezes a checkpoint; throws CheckpointError when its
/// environment or observation dimension does not match the spec.
FrozenPolicy load_checkpoint(const std::filesystem::path& path, const EnvSpec& spec);
FrozenPolicy freeze(const PolicyCheckpoint& ckpt, const EnvSpec& spec);

}  // namespace dcada
