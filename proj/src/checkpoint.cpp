#include "dcada/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace dcada {
namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
};

std::string hex16(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

std::string parameter_hash(EnvKind env, const nets::PolicyParams& policy) {
  Fnv1a f;
  const auto name = to_string(env);
  f.bytes(name.data(), name.size());
  const std::int64_t dims[2] = {policy.input_dim(), policy.hidden_dim()};
  f.bytes(dims, sizeof(dims));
  const nets::Vec flat = nets::pack(policy);
  f.bytes(flat.data(), static_cast<std::size_t>(flat.size()) * sizeof(double));
  return hex16(f.h);
}

nlohmann::json checkpoint_to_json(const PolicyCheckpoint& ckpt) {
  const nets::Vec flat = nets::pack(ckpt.policy);
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["env"] = std::string(to_string(ckpt.env));
  j["obs_dim"] = ckpt.obs_dim;
  j["hidden"] = ckpt.policy.hidden_dim();
  j["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  j["hash"] = parameter_hash(ckpt.env, ckpt.policy);
  j["meta"] = ckpt.meta;
  return j;
}

PolicyCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw CheckpointError("not a policy checkpoint");
    if (const int v = j.at("version").get<int>(); v != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
    PolicyCheckpoint ckpt;
    ckpt.env = parse_env_kind(j.at("env").get<std::string>());
    ckpt.obs_dim = j.at("obs_dim").get<int>();
    const int hidden = j.at("hidden").get<int>();
    const auto values = j.at("params").get<std::vector<double>>();
    const nets::Vec flat = Eigen::Map<const nets::Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
    ckpt.policy = nets::unpack_policy(flat, ckpt.obs_dim, hidden);
    if (parameter_hash(ckpt.env, ckpt.policy) != j.at("hash").get<std::string>())
      throw CheckpointError("checkpoint hash mismatch (file corrupted or edited)");
    if (j.contains("meta")) ckpt.meta = j["meta"];
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
}

PolicyCheckpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

FrozenPolicy::FrozenPolicy(EnvKind env, nets::PolicyParams params)
    : env_(env),
      params_(std::make_shared<const nets::PolicyParams>(std::move(params))),
      hash_(parameter_hash(env_, *params_)) {}

bool FrozenPolicy::verify() const { return parameter_hash(env_, *params_) == hash_; }

FrozenPolicy freeze(const PolicyCheckpoint& ckpt, const EnvSpec& spec) {
  if (ckpt.obs_dim != spec.obs_dim() || ckpt.policy.input_dim() != spec.obs_dim())
    throw CheckpointError("checkpoint observation dimension " + std::to_string(ckpt.obs_dim) +
                          " does not match environment dimension " + std::to_string(spec.obs_dim()));
  if (ckpt.env != spec.kind)
    throw CheckpointError("checkpoint environment " + std::string(to_string(ckpt.env)) +
                          " does not match " + std::string(to_string(spec.kind)));
  return FrozenPolicy(ckpt.env, ckpt.policy);
}

FrozenPolicy load_checkpoint(const std::filesystem::path& path, const EnvSpec& spec) {
  return freeze(read_checkpoint(path), spec);
}

}  // namespace dcada
