#include "dcada/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace dcada {

using nlohmann::json;

namespace {

/// Strict object reader: every key must be consumed by a getter.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const char* key) const { return j_.at(key); }
  std::string where(const char* key = nullptr) const {
    return key ? path_ + "." + key : path_;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + where(k.c_str()) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto reparse(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

#define DCADA_ENV_CONSTANTS(X)                                                                   \
  X(spawn_jitter) X(max_placement_retries) X(num_packages) X(pickup_radius) X(drop_radius)       \
  X(shelf_radius) X(package_radius) X(num_victims) X(detection_radius) X(rescue_radius)          \
  X(num_debris) X(debris_radius_min) X(debris_radius_max) X(health_decay) X(coverage_cells)      \
  X(mark_radius) X(victim_radius) X(grid_resolution) X(sensing_radius) X(num_map_obstacles)      \
  X(map_obstacle_radius_min) X(map_obstacle_radius_max)

json constants_to_json(const EnvConstants& c) {
  json j;
#define X(name) j[#name] = c.name;
  DCADA_ENV_CONSTANTS(X)
#undef X
  return j;
}

EnvConstants constants_from_json(const json& j, EnvConstants c) {
  Reader r(j, "env_constants");
#define X(name) r.get(#name, c.name);
  DCADA_ENV_CONSTANTS(X)
#undef X
  r.finish();
  return c;
}

json suite_to_json(const SensorSuite& s) {
  return {{"has_lidar", s.has_lidar},       {"lidar_range", s.lidar_range}, {"lidar_rays", s.lidar_rays},
          {"has_rgb", s.has_rgb},           {"has_depth", s.has_depth},     {"camera_fov_deg", s.camera_fov_deg}};
}

SensorSuite suite_from_json(const json& j, const std::string& path) {
  SensorSuite s;
  Reader r(j, path);
  r.get("has_lidar", s.has_lidar);
  r.get("lidar_range", s.lidar_range);
  r.get("lidar_rays", s.lidar_rays);
  r.get("has_rgb", s.has_rgb);
  r.get("has_depth", s.has_depth);
  r.get("camera_fov_deg", s.camera_fov_deg);
  r.finish();
  reparse(path, [&] {
    s.validate();
    return 0;
  });
  return s;
}

json stress_to_json(const StressSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"noise_sigma", s.noise_sigma},
          {"dropout_prob", s.dropout_prob},
          {"delay_steps", s.delay_steps}};
}

StressSpec stress_from_json(const json& j, StressSpec s) {
  Reader r(j, "stress");
  std::string kind(to_string(s.kind));
  r.get("kind", kind);
  s.kind = reparse("stress.kind", [&] { return parse_stress_kind(kind); });
  r.get("noise_sigma", s.noise_sigma);
  r.get("dropout_prob", s.dropout_prob);
  r.get("delay_steps", s.delay_steps);
  r.finish();
  return s;
}

json method_to_json(const MethodConfig& m) {
  const auto& d = m.dc_ada;
  const auto& p = m.random_perturb;
  const auto& f = m.local_finetune;
  return {{"kind", to_string(m.kind)},
          {"dc_ada",
           {{"K", d.K},
            {"M", d.M},
            {"sigma", d.sigma},
            {"alpha", d.alpha},
            {"tau", d.tau},
            {"tc_fraction", d.tc_fraction},
            {"crn", d.crn},
            {"always_accept_best", d.always_accept_best},
            {"seeds_per_decision", d.seeds_per_decision}}},
          {"random_perturb", {{"K", p.K}, {"sigma", p.sigma}}},
          {"local_finetune",
           {{"K", f.K},
            {"tc_fraction", f.tc_fraction},
            {"lr", f.lr},
            {"gamma", f.gamma},
            {"entropy_coef", f.entropy_coef},
            {"grad_clip", f.grad_clip},
            {"crn", f.crn}}},
          {"obs_norm", {{"epsilon", m.obs_norm.epsilon}}}};
}

void method_sections_from_json(Reader& top, MethodConfig& m) {
  if (top.has("dc_ada")) {
    Reader r(top.at("dc_ada"), "dc_ada");
    auto& d = m.dc_ada;
    r.get("K", d.K);
    r.get("M", d.M);
    r.get("sigma", d.sigma);
    r.get("alpha", d.alpha);
    r.get("tau", d.tau);
    r.get("tc_fraction", d.tc_fraction);
    r.get("crn", d.crn);
    r.get("always_accept_best", d.always_accept_best);
    r.get("seeds_per_decision", d.seeds_per_decision);
    r.finish();
  }
  if (top.has("random_perturb")) {
    Reader r(top.at("random_perturb"), "random_perturb");
    r.get("K", m.random_perturb.K);
    r.get("sigma", m.random_perturb.sigma);
    r.finish();
  }
  if (top.has("local_finetune")) {
    Reader r(top.at("local_finetune"), "local_finetune");
    auto& f = m.local_finetune;
    r.get("K", f.K);
    r.get("tc_fraction", f.tc_fraction);
    r.get("lr", f.lr);
    r.get("gamma", f.gamma);
    r.get("entropy_coef", f.entropy_coef);
    r.get("grad_clip", f.grad_clip);
    r.get("crn", f.crn);
    r.finish();
  }
  if (top.has("obs_norm")) {
    Reader r(top.at("obs_norm"), "obs_norm");
    r.get("epsilon", m.obs_norm.epsilon);
    r.finish();
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Sample standard deviation (n - 1); zero for a single value.
Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string platform_string() {
  std::ostringstream os;
#if defined(__linux__)
  os << "linux";
#elif defined(__APPLE__)
  os << "macos";
#elif defined(_WIN32)
  os << "windows";
#else
  os << "unknown";
#endif
#if defined(__x86_64__)
  os << "-x86_64";
#elif defined(__aarch64__)
  os << "-aarch64";
#endif
#if defined(__clang__)
  os << " clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
  os << " gcc " << __GNUC__ << "." << __GNUC_MINOR__;
#endif
  return os.str();
}

}  // namespace

void RunConfig::validate() const {
  if (budget <= 0) throw ConfigError("budget must be positive");
  stress.validate();
  switch (method.kind) {
    case MethodKind::dc_ada:
      method.dc_ada.validate();
      break;
    case MethodKind::random_perturb:
      method.random_perturb.validate();
      break;
    case MethodKind::local_finetune:
      method.local_finetune.validate();
      break;
    default:
      break;
  }
  if (sensor_suites)
    for (const auto& s : *sensor_suites) s.validate();
}

std::string RunConfig::display_label() const { return label.empty() ? std::string(to_string(method.kind)) : label; }

EnvSpec RunConfig::env_spec() const { return make_env_spec(env, env_constants); }

HeterogeneityLevel RunConfig::sensing_level() const {
  HeterogeneityLevel lvl = builtin_level(hetero);
  if (sensor_suites) lvl.suites = *sensor_suites;
  return lvl;
}

json to_json(const RunConfig& c) {
  json j = {{"env", to_string(c.env)},
            {"hetero", to_string(c.hetero)},
            {"method", method_to_json(c.method)},
            {"seed", c.seed.value},
            {"budget", c.budget},
            {"stress", stress_to_json(c.stress)},
            {"checkpoint", c.checkpoint},
            {"label", c.display_label()},
            {"env_constants", constants_to_json(c.env_constants)}};
  if (c.sensor_suites) {
    json arr = json::array();
    for (const auto& s : *c.sensor_suites) arr.push_back(suite_to_json(s));
    j["sensor_suites"] = arr;
  }
  return j;
}

RunConfig run_config_from_json(const json& j, const RunConfig& base) {
  RunConfig c = base;
  Reader r(j, "config");
  std::string s;
  if (r.has("env")) {
    r.get("env", s);
    c.env = reparse("config.env", [&] { return parse_env_kind(s); });
  }
  if (r.has("hetero")) {
    r.get("hetero", s);
    c.hetero = reparse("config.hetero", [&] { return parse_hetero_level(s); });
  }
  if (r.has("method")) {
    const json& m = r.at("method");
    if (m.is_string()) {
      c.method.kind = reparse("config.method", [&] { return parse_method_kind(m.get<std::string>()); });
    } else {
      Reader mr(m, "method");
      if (mr.has("kind")) {
        mr.get("kind", s);
        c.method.kind = reparse("method.kind", [&] { return parse_method_kind(s); });
      }
      method_sections_from_json(mr, c.method);
      mr.finish();
    }
  }
  method_sections_from_json(r, c.method);
  r.get("seed", c.seed.value);
  r.get("budget", c.budget);
  if (r.has("stress")) {
    const json& st = r.at("stress");
    if (st.is_string()) {
      c.stress.kind = reparse("config.stress", [&] { return parse_stress_kind(st.get<std::string>()); });
    } else {
      c.stress = reparse("config.stress", [&] { return stress_from_json(st, c.stress); });
    }
  }
  r.get("checkpoint", c.checkpoint);
  r.get("label", c.label);
  if (r.has("env_constants")) c.env_constants = constants_from_json(r.at("env_constants"), c.env_constants);
  if (r.has("sensor_suites")) {
    const json& arr = r.at("sensor_suites");
    if (!arr.is_array() || arr.size() != kNumRobots)
      throw ConfigError("config.sensor_suites must be an array of " + std::to_string(kNumRobots) + " suites");
    std::array<SensorSuite, kNumRobots> suites;
    for (std::size_t i = 0; i < suites.size(); ++i)
      suites[i] = suite_from_json(arr[i], "sensor_suites[" + std::to_string(i) + "]");
    c.sensor_suites = suites;
  }
  r.finish();
  reparse("config", [&] {
    c.validate();
    return 0;
  });
  return c;
}

Aggregates aggregate(const std::vector<EpisodeLog>& episodes) {
  Aggregates a;
  a.rows = static_cast<int>(episodes.size());
  std::vector<double> returns;
  int successes = 0;
  double prog = 0.0, term = 0.0;
  for (const auto& e : episodes) {
    if (e.truncated) continue;
    returns.push_back(e.ret);
    successes += e.success ? 1 : 0;
    prog += e.progress;
    term += e.terminal_metric;
  }
  a.episodes = static_cast<int>(returns.size());
  if (a.episodes == 0) return a;
  const double n = a.episodes;
  for (double r : returns) a.mean_return += r;
  a.mean_return /= n;
  double ss = 0.0;
  for (double r : returns) ss += (r - a.mean_return) * (r - a.mean_return);
  a.std_return = std::sqrt(ss / n);
  a.success_rate = successes / n;
  a.mean_progress = prog / n;
  a.mean_terminal_metric = term / n;
  return a;
}

LedgerSnapshot LedgerSnapshot::of(const BudgetLedger& ledger) {
  LedgerSnapshot s;
  s.budget = ledger.budget();
  s.used = ledger.used();
  for (std::size_t c = 0; c < 4; ++c) {
    s.steps[c] = ledger.used_in(static_cast<LedgerCategory>(c));
    s.rollouts[c] = ledger.rollouts_in(static_cast<LedgerCategory>(c));
  }
  s.scalar_feedback_bytes = ledger.scalar_feedback_bytes();
  return s;
}

json to_json(const RunRecord& r) {
  json eps = {{"index", json::array()},   {"seed", json::array()},    {"length", json::array()},
              {"return", json::array()},  {"success", json::array()}, {"progress", json::array()},
              {"terminal_metric", json::array()}, {"truncated", json::array()}, {"digest", json::array()}};
  for (const auto& e : r.episodes) {
    eps["index"].push_back(e.index);
    eps["seed"].push_back(e.seed);
    eps["length"].push_back(e.length);
    eps["return"].push_back(e.ret);
    eps["success"].push_back(e.success);
    eps["progress"].push_back(e.progress);
    eps["terminal_metric"].push_back(e.terminal_metric);
    eps["truncated"].push_back(e.truncated);
    eps["digest"].push_back(hex64(e.trajectory_digest));
  }
  const auto& a = r.aggregates;
  json ledger = {{"budget", r.ledger.budget}, {"used", r.ledger.used}, {"scalar_feedback_bytes", r.ledger.scalar_feedback_bytes}};
  json steps, rollouts;
  for (std::size_t c = 0; c < 4; ++c) {
    const std::string name(to_string(static_cast<LedgerCategory>(c)));
    steps[name] = r.ledger.steps[c];
    rollouts[name] = r.ledger.rollouts[c];
  }
  ledger["steps"] = steps;
  ledger["rollouts"] = rollouts;
  const auto& s = r.adaptation;
  return {{"config", to_json(r.config)},
          {"status", r.ok ? "ok" : "failed"},
          {"error", r.error},
          {"episodes", eps},
          {"aggregates",
           {{"episodes", a.episodes},
            {"rows", a.rows},
            {"mean_return", a.mean_return},
            {"std_return", a.std_return},
            {"success_rate", a.success_rate},
            {"mean_progress", a.mean_progress},
            {"mean_terminal_metric", a.mean_terminal_metric}}},
          {"ledger", ledger},
          {"adaptation",
           {{"rounds", s.rounds},
            {"robot_decisions", s.robot_decisions},
            {"accepts", s.accepts},
            {"perturbations", s.perturbations},
            {"finetune_updates", s.finetune_updates},
            {"finetune_skipped", s.finetune_skipped},
            {"adaptation_stopped", s.adaptation_stopped}}},
          {"policy_hash", r.policy_hash},
          {"policy_unchanged", r.policy_unchanged},
          {"wall_seconds", r.wall_seconds},
          {"steps_per_second", r.steps_per_second}};
}

RunRecord run_record_from_json(const json& j) {
  try {
    RunRecord r;
    r.config = run_config_from_json(j.at("config"));
    r.ok = j.at("status").get<std::string>() == "ok";
    r.error = j.at("error").get<std::string>();
    const json& e = j.at("episodes");
    const std::size_t n = e.at("index").size();
    for (const char* col : {"seed", "length", "return", "success", "progress", "terminal_metric", "truncated", "digest"})
      if (e.at(col).size() != n) throw ConfigError(std::string("episode column '") + col + "' has wrong length");
    for (std::size_t i = 0; i < n; ++i) {
      EpisodeLog l;
      l.index = e["index"][i].get<std::int64_t>();
      l.seed = e["seed"][i].get<std::uint64_t>();
      l.length = e["length"][i].get<int>();
      l.ret = e["return"][i].get<double>();
      l.success = e["success"][i].get<bool>();
      l.progress = e["progress"][i].get<double>();
      l.terminal_metric = e["terminal_metric"][i].get<double>();
      l.truncated = e["truncated"][i].get<bool>();
      l.trajectory_digest = parse_hex64(e["digest"][i].get<std::string>());
      r.episodes.push_back(l);
    }
    r.aggregates = aggregate(r.episodes);
    const json& lg = j.at("ledger");
    r.ledger.budget = lg.at("budget").get<std::int64_t>();
    r.ledger.used = lg.at("used").get<std::int64_t>();
    r.ledger.scalar_feedback_bytes = lg.at("scalar_feedback_bytes").get<std::int64_t>();
    for (std::size_t c = 0; c < 4; ++c) {
      const std::string name(to_string(static_cast<LedgerCategory>(c)));
      r.ledger.steps[c] = lg.at("steps").at(name).get<std::int64_t>();
      r.ledger.rollouts[c] = lg.at("rollouts").at(name).get<std::int64_t>();
    }
    const json& ad = j.at("adaptation");
    r.adaptation.rounds = ad.at("rounds").get<int>();
    r.adaptation.robot_decisions = ad.at("robot_decisions").get<int>();
    r.adaptation.accepts = ad.at("accepts").get<int>();
    r.adaptation.perturbations = ad.at("perturbations").get<int>();
    r.adaptation.finetune_updates = ad.at("finetune_updates").get<int>();
    r.adaptation.finetune_skipped = ad.at("finetune_skipped").get<int>();
    r.adaptation.adaptation_stopped = ad.at("adaptation_stopped").get<bool>();
    r.policy_hash = j.at("policy_hash").get<std::string>();
    r.policy_unchanged = j.at("policy_unchanged").get<bool>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.steps_per_second = j.at("steps_per_second").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run record: ") + e.what());
  }
}

RunRecord run_one(const RunConfig& config) {
  config.validate();
  const EnvSpec spec = config.env_spec();
  if (config.checkpoint.empty()) throw ConfigError("run config has no checkpoint path");
  const FrozenPolicy policy = load_checkpoint(config.checkpoint, spec);
  return run_one(config, policy);
}

RunRecord run_one(const RunConfig& config, const FrozenPolicy& policy) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const EnvSpec spec = config.env_spec();
  if (policy.env() != config.env || policy.obs_dim() != spec.obs_dim())
    throw CheckpointError("policy was trained for " + std::string(to_string(policy.env())) + " (d=" +
                          std::to_string(policy.obs_dim()) + "), run targets " +
                          std::string(to_string(config.env)) + " (d=" + std::to_string(spec.obs_dim()) + ")");
  if (!policy.verify()) throw CheckpointError("policy hash mismatch before run");
  const HeterogeneityLevel level = config.sensing_level();
  const RolloutContext ctx{&spec, &level, &policy, config.stress};

  RunRecord rec;
  rec.config = config;
  rec.policy_hash = policy.hash();
  BudgetLedger ledger(config.budget);
  AdaptMethod method(config.method, spec.obs_dim());
  Rng round_rng = run_stream(config.seed, StreamPurpose::noise);
  Rng finetune_seed_rng = run_stream(config.seed, StreamPurpose::policy);
  const MethodConfig& mc = config.method;

  std::int64_t index = 0;
  while (ledger.remaining() > 0) {
    const EpisodeSeed seed = derive_episode_seed(config.seed, static_cast<std::uint64_t>(index));
    rec.episodes.push_back(run_nominal_episode(method, ctx, ledger, seed, index));
    ++index;
    if (ledger.remaining() == 0) break;
    switch (mc.kind) {
      case MethodKind::dc_ada:
        if (index % mc.dc_ada.K == 0 && !method.stats().adaptation_stopped)
          dcada_round(method, ctx, ledger, round_rng);
        break;
      case MethodKind::random_perturb:
        if (index % mc.random_perturb.K == 0) random_perturb_round(method, round_rng);
        break;
      case MethodKind::local_finetune:
        if (index % mc.local_finetune.K == 0) {
          const EpisodeSeed fs = mc.local_finetune.crn ? seed : EpisodeSeed{finetune_seed_rng.next_u64()};
          finetune_episode(method, ctx, ledger, fs);
        }
        break;
      default:
        break;
    }
  }

  rec.policy_unchanged = policy.verify() && policy.hash() == rec.policy_hash;
  if (!rec.policy_unchanged) throw CheckpointError("shared policy changed during run");
  rec.aggregates = aggregate(rec.episodes);
  rec.ledger = LedgerSnapshot::of(ledger);
  rec.adaptation = method.stats();
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rec.steps_per_second = rec.wall_seconds > 0.0 ? static_cast<double>(ledger.used()) / rec.wall_seconds : 0.0;
  return rec;
}

std::vector<RunRecord> sweep(const std::vector<RunConfig>& grid_configs, const SweepOptions& options) {
  std::vector<RunRecord> out(grid_configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid_configs.size(); i = next++) {
      const RunConfig& cfg = grid_configs[i];
      try {
        const std::string env(to_string(cfg.env));
        if (auto it = options.policies.find(env); it != options.policies.end() && it->second) {
          out[i] = run_one(cfg, *it->second);
        } else if (cfg.checkpoint.empty() && options.checkpoints.count(env)) {
          RunConfig c = cfg;
          c.checkpoint = options.checkpoints.at(env);
          out[i] = run_one(c);
        } else {
          out[i] = run_one(cfg);
        }
      } catch (const std::exception& e) {
        RunRecord failed;
        failed.config = cfg;
        failed.ok = false;
        failed.error = e.what();
        failed.ledger.budget = cfg.budget;
        out[i] = std::move(failed);
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(grid_configs.size())));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const auto& r : records)
    groups[{std::string(to_string(r.config.env)), std::string(to_string(r.config.hetero)), r.config.display_label()}]
        .push_back(&r);
  std::vector<SummaryRow> rows;
  for (auto& [key, members] : groups) {
    // Seed order inside a group must not affect floating-point sums.
    std::sort(members.begin(), members.end(),
              [](const RunRecord* a, const RunRecord* b) { return a->config.seed.value < b->config.seed.value; });
    SummaryRow row;
    std::tie(row.env, row.hetero, row.label) = key;
    std::vector<double> reward, success, prog;
    for (const RunRecord* r : members) {
      ++row.runs;
      if (!r->ok) {
        ++row.failed;
        continue;
      }
      reward.push_back(r->aggregates.mean_return);
      success.push_back(r->aggregates.success_rate);
      prog.push_back(r->aggregates.mean_progress);
      row.episodes_mean += r->aggregates.episodes;
      row.bytes_mean += static_cast<double>(r->ledger.scalar_feedback_bytes);
      row.wall_seconds_mean += r->wall_seconds;
      row.steps_per_second_mean += r->steps_per_second;
    }
    const auto rm = moments(reward), sm = moments(success), pm = moments(prog);
    row.reward_mean = rm.mean;
    row.reward_std = rm.stddev;
    row.success_mean = sm.mean;
    row.success_std = sm.stddev;
    row.progress_mean = pm.mean;
    row.progress_std = pm.stddev;
    if (!reward.empty()) {
      const double n = static_cast<double>(reward.size());
      row.episodes_mean /= n;
      row.bytes_mean /= n;
      row.wall_seconds_mean /= n;
      row.steps_per_second_mean /= n;
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<ThresholdPoint> threshold_sensitivity(const std::vector<RunRecord>& records,
                                                  const std::vector<double>& thresholds) {
  std::vector<double> metrics;
  for (const auto& r : records)
    for (const auto& e : r.episodes)
      if (!e.truncated) metrics.push_back(e.terminal_metric);
  std::vector<ThresholdPoint> curve;
  for (double thr : thresholds) {
    ThresholdPoint p{thr, 0.0};
    if (!metrics.empty()) {
      const auto hits = std::count_if(metrics.begin(), metrics.end(), [&](double m) { return m >= thr; });
      p.fraction = static_cast<double>(hits) / static_cast<double>(metrics.size());
    }
    curve.push_back(p);
  }
  return curve;
}

std::vector<double> default_thresholds(EnvKind env) {
  if (env == EnvKind::mapping) return {0.60, 0.65, 0.70, 0.75};
  return {1.0, 2.0, 3.0, 4.0};
}

std::vector<RunConfig> ablation_suite(EnvKind env, const std::vector<std::uint64_t>& seeds, const RunConfig& base) {
  struct Variant {
    const char* label;
    MethodKind kind;
    void (*tweak)(DcAdaConfig&);
  };
  const Variant variants[] = {
      {"shared_policy", MethodKind::shared_policy, [](DcAdaConfig&) {}},
      {"full_dc_ada", MethodKind::dc_ada, [](DcAdaConfig&) {}},
      {"no_crn", MethodKind::dc_ada, [](DcAdaConfig& d) { d.crn = false; }},
      {"m1", MethodKind::dc_ada, [](DcAdaConfig& d) { d.M = 1; }},
      {"m4", MethodKind::dc_ada, [](DcAdaConfig& d) { d.M = 4; }},
      {"always_best", MethodKind::dc_ada, [](DcAdaConfig& d) { d.always_accept_best = true; }},
      {"short_tc", MethodKind::dc_ada, [](DcAdaConfig& d) { d.tc_fraction = 0.125; }},
      {"long_tc", MethodKind::dc_ada, [](DcAdaConfig& d) { d.tc_fraction = 0.5; }},
  };
  std::vector<RunConfig> out;
  for (const auto& v : variants)
    for (auto seed : seeds) {
      RunConfig c = base;
      c.env = env;
      c.hetero = HeteroLevel::H3;
      c.method.kind = v.kind;
      v.tweak(c.method.dc_ada);
      c.seed = RunSeed{seed};
      c.label = v.label;
      out.push_back(c);
    }
  return out;
}

std::vector<RunConfig> stress_suite(EnvKind env, HeteroLevel level, const std::vector<MethodKind>& methods,
                                    const std::vector<std::uint64_t>& seeds, const RunConfig& base) {
  std::vector<RunConfig> out;
  for (auto kind : {StressKind::clean, StressKind::gaussian_noise, StressKind::dropout, StressKind::delay,
                    StressKind::combined_mild})
    for (auto m : methods)
      for (auto seed : seeds) {
        RunConfig c = base;
        c.env = env;
        c.hetero = level;
        c.method.kind = m;
        c.stress.kind = kind;
        c.seed = RunSeed{seed};
        c.label = std::string(to_string(m)) + "/" + std::string(to_string(kind));
        out.push_back(c);
      }
  return out;
}

std::vector<RunConfig> grid(const RunConfig& base, const std::vector<EnvKind>& envs,
                            const std::vector<HeteroLevel>& levels, const std::vector<MethodKind>& methods,
                            const std::vector<std::uint64_t>& seeds) {
  std::vector<RunConfig> out;
  for (auto e : envs)
    for (auto l : levels)
      for (auto m : methods)
        for (auto s : seeds) {
          RunConfig c = base;
          c.env = e;
          c.hetero = l;
          c.method.kind = m;
          c.seed = RunSeed{s};
          out.push_back(c);
        }
  return out;
}

json results_to_json(const std::vector<RunRecord>& runs) {
  json arr = json::array();
  for (const auto& r : runs) arr.push_back(to_json(r));
  return {{"schema_version", kResultsSchemaVersion},
          {"metadata",
           {{"timestamp", utc_timestamp()},
            {"platform", platform_string()},
            {"artifact_version", kArtifactVersion},
            {"repo_chosen",
             {{"stress_noise_sigma", StressSpec{}.noise_sigma},
              {"stress_combined_mild", "half noise sigma, half dropout rate, 1-step delay"},
              {"ablation_short_tc", 0.125},
              {"ablation_long_tc", 0.5}}}}},
          {"runs", arr}};
}

ResultsFile results_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version") || !j.contains("runs") || !j.contains("metadata"))
    throw ConfigError("results file lacks schema_version, metadata or runs");
  ResultsFile f;
  f.schema_version = j.at("schema_version").get<int>();
  if (f.schema_version != kResultsSchemaVersion)
    throw ConfigError("unsupported results schema_version " + std::to_string(f.schema_version));
  f.metadata = j.at("metadata");
  for (const auto& r : j.at("runs")) f.runs.push_back(run_record_from_json(r));
  return f;
}

void write_results(const std::filesystem::path& path, const std::vector<RunRecord>& runs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write results file '" + path.string() + "'");
  out << results_to_json(runs).dump(1) << '\n';
  if (!out) throw std::runtime_error("failed writing results file '" + path.string() + "'");
}

ResultsFile read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("results file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return results_from_json(j);
}

json strip_wall_clock(json results) {
  if (results.contains("metadata")) results["metadata"].erase("timestamp");
  if (results.contains("runs"))
    for (auto& r : results["runs"]) {
      r.erase("wall_seconds");
      r.erase("steps_per_second");
    }
  return results;
}

}  // namespace dcada
