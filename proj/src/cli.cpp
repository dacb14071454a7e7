#include "dcada/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "dcada/checkpoint.hpp"
#include "dcada/harness.hpp"
#include "dcada/pretrain.hpp"
#include "dcada/report.hpp"

namespace dcada {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

fs::path resolve_out(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv("DCADA_RESULTS_DIR"); dir && *dir) return fs::path(dir) / p;
  return p;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::vector<std::uint64_t> seed_range(int n) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(static_cast<std::uint64_t>(i));
  return s;
}

/// Hyperparameter and budget flags shared by run, sweep, ablate and stress.
struct RunFlags {
  RunConfig defaults;
  std::int64_t budget = kDeskBudget;
  bool full_budget = false;
  std::string stress = "clean";
  double noise_sigma = StressSpec{}.noise_sigma;
  double dropout_prob = StressSpec{}.dropout_prob;
  int delay_steps = StressSpec{}.delay_steps;
  DcAdaConfig dc = DcAdaConfig{};
  bool no_crn = false;
  bool always_best = false;
  RandomPerturbConfig rp = RandomPerturbConfig{};
  FinetuneConfig ft = FinetuneConfig{};
  bool no_ft_crn = false;
  double norm_eps = ObsNormConfig{}.epsilon;

  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> bindings;

  template <class T>
  void bind(CLI::App* app, const std::string& name, T& var, const std::string& desc,
            std::function<void(RunConfig&)> apply) {
    auto* opt = app->add_option(name, var, desc)->capture_default_str();
    bindings.emplace_back(opt, std::move(apply));
  }
  void flag(CLI::App* app, const std::string& name, bool& var, const std::string& desc,
            std::function<void(RunConfig&)> apply) {
    auto* opt = app->add_flag(name, var, desc);
    bindings.emplace_back(opt, std::move(apply));
  }

  void add(CLI::App* app, bool with_budget = true) {
    if (with_budget) {
      bind(app, "--budget", budget, "joint environment steps per run", [this](RunConfig& c) { c.budget = budget; });
      flag(app, "--full-budget", full_budget, "use the full budget of 200000 steps",
           [](RunConfig& c) { c.budget = kFullBudget; });
    }
    bind(app, "--stress", stress, "observation stress: clean, gaussian_noise, dropout, delay, combined_mild",
         [this](RunConfig& c) { c.stress.kind = as_usage([&] { return parse_stress_kind(stress); }); });
    bind(app, "--noise-sigma", noise_sigma, "stress noise std", [this](RunConfig& c) { c.stress.noise_sigma = noise_sigma; });
    bind(app, "--dropout-prob", dropout_prob, "stress dropout probability",
         [this](RunConfig& c) { c.stress.dropout_prob = dropout_prob; });
    bind(app, "--delay-steps", delay_steps, "stress delay in steps", [this](RunConfig& c) { c.stress.delay_steps = delay_steps; });

    bind(app, "--K", dc.K, "DC-Ada update interval (episodes)", [this](RunConfig& c) { c.method.dc_ada.K = dc.K; });
    bind(app, "--M", dc.M, "DC-Ada candidates per robot", [this](RunConfig& c) { c.method.dc_ada.M = dc.M; });
    bind(app, "--sigma", dc.sigma, "DC-Ada perturbation scale", [this](RunConfig& c) { c.method.dc_ada.sigma = dc.sigma; });
    bind(app, "--alpha", dc.alpha, "DC-Ada step size", [this](RunConfig& c) { c.method.dc_ada.alpha = dc.alpha; });
    bind(app, "--tau", dc.tau, "DC-Ada accept margin", [this](RunConfig& c) { c.method.dc_ada.tau = dc.tau; });
    bind(app, "--tc-fraction", dc.tc_fraction, "DC-Ada short-rollout fraction of T",
         [this](RunConfig& c) { c.method.dc_ada.tc_fraction = dc.tc_fraction; });
    bind(app, "--seeds-per-decision", dc.seeds_per_decision, "DC-Ada rollouts averaged per return",
         [this](RunConfig& c) { c.method.dc_ada.seeds_per_decision = dc.seeds_per_decision; });
    flag(app, "--no-crn", no_crn, "DC-Ada: fresh seed for every rollout", [](RunConfig& c) { c.method.dc_ada.crn = false; });
    flag(app, "--always-best", always_best, "DC-Ada: accept the best candidate unconditionally",
         [](RunConfig& c) { c.method.dc_ada.always_accept_best = true; });

    bind(app, "--perturb-K", rp.K, "random perturbation interval (episodes)",
         [this](RunConfig& c) { c.method.random_perturb.K = rp.K; });
    bind(app, "--perturb-sigma", rp.sigma, "random perturbation scale",
         [this](RunConfig& c) { c.method.random_perturb.sigma = rp.sigma; });

    bind(app, "--ft-K", ft.K, "fine-tune interval (episodes)", [this](RunConfig& c) { c.method.local_finetune.K = ft.K; });
    bind(app, "--ft-tc-fraction", ft.tc_fraction, "fine-tune rollout fraction of T",
         [this](RunConfig& c) { c.method.local_finetune.tc_fraction = ft.tc_fraction; });
    bind(app, "--lr", ft.lr, "fine-tune learning rate", [this](RunConfig& c) { c.method.local_finetune.lr = ft.lr; });
    bind(app, "--gamma", ft.gamma, "fine-tune discount", [this](RunConfig& c) { c.method.local_finetune.gamma = ft.gamma; });
    bind(app, "--entropy", ft.entropy_coef, "fine-tune entropy coefficient",
         [this](RunConfig& c) { c.method.local_finetune.entropy_coef = ft.entropy_coef; });
    bind(app, "--clip", ft.grad_clip, "fine-tune gradient-norm clip",
         [this](RunConfig& c) { c.method.local_finetune.grad_clip = ft.grad_clip; });
    flag(app, "--no-ft-crn", no_ft_crn, "fine-tune: fresh seed instead of the episode seed",
         [](RunConfig& c) { c.method.local_finetune.crn = false; });
    bind(app, "--norm-eps", norm_eps, "observation-normalization epsilon",
         [this](RunConfig& c) { c.method.obs_norm.epsilon = norm_eps; });
  }

  /// Applies only the flags present on the command line.
  void apply(RunConfig& c) const {
    for (const auto& [opt, fn] : bindings)
      if (opt->count() > 0) fn(c);
  }
};

void validate_config(const RunConfig& c) {
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int finish_runs(const std::vector<RunRecord>& records, const std::string& out_path, std::ostream& out) {
  const fs::path path = resolve_out(out_path);
  try {
    write_results(path, records);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  int failed = 0;
  for (const auto& r : records) failed += r.ok ? 0 : 1;
  out << "wrote " << records.size() << " run(s) to " << path.string();
  if (failed) out << " (" << failed << " failed)";
  out << '\n';
  if (failed) {
    for (const auto& r : records)
      if (!r.ok) throw RunFailure(r.config.display_label() + " seed " + std::to_string(r.config.seed.value) + ": " + r.error);
  }
  return kExitOk;
}

std::vector<RunConfig> sweep_grid_from_json(const json& j, const RunConfig& overrides_base,
                                            std::map<std::string, std::string>& checkpoints) {
  if (!j.is_object()) throw ConfigError("sweep config must be an object");
  static const std::set<std::string> known = {"base", "envs", "levels", "methods", "seeds", "checkpoints", "runs"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown sweep config key '" + k + "'");
  RunConfig base = overrides_base;
  if (j.contains("base")) base = run_config_from_json(j.at("base"), base);
  if (j.contains("checkpoints")) {
    for (const auto& [env, path] : j.at("checkpoints").items()) {
      parse_env_kind(env);
      checkpoints[env] = path.get<std::string>();
    }
  }
  std::vector<RunConfig> configs;
  try {
    if (j.contains("envs") || j.contains("levels") || j.contains("methods") || j.contains("seeds")) {
      std::vector<EnvKind> envs;
      std::vector<HeteroLevel> levels;
      std::vector<MethodKind> methods;
      std::vector<std::uint64_t> seeds;
      for (const auto& e : j.value("envs", json::array({std::string(to_string(base.env))})))
        envs.push_back(parse_env_kind(e.get<std::string>()));
      for (const auto& l : j.value("levels", json::array({std::string(to_string(base.hetero))})))
        levels.push_back(parse_hetero_level(l.get<std::string>()));
      for (const auto& m : j.value("methods", json::array({std::string(to_string(base.method.kind))})))
        methods.push_back(parse_method_kind(m.get<std::string>()));
      for (const auto& s : j.value("seeds", json::array({base.seed.value}))) seeds.push_back(s.get<std::uint64_t>());
      configs = grid(base, envs, levels, methods, seeds);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  if (j.contains("runs"))
    for (const auto& r : j.at("runs")) configs.push_back(run_config_from_json(r, base));
  return configs;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Budgeted multi-robot test-time adaptation experiments", "dcada"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "train the shared policy under nominal sensing (H0)");
  std::string pre_env, pre_out, pre_opt = "sgd";
  PretrainConfig pcfg;
  std::uint64_t pre_seed = 0;
  int pre_eval = 20;
  bool pre_quiet = false;
  pre->add_option("--env", pre_env, "warehouse, search_rescue or mapping")->required();
  pre->add_option("--seed", pre_seed, "training seed")->capture_default_str();
  pre->add_option("--steps", pcfg.total_steps, "total joint steps")->capture_default_str();
  pre->add_option("--out", pre_out, "checkpoint path")->required();
  pre->add_option("--rollout", pcfg.rollout_length, "joint steps per update")->capture_default_str();
  pre->add_option("--lr-policy", pcfg.lr_policy, "policy learning rate")->capture_default_str();
  pre->add_option("--lr-value", pcfg.lr_value, "value learning rate")->capture_default_str();
  pre->add_option("--gamma", pcfg.gamma, "discount")->capture_default_str();
  pre->add_option("--entropy", pcfg.entropy_coef, "entropy coefficient")->capture_default_str();
  pre->add_option("--clip", pcfg.grad_clip, "gradient-norm clip")->capture_default_str();
  pre->add_option("--optimizer", pre_opt, "adam or sgd")->capture_default_str();
  pre->add_option("--reward-scale", pcfg.reward_scale, "value-target reward scale (0 = environment default)")
      ->capture_default_str();
  pre->add_option("--eval-episodes", pre_eval, "deterministic evaluation episodes after training")->capture_default_str();
  pre->add_flag("--quiet", pre_quiet, "no progress output");

  // run
  auto* run = app.add_subcommand("run", "one budgeted run");
  std::string run_env, run_hetero, run_method, run_ckpt, run_out, run_config;
  std::uint64_t run_seed = 0;
  RunFlags run_flags;
  run->add_option("--config", run_config, "base run config JSON (flags override)");
  auto* o_env = run->add_option("--env", run_env, "warehouse, search_rescue or mapping");
  auto* o_het = run->add_option("--hetero", run_hetero, "H0, H1, H2 or H3");
  auto* o_meth = run->add_option("--method", run_method, "shared_policy, obs_norm, random_perturb, local_finetune or dc_ada");
  auto* o_seed = run->add_option("--seed", run_seed, "run seed");
  auto* o_ckpt = run->add_option("--checkpoint", run_ckpt, "policy checkpoint JSON");
  run->add_option("--out", run_out, "results JSON")->required();
  run_flags.add(run);

  // sweep
  auto* sw = app.add_subcommand("sweep", "grid of runs from a sweep config");
  std::string sw_config, sw_out;
  int sw_jobs = 1;
  RunFlags sw_flags;
  sw->add_option("--config", sw_config, "sweep config JSON")->required();
  sw->add_option("--out", sw_out, "results JSON")->required();
  sw->add_option("--jobs", sw_jobs, "concurrent runs")->capture_default_str();
  sw_flags.add(sw);

  // ablate
  auto* ab = app.add_subcommand("ablate", "DC-Ada design ablations at H3");
  std::string ab_env, ab_ckpt, ab_out;
  int ab_seeds = 5, ab_jobs = 1;
  RunFlags ab_flags;
  ab->add_option("--env", ab_env, "mapping or search_rescue")->required();
  ab->add_option("--checkpoint", ab_ckpt, "policy checkpoint JSON")->required();
  ab->add_option("--seeds", ab_seeds, "seeds 0..n-1")->capture_default_str();
  ab->add_option("--out", ab_out, "results JSON")->required();
  ab->add_option("--jobs", ab_jobs, "concurrent runs")->capture_default_str();
  ab_flags.add(ab);

  // stress
  auto* st = app.add_subcommand("stress", "observation-stress suite");
  std::string st_env, st_hetero = "H3", st_ckpt, st_out;
  std::vector<std::string> st_methods = {"shared_policy", "obs_norm", "random_perturb", "local_finetune", "dc_ada"};
  int st_seeds = 5, st_jobs = 1;
  RunFlags st_flags;
  st->add_option("--env", st_env, "environment")->required();
  st->add_option("--hetero", st_hetero, "heterogeneity level")->capture_default_str();
  st->add_option("--methods", st_methods, "methods to evaluate")->delimiter(',')->capture_default_str();
  st->add_option("--checkpoint", st_ckpt, "policy checkpoint JSON")->required();
  st->add_option("--seeds", st_seeds, "seeds 0..n-1")->capture_default_str();
  st->add_option("--out", st_out, "results JSON")->required();
  st->add_option("--jobs", st_jobs, "concurrent runs")->capture_default_str();
  st_flags.add(st);

  // report
  auto* rep = app.add_subcommand("report", "summary tables from a results file");
  std::string rep_results, rep_csv;
  rep->add_option("--results", rep_results, "results JSON")->required();
  rep->add_option("--csv-dir", rep_csv, "write performance.csv, thresholds.csv and runtime.csv here");

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("dcada");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kArtifactVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (pre->parsed()) {
      pcfg.env = make_env_spec(as_usage([&] { return parse_env_kind(pre_env); }));
      pcfg.seed = RunSeed{pre_seed};
      pcfg.optimizer = as_usage([&] { return parse_optimizer(pre_opt); });
      as_usage([&] {
        pcfg.validate();
        return 0;
      });
      ProgressCallback cb;
      if (!pre_quiet)
        cb = [&](const CurvePoint& p) {
          if (p.step % 10'000 < pcfg.rollout_length) out << "step " << p.step << " mean_return " << p.mean_return << '\n';
        };
      PretrainResult res;
      try {
        res = pretrain(pcfg, cb);
      } catch (const std::runtime_error& e) {
        throw RunFailure(e.what());
      }
      json curve = json::array();
      for (const auto& p : res.report.curve) curve.push_back({p.step, p.mean_return});
      res.checkpoint.meta["curve"] = curve;
      if (pre_eval > 0) {
        const auto lvl = builtin_level(HeteroLevel::H0);
        const RunSeed eval_seed{pre_seed ^ 0x5eed5eedULL};
        const double trained = evaluate_deterministic(res.checkpoint.policy, pcfg.env, lvl, eval_seed, pre_eval);
        const double zero = evaluate_deterministic(nets::PolicyParams::zeros(pcfg.env.obs_dim(), pcfg.hidden), pcfg.env,
                                                   lvl, eval_seed, pre_eval);
        res.checkpoint.meta["eval"] = {{"episodes", pre_eval}, {"mean_return", trained}, {"zero_policy_mean_return", zero}};
        out << "eval mean_return " << trained << " zero_policy " << zero << '\n';
      }
      try {
        save_checkpoint(res.checkpoint, pre_out);
      } catch (const std::exception& e) {
        throw IoError(e.what());
      }
      out << "wrote checkpoint " << pre_out << " hash " << parameter_hash(res.checkpoint.env, res.checkpoint.policy)
          << '\n';
      return kExitOk;
    }

    if (run->parsed()) {
      RunConfig cfg;
      if (!run_config.empty()) cfg = run_config_from_json(read_json_file(run_config));
      const bool from_file = !run_config.empty();
      for (auto* o : {o_env, o_het, o_meth, o_seed, o_ckpt})
        if (!from_file && o->count() == 0) throw UsageError(o->get_name() + " is required");
      if (o_env->count()) cfg.env = as_usage([&] { return parse_env_kind(run_env); });
      if (o_het->count()) cfg.hetero = as_usage([&] { return parse_hetero_level(run_hetero); });
      if (o_meth->count()) cfg.method.kind = as_usage([&] { return parse_method_kind(run_method); });
      if (o_seed->count()) cfg.seed = RunSeed{run_seed};
      if (o_ckpt->count()) cfg.checkpoint = run_ckpt;
      if (!from_file && run_flags.bindings.front().first->count() == 0 && !run_flags.full_budget)
        throw UsageError("--budget is required");
      run_flags.apply(cfg);
      validate_config(cfg);
      RunRecord rec;
      try {
        rec = run_one(cfg);
      } catch (const CheckpointError& e) {
        throw IoError(e.what());
      } catch (const std::runtime_error& e) {
        throw RunFailure(e.what());
      }
      return finish_runs({rec}, run_out, out);
    }

    if (sw->parsed()) {
      std::map<std::string, std::string> checkpoints;
      RunConfig base;
      auto configs = sweep_grid_from_json(read_json_file(sw_config), base, checkpoints);
      for (auto& c : configs) {
        sw_flags.apply(c);
        validate_config(c);
      }
      SweepOptions opts;
      opts.jobs = sw_jobs;
      opts.checkpoints = checkpoints;
      return finish_runs(sweep(configs, opts), sw_out, out);
    }

    auto suite_run = [&](std::vector<RunConfig> configs, const RunFlags& flags, const std::string& ckpt_path,
                         int jobs, const std::string& out_path) {
      for (auto& c : configs) {
        c.checkpoint = ckpt_path;
        flags.apply(c);
        validate_config(c);
      }
      if (configs.empty()) throw UsageError("empty suite");
      FrozenPolicy policy = [&] {
        try {
          return load_checkpoint(ckpt_path, configs.front().env_spec());
        } catch (const std::exception& e) {
          throw IoError(e.what());
        }
      }();
      SweepOptions opts;
      opts.jobs = jobs;
      opts.policies[std::string(to_string(policy.env()))] = &policy;
      return finish_runs(sweep(configs, opts), out_path, out);
    };

    if (ab->parsed()) {
      const EnvKind env = as_usage([&] { return parse_env_kind(ab_env); });
      if (env == EnvKind::warehouse) throw UsageError("ablations are defined for mapping and search_rescue");
      return suite_run(ablation_suite(env, seed_range(ab_seeds)), ab_flags, ab_ckpt, ab_jobs, ab_out);
    }

    if (st->parsed()) {
      const EnvKind env = as_usage([&] { return parse_env_kind(st_env); });
      const HeteroLevel lvl = as_usage([&] { return parse_hetero_level(st_hetero); });
      std::vector<MethodKind> methods;
      for (const auto& m : st_methods) methods.push_back(as_usage([&] { return parse_method_kind(m); }));
      return suite_run(stress_suite(env, lvl, methods, seed_range(st_seeds)), st_flags, st_ckpt, st_jobs, st_out);
    }

    if (rep->parsed()) {
      ResultsFile results;
      try {
        results = read_results(rep_results);
      } catch (const std::exception& e) {
        throw IoError(e.what());
      }
      const auto tables = report_tables(results.runs);
      for (const auto& [name, table] : tables) out << "== " << name << " ==\n" << table.to_text() << '\n';
      if (!rep_csv.empty()) {
        const fs::path dir = resolve_out(rep_csv);
        std::error_code ec;
        fs::create_directories(dir, ec);
        for (const auto& [name, table] : tables) {
          std::ofstream f(dir / (name + ".csv"), std::ios::binary);
          if (!f) throw IoError("cannot write '" + (dir / (name + ".csv")).string() + "'");
          f << table.to_csv();
        }
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: io: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "error: schema: " << e.what() << '\n';
    return kExitIo;
  } catch (const CheckpointError& e) {
    err << "error: io: " << e.what() << '\n';
    return kExitIo;
  } catch (const RunFailure& e) {
    err << "error: run: " << e.what() << '\n';
    return kExitRunFailure;
  } catch (const std::invalid_argument& e) {
    err << "error: usage: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: run: " << e.what() << '\n';
    return kExitRunFailure;
  }
  err << "error: usage: no subcommand\n";
  return kExitUsage;
}

}  // namespace dcada
