#include "dcada/pretrain.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dcada {

namespace {

using nets::Mat;
using nets::Vec;

std::array<Vec2, kNumRobots> to_actions(const Mat& a) {
  std::array<Vec2, kNumRobots> out{};
  for (int i = 0; i < kNumRobots; ++i) out[static_cast<std::size_t>(i)] = {a(0, i), a(1, i)};
  return out;
}

class Optimizer {
 public:
  Optimizer(PretrainOptimizer kind, std::size_t size, double lr) : kind_(kind), lr_(lr), adam_(size, lr) {}

  /// Descent step on params.
  void step(Vec& params, const Vec& grad) {
    if (lr_ == 0.0) return;
    if (kind_ == PretrainOptimizer::adam)
      adam_.step(params, grad);
    else
      params -= lr_ * grad;
  }

 private:
  PretrainOptimizer kind_;
  double lr_;
  nets::Adam adam_;
};

[[noreturn]] void diverged(std::int64_t step, const char* what) {
  throw std::runtime_error("pretraining diverged at step " + std::to_string(step) + ": non-finite " + what);
}

}  // namespace

std::string_view to_string(PretrainOptimizer opt) { return opt == PretrainOptimizer::adam ? "adam" : "sgd"; }

PretrainOptimizer parse_optimizer(std::string_view name) {
  if (name == "adam") return PretrainOptimizer::adam;
  if (name == "sgd") return PretrainOptimizer::sgd;
  throw std::invalid_argument("invalid optimizer '" + std::string(name) + "' (expected adam or sgd)");
}

double default_reward_scale(EnvKind kind) {
  switch (kind) {
    case EnvKind::warehouse:
      return 0.1;
    case EnvKind::search_rescue:
      return 0.2;
    case EnvKind::mapping:
      return 0.01;
  }
  return 1.0;
}

void PretrainConfig::validate() const {
  if (total_steps <= 0) throw std::invalid_argument("total_steps must be positive");
  if (rollout_length <= 0) throw std::invalid_argument("rollout_length must be positive");
  if (!(lr_policy >= 0.0) || !(lr_value >= 0.0)) throw std::invalid_argument("learning rates must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(entropy_coef >= 0.0)) throw std::invalid_argument("entropy_coef must be >= 0");
  if (!(grad_clip > 0.0)) throw std::invalid_argument("grad_clip must be positive");
  if (hidden < 1 || value_hidden < 1) throw std::invalid_argument("hidden widths must be positive");
}

double PretrainConfig::effective_reward_scale() const {
  return reward_scale > 0.0 ? reward_scale : default_reward_scale(env.kind);
}

nlohmann::json PretrainConfig::to_json() const {
  return {{"env", to_string(env.kind)},
          {"total_steps", total_steps},
          {"rollout_length", rollout_length},
          {"lr_policy", lr_policy},
          {"lr_value", lr_value},
          {"gamma", gamma},
          {"entropy_coef", entropy_coef},
          {"grad_clip", grad_clip},
          {"seed", seed.value},
          {"optimizer", to_string(optimizer)},
          {"reward_scale", effective_reward_scale()},
          {"hidden", hidden},
          {"value_hidden", value_hidden}};
}

double evaluate_deterministic(const nets::PolicyParams& policy, const EnvSpec& spec,
                              const HeterogeneityLevel& level, RunSeed run, int episodes) {
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EpisodeState s = reset(spec, derive_episode_seed(run, static_cast<std::uint64_t>(e)));
    double ret = 0.0;
    while (!s.done) {
      const Mat obs = observe(s, spec, level);
      const auto actions = to_actions(nets::deterministic_actions(policy, obs));
      ret += step(spec, s, actions).reward;
    }
    total += ret;
  }
  return episodes > 0 ? total / episodes : 0.0;
}

PretrainResult pretrain(const PretrainConfig& config, const ProgressCallback& progress) {
  config.validate();
  const EnvSpec& spec = config.env;
  const HeterogeneityLevel level = builtin_level(HeteroLevel::H0);
  const int d = spec.obs_dim();
  const double scale = config.effective_reward_scale();

  Rng init_rng = run_stream(config.seed, StreamPurpose::env);
  Rng policy_rng = run_stream(config.seed, StreamPurpose::policy);
  nets::PolicyParams policy = nets::init_policy(d, init_rng, config.hidden);
  nets::ValueParams value = nets::init_value(d, init_rng, config.value_hidden);
  Vec policy_flat = nets::pack(policy);
  Vec value_flat = nets::pack(value);
  Optimizer policy_opt(config.optimizer, static_cast<std::size_t>(policy_flat.size()), config.lr_policy);
  Optimizer value_opt(config.optimizer, static_cast<std::size_t>(value_flat.size()), config.lr_value);

  PretrainResult result;
  result.report.config = config.to_json();

  std::int64_t episode_index = 0;
  EpisodeState state = reset(spec, derive_episode_seed(config.seed, 0));
  double episode_return = 0.0;
  double last_mean = 0.0;
  std::int64_t steps = 0;

  const int N = kNumRobots;
  while (steps < config.total_steps) {
    const int L = static_cast<int>(std::min<std::int64_t>(config.rollout_length, config.total_steps - steps));
    Mat obs(d, static_cast<Eigen::Index>(L) * N);
    Mat u(nets::kActionDim, static_cast<Eigen::Index>(L) * N);
    std::vector<double> rewards(static_cast<std::size_t>(L));
    std::vector<bool> terminal(static_cast<std::size_t>(L));
    double completed_sum = 0.0;
    int completed = 0;

    for (int t = 0; t < L; ++t) {
      const Mat o = observe(state, spec, level);
      const auto heads = nets::policy_forward(policy, o);
      Mat ut(nets::kActionDim, N);
      for (int i = 0; i < N; ++i) {
        const auto noise = gaussian(policy_rng, nets::kActionDim);
        for (int j = 0; j < nets::kActionDim; ++j)
          ut(j, i) = heads.mean(j, i) + std::exp(heads.logstd(j, i)) * noise[static_cast<std::size_t>(j)];
      }
      obs.middleCols(static_cast<Eigen::Index>(t) * N, N) = o;
      u.middleCols(static_cast<Eigen::Index>(t) * N, N) = ut;
      const auto r = step(spec, state, to_actions(ut.array().tanh().matrix()));
      if (!std::isfinite(r.reward)) diverged(steps + t, "reward");
      rewards[static_cast<std::size_t>(t)] = r.reward;
      episode_return += r.reward;
      terminal[static_cast<std::size_t>(t)] = state.done;
      if (state.done) {
        completed_sum += episode_return;
        ++completed;
        episode_return = 0.0;
        ++episode_index;
        state = reset(spec, derive_episode_seed(config.seed, static_cast<std::uint64_t>(episode_index)));
      }
    }
    steps += L;

    // Bootstrap from the team value of the next state when the rollout cuts an episode.
    double bootstrap = 0.0;
    if (!terminal.back()) bootstrap = nets::value_forward(value, observe(state, spec, level)).mean();

    std::vector<double> returns(static_cast<std::size_t>(L));
    double acc = bootstrap;
    for (int t = L; t-- > 0;) {
      if (terminal[static_cast<std::size_t>(t)]) acc = 0.0;
      acc = scale * rewards[static_cast<std::size_t>(t)] + config.gamma * acc;
      returns[static_cast<std::size_t>(t)] = acc;
    }

    nets::ValueCache vcache;
    const Mat v_per_robot = nets::value_forward(value, obs, &vcache);
    Vec team_v(L);
    for (int t = 0; t < L; ++t) team_v[t] = v_per_robot.middleCols(static_cast<Eigen::Index>(t) * N, N).mean();
    const Eigen::Map<const Vec> G(returns.data(), L);
    Vec adv = G - team_v;
    const double value_loss = (team_v - G).squaredNorm() / L;
    if (!std::isfinite(value_loss)) diverged(steps, "value loss");

    if (L > 1) {
      const double mu = adv.mean();
      const double sd = std::sqrt((adv.array() - mu).square().mean());
      adv = (adv.array() - mu) / (sd + 1e-8);
    }

    nets::PolicyCache pcache;
    const auto heads = nets::policy_forward(policy, obs, &pcache);
    Mat dlp_mean, dlp_logstd;
    const Vec lp = nets::squashed_logprob(heads.mean, heads.logstd, u, &dlp_mean, &dlp_logstd);
    const Vec ent = nets::gaussian_entropy(heads.logstd);
    const double count = static_cast<double>(L) * N;
    Eigen::RowVectorXd adv_col(static_cast<Eigen::Index>(L) * N);
    for (int t = 0; t < L; ++t) adv_col.segment(static_cast<Eigen::Index>(t) * N, N).setConstant(adv[t]);
    const double policy_loss = -(lp.transpose().array() * adv_col.array()).sum() / count -
                               config.entropy_coef * ent.sum() / count;
    if (!std::isfinite(policy_loss)) diverged(steps, "policy loss");

    const Mat d_mean = -(dlp_mean * adv_col.asDiagonal()) / count;
    const Mat d_logstd = (-(dlp_logstd * adv_col.asDiagonal()) / count).array() - config.entropy_coef / count;
    nets::PolicyParams pgrad = nets::PolicyParams::zeros(d, config.hidden);
    nets::policy_backward(policy, pcache, d_mean, d_logstd, &pgrad, nullptr);

    Mat d_v(1, static_cast<Eigen::Index>(L) * N);
    for (int t = 0; t < L; ++t)
      d_v.middleCols(static_cast<Eigen::Index>(t) * N, N).setConstant(2.0 * (team_v[t] - G[t]) / L / N);
    nets::ValueParams vgrad = nets::ValueParams::zeros(d, config.value_hidden);
    nets::value_backward(value, vcache, d_v, &vgrad);

    Vec pg = nets::pack(pgrad);
    Vec vg = nets::pack(vgrad);
    if (!pg.allFinite() || !vg.allFinite()) diverged(steps, "gradient");
    nets::clip_by_norm(pg, config.grad_clip);
    nets::clip_by_norm(vg, config.grad_clip);
    policy_opt.step(policy_flat, pg);
    value_opt.step(value_flat, vg);
    if (!policy_flat.allFinite() || !value_flat.allFinite()) diverged(steps, "parameters");
    policy = nets::unpack_policy(policy_flat, d, config.hidden);
    value = nets::unpack_value(value_flat, d, config.value_hidden);

    if (completed > 0) last_mean = completed_sum / completed;
    const CurvePoint point{steps, last_mean, completed};
    result.report.curve.push_back(point);
    if (progress) progress(point);
  }

  result.report.episodes = episode_index;
  result.checkpoint.env = spec.kind;
  result.checkpoint.obs_dim = d;
  result.checkpoint.policy = std::move(policy);
  result.checkpoint.meta = {{"pretrain", result.report.config}, {"episodes", episode_index}};
  return result;
}

}  // namespace dcada
