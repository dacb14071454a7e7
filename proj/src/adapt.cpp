#include "dcada/adapt.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace dcada {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) {
    h ^= (bits >> (8 * b)) & 0xffU;
    h *= kFnvPrime;
  }
}

std::array<Vec2, kNumRobots> to_actions(const Eigen::MatrixXd& a) {
  std::array<Vec2, kNumRobots> out{};
  for (int i = 0; i < kNumRobots; ++i) out[static_cast<std::size_t>(i)] = {a(0, i), a(1, i)};
  return out;
}

void finish_result(RolloutResult& r, const EpisodeState& s) {
  r.success = s.success;
  r.done = s.done;
  r.progress = progress(s);
  r.terminal_metric = terminal_metric(s);
}

void require_context(const RolloutContext& ctx) {
  if (!ctx.spec || !ctx.level || !ctx.policy) throw std::invalid_argument("incomplete rollout context");
}

}  // namespace

std::string_view to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::shared_policy:
      return "shared_policy";
    case MethodKind::obs_norm:
      return "obs_norm";
    case MethodKind::random_perturb:
      return "random_perturb";
    case MethodKind::local_finetune:
      return "local_finetune";
    case MethodKind::dc_ada:
      return "dc_ada";
  }
  return "unknown";
}

MethodKind parse_method_kind(std::string_view name) {
  for (auto k : {MethodKind::shared_policy, MethodKind::obs_norm, MethodKind::random_perturb,
                 MethodKind::local_finetune, MethodKind::dc_ada})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("invalid method '" + std::string(name) +
                              "' (expected shared_policy, obs_norm, random_perturb, local_finetune or dc_ada)");
}

void DcAdaConfig::validate() const {
  if (K < 1) throw std::invalid_argument("dc_ada.K must be >= 1");
  if (M < 1) throw std::invalid_argument("dc_ada.M must be >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("dc_ada.sigma must be >= 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("dc_ada.alpha must be > 0");
  if (!always_accept_best && !(tau >= 0.0)) throw std::invalid_argument("dc_ada.tau must be >= 0");
  if (!(tc_fraction > 0.0 && tc_fraction <= 1.0))
    throw std::invalid_argument("dc_ada.tc_fraction must be in (0, 1]");
  if (seeds_per_decision < 1) throw std::invalid_argument("dc_ada.seeds_per_decision must be >= 1");
}

void RandomPerturbConfig::validate() const {
  if (K < 1) throw std::invalid_argument("random_perturb.K must be >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("random_perturb.sigma must be >= 0");
}

void FinetuneConfig::validate() const {
  if (K < 1) throw std::invalid_argument("local_finetune.K must be >= 1");
  if (!(tc_fraction > 0.0 && tc_fraction <= 1.0))
    throw std::invalid_argument("local_finetune.tc_fraction must be in (0, 1]");
  if (!(lr >= 0.0)) throw std::invalid_argument("local_finetune.lr must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("local_finetune.gamma must be in (0, 1]");
  if (!(entropy_coef >= 0.0)) throw std::invalid_argument("local_finetune.entropy_coef must be >= 0");
  if (!(grad_clip > 0.0)) throw std::invalid_argument("local_finetune.grad_clip must be > 0");
}

int candidate_horizon(double tc_fraction, int horizon) {
  return std::max(1, static_cast<int>(std::lround(tc_fraction * horizon)));
}

std::string_view to_string(LedgerCategory c) {
  switch (c) {
    case LedgerCategory::nominal:
      return "nominal";
    case LedgerCategory::baseline_rollout:
      return "baseline_rollout";
    case LedgerCategory::candidate_rollout:
      return "candidate_rollout";
    case LedgerCategory::finetune_rollout:
      return "finetune_rollout";
  }
  return "unknown";
}

BudgetLedger::BudgetLedger(std::int64_t budget) : budget_(budget) {
  if (budget <= 0) throw std::invalid_argument("budget must be positive");
}

void BudgetLedger::charge(LedgerCategory c, std::int64_t steps) {
  if (steps < 0) throw std::invalid_argument("negative charge");
  if (steps > remaining()) throw std::logic_error("charge exceeds remaining budget");
  used_ += steps;
  by_category_[static_cast<std::size_t>(c)] += steps;
}

void BudgetLedger::record_rollout(LedgerCategory c) {
  ++rollouts_;
  ++rollouts_by_category_[static_cast<std::size_t>(c)];
}

ObsNormalizer::ObsNormalizer(int dim, double epsilon) : dim_(dim), epsilon_(epsilon) { reset(); }

void ObsNormalizer::reset() {
  for (std::size_t i = 0; i < kNumRobots; ++i) {
    count_[i] = 0;
    mean_[i] = Eigen::VectorXd::Zero(dim_);
    m2_[i] = Eigen::VectorXd::Zero(dim_);
  }
}

Eigen::VectorXd ObsNormalizer::transform(int robot, const Eigen::VectorXd& o) {
  const auto i = static_cast<std::size_t>(robot);
  ++count_[i];
  const Eigen::VectorXd delta = o - mean_[i];
  mean_[i] += delta / static_cast<double>(count_[i]);
  m2_[i].array() += delta.array() * (o - mean_[i]).array();
  return ((o - mean_[i]).array() / (variance(robot).array() + epsilon_).sqrt()).matrix();
}

Eigen::VectorXd ObsNormalizer::variance(int robot) const {
  const auto i = static_cast<std::size_t>(robot);
  if (count_[i] == 0) return Eigen::VectorXd::Zero(dim_);
  return m2_[i] / static_cast<double>(count_[i]);
}

Eigen::MatrixXd TransformChain::apply(const Eigen::MatrixXd& obs) const {
  if (!normalizer && adapters.empty()) return obs;
  Eigen::MatrixXd out = obs;
  for (int i = 0; i < kNumRobots; ++i) {
    Eigen::VectorXd col = out.col(i);
    if (normalizer) col = normalizer->transform(i, col);
    if (!adapters.empty()) col = nets::adapter_forward(adapters[static_cast<std::size_t>(i)], col);
    out.col(i) = col;
  }
  return out;
}

RolloutResult rollout(const RolloutContext& ctx, const TransformChain& tf, EpisodeSeed seed,
                      int max_steps) {
  require_context(ctx);
  const EnvSpec& spec = *ctx.spec;
  EpisodeState s = reset(spec, seed);
  StressProcess stress(ctx.stress, spec.layout());
  RolloutResult r;
  r.trajectory_digest = kFnvOffset;
  while (!s.done && r.length < max_steps) {
    Eigen::MatrixXd obs = observe(s, spec, *ctx.level);
    stress.apply(obs, s.env_rng);
    const Eigen::MatrixXd a = nets::deterministic_actions(ctx.policy->params(), tf.apply(obs));
    const auto actions = to_actions(a);
    r.ret += step(spec, s, actions).reward;
    ++r.length;
    for (const auto& robot : s.robots) {
      fnv_mix(r.trajectory_digest, robot.position.x);
      fnv_mix(r.trajectory_digest, robot.position.y);
    }
  }
  finish_result(r, s);
  return r;
}

SampledRollout sampled_rollout(const RolloutContext& ctx, std::span<const nets::AdapterParams> adapters,
                               EpisodeSeed seed, int max_steps, Rng& policy_rng) {
  require_context(ctx);
  const EnvSpec& spec = *ctx.spec;
  const auto& policy = ctx.policy->params();
  EpisodeState s = reset(spec, seed);
  StressProcess stress(ctx.stress, spec.layout());
  const TransformChain tf{adapters, nullptr};
  SampledRollout out;
  out.result.trajectory_digest = kFnvOffset;
  while (!s.done && out.result.length < max_steps) {
    Eigen::MatrixXd obs = observe(s, spec, *ctx.level);
    stress.apply(obs, s.env_rng);
    const auto heads = nets::policy_forward(policy, tf.apply(obs));
    Eigen::MatrixXd u(nets::kActionDim, kNumRobots);
    for (int i = 0; i < kNumRobots; ++i) {
      const auto noise = gaussian(policy_rng, nets::kActionDim);
      for (int j = 0; j < nets::kActionDim; ++j)
        u(j, i) = heads.mean(j, i) + std::exp(heads.logstd(j, i)) * noise[static_cast<std::size_t>(j)];
    }
    const auto actions = to_actions(u.array().tanh().matrix());
    const double reward = step(spec, s, actions).reward;
    out.raw_obs.push_back(std::move(obs));
    out.u.push_back(u);
    out.rewards.push_back(reward);
    out.result.ret += reward;
    ++out.result.length;
    for (const auto& robot : s.robots) {
      fnv_mix(out.result.trajectory_digest, robot.position.x);
      fnv_mix(out.result.trajectory_digest, robot.position.y);
    }
  }
  finish_result(out.result, s);
  return out;
}

std::vector<double> returns_to_go(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

AcceptDecision decide_accept(double baseline, std::span<const double> candidate_returns, double tau,
                             bool always_accept_best) {
  AcceptDecision d;
  if (candidate_returns.empty()) return d;
  d.best_index = 0;
  for (std::size_t m = 1; m < candidate_returns.size(); ++m)
    if (candidate_returns[m] > candidate_returns[static_cast<std::size_t>(d.best_index)])
      d.best_index = static_cast<int>(m);
  d.best_return = candidate_returns[static_cast<std::size_t>(d.best_index)];
  d.improvement = d.best_return - baseline;
  d.accepted = always_accept_best || d.improvement > tau;
  return d;
}

AdaptMethod::AdaptMethod(const MethodConfig& config, int obs_dim)
    : config_(config), normalizer_(obs_dim, config.obs_norm.epsilon) {
  switch (config_.kind) {
    case MethodKind::dc_ada:
      config_.dc_ada.validate();
      break;
    case MethodKind::random_perturb:
      config_.random_perturb.validate();
      break;
    case MethodKind::local_finetune:
      config_.local_finetune.validate();
      break;
    default:
      break;
  }
  adapters_.assign(kNumRobots, nets::AdapterParams::zeros(obs_dim));
}

TransformChain AdaptMethod::transforms() {
  switch (config_.kind) {
    case MethodKind::shared_policy:
      return {};
    case MethodKind::obs_norm:
      return {{}, &normalizer_};
    default:
      return {adapters_, nullptr};
  }
}

EpisodeLog run_nominal_episode(AdaptMethod& method, const RolloutContext& ctx, BudgetLedger& ledger,
                               EpisodeSeed seed, std::int64_t index) {
  if (ledger.remaining() < 1) throw std::logic_error("nominal episode with no budget left");
  const int cap = static_cast<int>(std::min<std::int64_t>(ctx.spec->horizon, ledger.remaining()));
  const RolloutResult r = rollout(ctx, method.transforms(), seed, cap);
  ledger.charge(LedgerCategory::nominal, r.length);
  ledger.record_rollout(LedgerCategory::nominal);
  return EpisodeLog{index, seed.value, r.length, r.ret, r.success, r.progress, r.terminal_metric,
                    r.trajectory_digest, !r.done};
}

RoundReport dcada_round(AdaptMethod& method, const RolloutContext& ctx, BudgetLedger& ledger,
                        Rng& round_rng) {
  require_context(ctx);
  const DcAdaConfig& cfg = method.config().dc_ada;
  const int tc = candidate_horizon(cfg.tc_fraction, ctx.spec->horizon);
  const int S = cfg.seeds_per_decision;
  const std::int64_t robot_cost = static_cast<std::int64_t>(cfg.M + 1) * S * tc;
  auto& adapters = method.adapters();
  auto& stats = method.stats();
  const auto flat_size = static_cast<std::size_t>(adapters.front().flat.size());

  auto draw_seeds = [&] {
    std::vector<EpisodeSeed> seeds(static_cast<std::size_t>(S));
    for (auto& s : seeds) s = EpisodeSeed{round_rng.next_u64()};
    return seeds;
  };
  auto evaluate = [&](const std::vector<EpisodeSeed>& seeds, LedgerCategory cat) {
    double total = 0.0;
    for (const auto seed : seeds) {
      const RolloutResult r = rollout(ctx, TransformChain{adapters, nullptr}, seed, tc);
      ledger.charge(cat, r.length);
      ledger.record_rollout(cat);
      total += r.ret;
    }
    return total / static_cast<double>(seeds.size());
  };

  RoundReport report;
  ++stats.rounds;
  for (int i = 0; i < kNumRobots; ++i) {
    if (ledger.remaining() < robot_cost) {
      report.aborted = true;
      stats.adaptation_stopped = true;
      break;
    }
    auto& phi = adapters[static_cast<std::size_t>(i)];
    const std::vector<EpisodeSeed> seeds = draw_seeds();
    const double r0 = evaluate(seeds, LedgerCategory::baseline_rollout);

    std::vector<Eigen::VectorXd> eps;
    eps.reserve(static_cast<std::size_t>(cfg.M));
    for (int m = 0; m < cfg.M; ++m) {
      const auto g = gaussian(round_rng, flat_size);
      eps.emplace_back(Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())));
    }

    const Eigen::VectorXd current = phi.flat;
    std::vector<double> returns(static_cast<std::size_t>(cfg.M));
    for (int m = 0; m < cfg.M; ++m) {
      phi.flat = current + cfg.sigma * eps[static_cast<std::size_t>(m)];
      const auto cand_seeds = cfg.crn ? seeds : draw_seeds();
      returns[static_cast<std::size_t>(m)] = evaluate(cand_seeds, LedgerCategory::candidate_rollout);
    }
    phi.flat = current;

    const AcceptDecision d = decide_accept(r0, returns, cfg.tau, cfg.always_accept_best);
    if (d.accepted) {
      phi.flat = current + cfg.alpha * cfg.sigma * eps[static_cast<std::size_t>(d.best_index)];
      ++stats.accepts;
    }
    ++stats.robot_decisions;
    ++report.robots_evaluated;
    report.decisions.push_back(d);
  }
  return report;
}

void random_perturb_round(AdaptMethod& method, Rng& round_rng) {
  const double sigma = method.config().random_perturb.sigma;
  for (auto& phi : method.adapters()) {
    const auto g = gaussian(round_rng, static_cast<std::size_t>(phi.flat.size()));
    phi.flat += sigma * Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  }
  ++method.stats().perturbations;
}

double finetune_surrogate(const nets::PolicyParams& policy, const nets::AdapterParams& phi,
                          const Eigen::MatrixXd& obs, const Eigen::MatrixXd& u,
                          std::span<const double> returns, double entropy_coef, Eigen::VectorXd* grad) {
  const auto T = obs.cols();
  if (u.cols() != T || static_cast<Eigen::Index>(returns.size()) != T)
    throw std::invalid_argument("finetune_surrogate: mismatched lengths");
  const Eigen::Map<const Eigen::RowVectorXd> g(returns.data(), T);

  nets::AdapterCache acache;
  nets::PolicyCache pcache;
  const Eigen::MatrixXd x = nets::adapter_forward(phi, obs, grad ? &acache : nullptr);
  const auto heads = nets::policy_forward(policy, x, grad ? &pcache : nullptr);
  Eigen::MatrixXd d_mean, d_logstd;
  const Eigen::VectorXd lp = nets::squashed_logprob(heads.mean, heads.logstd, u, grad ? &d_mean : nullptr,
                                                    grad ? &d_logstd : nullptr);
  const Eigen::VectorXd ent = nets::gaussian_entropy(heads.logstd);
  const double value = lp.dot(g.transpose()) + entropy_coef * ent.sum();
  if (grad) {
    d_mean = d_mean * g.asDiagonal();
    d_logstd = (d_logstd * g.asDiagonal()).array() + entropy_coef;
    Eigen::MatrixXd d_x;
    nets::policy_backward(policy, pcache, d_mean, d_logstd, nullptr, &d_x);
    nets::adapter_backward(phi, acache, d_x, grad, nullptr);
  }
  return value;
}

bool finetune_episode(AdaptMethod& method, const RolloutContext& ctx, BudgetLedger& ledger,
                      EpisodeSeed seed) {
  require_context(ctx);
  const FinetuneConfig& cfg = method.config().local_finetune;
  const int tc = candidate_horizon(cfg.tc_fraction, ctx.spec->horizon);
  const int len = static_cast<int>(std::min<std::int64_t>(tc, ledger.remaining()));
  if (len <= 0) return false;
  auto& adapters = method.adapters();
  Rng policy_rng = spawn_stream(seed, StreamPurpose::policy);
  const SampledRollout sr = sampled_rollout(ctx, adapters, seed, len, policy_rng);
  ledger.charge(LedgerCategory::finetune_rollout, sr.result.length);
  ledger.record_rollout(LedgerCategory::finetune_rollout);
  const auto returns = returns_to_go(sr.rewards, cfg.gamma);
  const auto T = static_cast<Eigen::Index>(sr.rewards.size());
  if (T == 0) return false;

  const int d = ctx.spec->obs_dim();
  std::vector<Eigen::VectorXd> grads(kNumRobots);
  for (int i = 0; i < kNumRobots; ++i) {
    Eigen::MatrixXd obs(d, T), u(nets::kActionDim, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      obs.col(t) = sr.raw_obs[static_cast<std::size_t>(t)].col(i);
      u.col(t) = sr.u[static_cast<std::size_t>(t)].col(i);
    }
    auto& grad = grads[static_cast<std::size_t>(i)];
    finetune_surrogate(ctx.policy->params(), adapters[static_cast<std::size_t>(i)], obs, u, returns,
                       cfg.entropy_coef, &grad);
    if (!grad.allFinite()) {
      ++method.stats().finetune_skipped;
      return false;
    }
    nets::clip_by_norm(grad, cfg.grad_clip);
  }
  for (int i = 0; i < kNumRobots; ++i)
    adapters[static_cast<std::size_t>(i)].flat += cfg.lr * grads[static_cast<std::size_t>(i)];
  ++method.stats().finetune_updates;
  return true;
}

}  // namespace dcada
