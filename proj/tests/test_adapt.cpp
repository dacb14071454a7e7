#include <doctest.h>

#include "dcada/adapt.hpp"
#include "gradcheck.hpp"

using namespace dcada;

namespace {

struct Fixture {
  EnvSpec spec = make_env_spec(EnvKind::mapping);
  HeterogeneityLevel level = builtin_level(HeteroLevel::H3);
  FrozenPolicy policy = make_policy(spec);
  RolloutContext ctx{&spec, &level, &policy, StressSpec{}};

  static FrozenPolicy make_policy(const EnvSpec& spec) {
    Rng rng(2024);
    return FrozenPolicy(spec.kind, testing::test_policy(spec.obs_dim(), rng, 32));
  }
};

MethodConfig method_of(MethodKind kind) {
  MethodConfig m;
  m.kind = kind;
  return m;
}

}  // namespace

TEST_SUITE("adapt") {
  TEST_CASE("accept rule") {
    const std::vector<double> r{0.9, 1.2, 1.1};
    const auto d = decide_accept(1.0, r, 0.0, false);
    CHECK(d.accepted);
    CHECK(d.best_index == 1);
    CHECK(d.improvement == doctest::Approx(0.2));

    const std::vector<double> tie{1.0, 0.5};
    CHECK_FALSE(decide_accept(1.0, tie, 0.0, false).accepted);
    CHECK(decide_accept(1.0, tie, 0.0, true).accepted);
    CHECK_FALSE(decide_accept(1.0, r, 0.25, false).accepted);

    const std::vector<double> dup{2.0, 2.0};
    CHECK(decide_accept(0.0, dup, 0.0, false).best_index == 0);
  }

  TEST_CASE("candidate horizon") {
    CHECK(candidate_horizon(0.25, 500) == 125);
    CHECK(candidate_horizon(0.125, 500) == 63);
    CHECK(candidate_horizon(0.5, 500) == 250);
    CHECK(candidate_horizon(1e-6, 500) == 1);
  }

  TEST_CASE("method names") {
    for (auto k : {MethodKind::shared_policy, MethodKind::obs_norm, MethodKind::random_perturb,
                   MethodKind::local_finetune, MethodKind::dc_ada})
      CHECK(parse_method_kind(to_string(k)) == k);
    CHECK_THROWS_WITH_AS(parse_method_kind("maml"), doctest::Contains("maml"), std::invalid_argument);
  }

  TEST_CASE("ledger rejects overdraw") {
    BudgetLedger ledger(100);
    ledger.charge(LedgerCategory::nominal, 60);
    CHECK(ledger.remaining() == 40);
    CHECK_THROWS_AS(ledger.charge(LedgerCategory::nominal, 41), std::logic_error);
    CHECK(ledger.used() == 60);
    ledger.record_rollout(LedgerCategory::nominal);
    CHECK(ledger.scalar_feedback_bytes() == 8);
  }

  TEST_CASE("one DC-Ada round costs N (M+1) Tc steps") {
    Fixture f;
    AdaptMethod method(method_of(MethodKind::dc_ada), f.spec.obs_dim());
    BudgetLedger ledger(100000);
    Rng rng(5);
    const auto report = dcada_round(method, f.ctx, ledger, rng);
    CHECK(report.robots_evaluated == 4);
    CHECK_FALSE(report.aborted);
    CHECK(ledger.used() == 4500);
    CHECK(ledger.used_in(LedgerCategory::baseline_rollout) == 500);
    CHECK(ledger.used_in(LedgerCategory::candidate_rollout) == 4000);
    CHECK(ledger.rollouts() == 36);
    CHECK(ledger.scalar_feedback_bytes() == 288);
  }

  TEST_CASE("round stops before a robot it cannot afford") {
    Fixture f;
    AdaptMethod method(method_of(MethodKind::dc_ada), f.spec.obs_dim());
    BudgetLedger ledger(2000);
    Rng rng(5);
    const auto report = dcada_round(method, f.ctx, ledger, rng);
    CHECK(report.robots_evaluated == 1);
    CHECK(report.aborted);
    CHECK(method.stats().adaptation_stopped);
    CHECK(ledger.used() == 1125);
  }

  TEST_CASE("CRN with vanishing sigma reproduces the baseline return") {
    Fixture f;
    auto cfg = method_of(MethodKind::dc_ada);
    cfg.dc_ada.sigma = 1e-200;
    cfg.dc_ada.M = 3;
    AdaptMethod method(cfg, f.spec.obs_dim());
    BudgetLedger ledger(100000);
    Rng rng(6);
    const auto report = dcada_round(method, f.ctx, ledger, rng);
    for (const auto& d : report.decisions) {
      CHECK(d.improvement == 0.0);
      CHECK_FALSE(d.accepted);
    }
    for (const auto& phi : method.adapters()) CHECK(phi.is_zero());
  }

  TEST_CASE("accepted step moves phi by alpha sigma eps") {
    Fixture f;
    auto cfg = method_of(MethodKind::dc_ada);
    cfg.dc_ada.always_accept_best = true;
    cfg.dc_ada.sigma = 0.1;
    AdaptMethod method(cfg, f.spec.obs_dim());
    BudgetLedger ledger(100000);
    Rng rng(7);
    dcada_round(method, f.ctx, ledger, rng);
    CHECK(method.stats().accepts == 4);
    for (const auto& phi : method.adapters()) CHECK_FALSE(phi.is_zero());
  }

  TEST_CASE("nominal episode is truncated by the budget") {
    Fixture f;
    AdaptMethod method(method_of(MethodKind::shared_policy), f.spec.obs_dim());
    BudgetLedger ledger(50);
    const auto log = run_nominal_episode(method, f.ctx, ledger, EpisodeSeed{1}, 0);
    CHECK(log.length == 50);
    CHECK(log.truncated);
    CHECK(ledger.used() == 50);
    CHECK(ledger.remaining() == 0);
  }

  TEST_CASE("a full nominal episode charges its length and 8 bytes") {
    Fixture f;
    AdaptMethod method(method_of(MethodKind::shared_policy), f.spec.obs_dim());
    BudgetLedger ledger(5000);
    const auto log = run_nominal_episode(method, f.ctx, ledger, EpisodeSeed{1}, 0);
    CHECK_FALSE(log.truncated);
    CHECK(ledger.used() == log.length);
    CHECK(ledger.scalar_feedback_bytes() == 8);
  }

  TEST_CASE("zero adapters match the bare policy bit for bit") {
    Fixture f;
    const std::vector<nets::AdapterParams> zeros(4, nets::AdapterParams::zeros(f.spec.obs_dim()));
    for (std::uint64_t s = 0; s < 3; ++s) {
      const auto a = rollout(f.ctx, TransformChain{}, EpisodeSeed{s}, 200);
      const auto b = rollout(f.ctx, TransformChain{zeros, nullptr}, EpisodeSeed{s}, 200);
      CHECK(a.trajectory_digest == b.trajectory_digest);
      CHECK(a.ret == b.ret);
    }
  }

  TEST_CASE("observation normalizer") {
    ObsNormalizer norm(3);
    Eigen::VectorXd first(3);
    first << 4.0, -2.0, 7.0;
    CHECK(norm.transform(0, first).isZero(0.0));
    Rng rng(8);
    std::vector<Eigen::VectorXd> seen{first};
    for (int k = 0; k < 200; ++k) {
      Eigen::VectorXd o = testing::random_mat(rng, 3, 1, 2.0);
      o[1] += 5.0;
      norm.transform(0, o);
      seen.push_back(o);
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
    for (const auto& o : seen) mean += o;
    mean /= static_cast<double>(seen.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(3);
    for (const auto& o : seen) var += (o - mean).array().square().matrix();
    var /= static_cast<double>(seen.size());
    CHECK((norm.mean(0) - mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((norm.variance(0) - var).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(norm.count(0) == 201);
    CHECK(norm.count(1) == 0);
  }

  TEST_CASE("random perturbation with zero sigma leaves adapters at zero") {
    auto cfg = method_of(MethodKind::random_perturb);
    cfg.random_perturb.sigma = 0.0;
    AdaptMethod method(cfg, 70);
    Rng rng(9);
    for (int k = 0; k < 5; ++k) random_perturb_round(method, rng);
    for (const auto& phi : method.adapters()) CHECK(phi.is_zero());
    CHECK(method.stats().perturbations == 5);
  }

  TEST_CASE("fine-tune surrogate gradient matches finite differences") {
    const auto r = testing::check_finetune_gradients(5, 15);
    CAPTURE(r.worst_rel);
    CHECK(r.ok());
  }

  TEST_CASE("fine-tune with zero learning rate leaves adapters unchanged") {
    Fixture f;
    auto cfg = method_of(MethodKind::local_finetune);
    cfg.local_finetune.lr = 0.0;
    AdaptMethod method(cfg, f.spec.obs_dim());
    BudgetLedger ledger(1000);
    CHECK(finetune_episode(method, f.ctx, ledger, EpisodeSeed{3}));
    CHECK(ledger.used_in(LedgerCategory::finetune_rollout) == 125);
    for (const auto& phi : method.adapters()) CHECK(phi.is_zero());
  }

  TEST_CASE("fine-tune step changes adapters") {
    Fixture f;
    auto cfg = method_of(MethodKind::local_finetune);
    cfg.local_finetune.lr = 1e-2;
    AdaptMethod method(cfg, f.spec.obs_dim());
    BudgetLedger ledger(1000);
    CHECK(finetune_episode(method, f.ctx, ledger, EpisodeSeed{3}));
    CHECK(method.stats().finetune_updates == 1);
    int moved = 0;
    for (const auto& phi : method.adapters()) moved += phi.is_zero() ? 0 : 1;
    CHECK(moved > 0);
  }

  TEST_CASE("returns to go") {
    const std::vector<double> r{1.0, 2.0, 3.0};
    const auto g = returns_to_go(r, 0.5);
    CHECK(g[2] == 3.0);
    CHECK(g[1] == 3.5);
    CHECK(g[0] == 2.75);
  }

  TEST_CASE("config validation") {
    DcAdaConfig d;
    d.M = 0;
    CHECK_THROWS(d.validate());
    DcAdaConfig s;
    s.sigma = -1.0;
    CHECK_THROWS(s.validate());
    FinetuneConfig ft;
    ft.gamma = 1.5;
    CHECK_THROWS(ft.validate());
    CHECK_NOTHROW(DcAdaConfig{}.validate());
  }
}
