#include <doctest.h>

#include "dcada/seeds.hpp"
#include "dcada/tasks.hpp"
#include "scene_replay.hpp"

using namespace dcada;

namespace {

const std::array<EnvKind, 3> kAllEnvs{EnvKind::warehouse, EnvKind::search_rescue, EnvKind::mapping};

std::vector<Vec2> random_actions(Rng& rng) {
  std::vector<Vec2> a;
  for (int i = 0; i < kNumRobots; ++i) a.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  return a;
}

const std::vector<Vec2> kStill(kNumRobots, Vec2{});

bool same_state(const EpisodeState& a, const EpisodeState& b) {
  if (a.arena.obstacles.size() != b.arena.obstacles.size()) return false;
  for (std::size_t i = 0; i < a.arena.obstacles.size(); ++i)
    if (!(a.arena.obstacles[i].center == b.arena.obstacles[i].center) ||
        a.arena.obstacles[i].radius != b.arena.obstacles[i].radius)
      return false;
  for (std::size_t i = 0; i < kNumRobots; ++i)
    if (!(a.robots[i].position == b.robots[i].position)) return false;
  if (a.packages.size() != b.packages.size() || a.victims.size() != b.victims.size()) return false;
  for (std::size_t i = 0; i < a.packages.size(); ++i)
    if (!(a.packages[i].position == b.packages[i].position)) return false;
  for (std::size_t i = 0; i < a.victims.size(); ++i)
    if (!(a.victims[i].position == b.victims[i].position)) return false;
  return a.explored == b.explored && a.counters == b.counters && a.env_rng.state() == b.env_rng.state();
}

}  // namespace

TEST_SUITE("tasks") {
  TEST_CASE("spec table") {
    CHECK(make_env_spec(EnvKind::warehouse).obs_dim() == 73);
    CHECK(make_env_spec(EnvKind::search_rescue).obs_dim() == 71);
    CHECK(make_env_spec(EnvKind::mapping).obs_dim() == 70);
    CHECK(make_env_spec(EnvKind::search_rescue).width == 30.0);
    for (auto k : kAllEnvs) CHECK(make_env_spec(k).horizon == 500);
    CHECK(parse_env_kind("search_rescue") == EnvKind::search_rescue);
    CHECK_THROWS_AS(parse_env_kind("kitchen"), std::invalid_argument);
  }

  TEST_CASE("reset is deterministic in the seed") {
    for (auto k : kAllEnvs) {
      const auto spec = make_env_spec(k);
      const auto a = reset(spec, derive_episode_seed(RunSeed{3}, 7));
      const auto b = reset(spec, derive_episode_seed(RunSeed{3}, 7));
      const auto c = reset(spec, derive_episode_seed(RunSeed{3}, 8));
      CHECK(same_state(a, b));
      CHECK_FALSE(same_state(a, c));
      CHECK(a.counters == Counters{});
      CHECK(a.t == 0);
    }
  }

  TEST_CASE("warehouse has two drop zones on opposing sides") {
    const auto spec = make_env_spec(EnvKind::warehouse);
    const auto s = reset(spec, EpisodeSeed{11});
    REQUIRE(s.drop_zones.size() == 2);
    CHECK(s.drop_zones[0].x < 0.25 * spec.width);
    CHECK(s.drop_zones[1].x > 0.75 * spec.width);
    CHECK(s.arena.obstacles.size() == 6);
    CHECK(s.packages.size() == 4);
  }

  TEST_CASE("property: entities and robots never overlap obstacles") {
    for (auto k : kAllEnvs) {
      const auto spec = make_env_spec(k);
      for (std::uint64_t idx = 0; idx < 300; ++idx) {
        const auto s = reset(spec, derive_episode_seed(RunSeed{5}, idx));
        for (const auto& o : s.arena.obstacles) {
          for (const auto& p : s.packages) REQUIRE(distance(p.position, o.center) > o.radius);
          for (const auto& v : s.victims) REQUIRE(distance(v.position, o.center) > o.radius);
          for (const auto& r : s.robots) REQUIRE(distance(r.position, o.center) >= o.radius + r.radius);
        }
      }
    }
  }

  TEST_CASE("warehouse: no events and no targets gives -0.1") {
    const auto spec = make_env_spec(EnvKind::warehouse);
    auto s = reset(spec, EpisodeSeed{1});
    for (auto& p : s.packages) p.delivered = true;
    CHECK(warehouse_target_distance(s, 0) == 20.0);
    CHECK(step_warehouse(spec, s, kStill).reward == doctest::Approx(-0.1).epsilon(1e-12));
  }

  TEST_CASE("warehouse: one delivery with all d_i = 20 gives 99.9") {
    const auto spec = make_env_spec(EnvKind::warehouse);
    auto s = reset(spec, EpisodeSeed{1});
    s.packages.resize(1);
    s.robots[0].position = {1.5, 10.0};
    s.packages[0] = Package{s.robots[0].position, 0, false};
    s.carrying = {0, -1, -1, -1};
    for (std::size_t k = 0; k < s.in_proximity.size(); ++k) s.in_proximity[k] = false;
    const auto r = step_warehouse(spec, s, kStill);
    CHECK(r.reward == doctest::Approx(99.9).epsilon(1e-12));
    CHECK(s.counters.delivered == 1);
    CHECK_FALSE(r.done);
    CHECK(r.progress == 0.5);
  }

  TEST_CASE("warehouse: second delivery ends the episode with success") {
    const auto spec = make_env_spec(EnvKind::warehouse);
    auto s = reset(spec, EpisodeSeed{1});
    s.counters.delivered = 1;
    s.robots[0].position = {1.5, 10.0};
    s.packages[0] = Package{s.robots[0].position, 0, false};
    s.carrying = {0, -1, -1, -1};
    const auto r = step_warehouse(spec, s, kStill);
    CHECK(r.success);
    CHECK(r.done);
    CHECK(r.progress == 1.0);
    CHECK_THROWS_AS(step(spec, s, kStill), std::logic_error);
  }

  TEST_CASE("search and rescue: no events gives -0.1 + 0.5 coverage") {
    const auto spec = make_env_spec(EnvKind::search_rescue);
    auto s = reset(spec, EpisodeSeed{2});
    for (auto& v : s.victims) v.rescued = true;
    const auto r = step_search_rescue(spec, s, kStill);
    CHECK(s.coverage > 0.0);
    CHECK(r.reward == doctest::Approx(-0.1 + 0.5 * s.coverage).epsilon(1e-12));
  }

  TEST_CASE("search and rescue: rescue at full health") {
    const auto spec = make_env_spec(EnvKind::search_rescue);
    auto s = reset(spec, EpisodeSeed{2});
    s.victims[0].position = s.robots[0].position;
    s.victims[0].found = true;
    for (std::size_t k = 1; k < s.victims.size(); ++k) s.victims[k].rescued = true;
    const auto r = step_search_rescue(spec, s, kStill);
    CHECK(r.reward == doctest::Approx(20.0 + 0.5 * s.coverage).epsilon(1e-12));
    CHECK(s.counters.rescued == 1);
  }

  TEST_CASE("mapping: coverage 0.5 and spread 2 gives 5.9") {
    const auto spec = make_env_spec(EnvKind::mapping);
    auto s = reset(spec, EpisodeSeed{3});
    s.arena.obstacles.clear();
    for (int iy = 0; iy < s.grid_ny / 2; ++iy)
      for (int ix = 0; ix < s.grid_nx; ++ix) s.explored[static_cast<std::size_t>(iy * s.grid_nx + ix)] = 1;
    s.explored_count = s.grid_nx * s.grid_ny / 2;
    s.coverage = 0.5;
    s.robots[0].position = {8.0, 5.0};
    s.robots[1].position = {12.0, 5.0};
    s.robots[2].position = {10.0, 3.0};
    s.robots[3].position = {10.0, 7.0};
    CHECK(team_spread(s) == doctest::Approx(2.0).epsilon(1e-12));
    const auto r = step_mapping(spec, s, kStill);
    CHECK(s.coverage == 0.5);
    CHECK(r.reward == doctest::Approx(5.9).epsilon(1e-12));
  }

  TEST_CASE("mapping: coincident team has zero spread; crossing 0.75 succeeds") {
    const auto spec = make_env_spec(EnvKind::mapping);
    auto s = reset(spec, EpisodeSeed{3});
    for (auto& r : s.robots) r.position = {4.0, 4.0};
    CHECK(team_spread(s) == 0.0);
    const auto need = static_cast<int>(0.75 * s.explored.size()) - 1;
    std::fill(s.explored.begin(), s.explored.end(), 0);
    for (int k = 0; k < need; ++k) s.explored[s.explored.size() - 1 - static_cast<std::size_t>(k)] = 1;
    s.explored_count = need;
    s.coverage = static_cast<double>(need) / static_cast<double>(s.explored.size());
    const auto r = step_mapping(spec, s, kStill);
    CHECK(s.coverage >= 0.75);
    CHECK(r.success);
    CHECK(r.done);
  }

  TEST_CASE("extras") {
    const auto spec = make_env_spec(EnvKind::mapping);
    const auto s = reset(spec, EpisodeSeed{3});
    CHECK(extras(s, spec) == std::vector<double>{0.0, 1.0});

    const auto sar = make_env_spec(EnvKind::search_rescue);
    auto ss = reset(sar, EpisodeSeed{4});
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
      step(sar, ss, random_actions(rng));
      const Eigen::MatrixXd o = observe(ss, sar, builtin_level(HeteroLevel::H2));
      const auto lay = sar.layout();
      for (int i = 1; i < kNumRobots; ++i)
        REQUIRE(o.col(i).segment(lay.extra_offset(), 3) == o.col(0).segment(lay.extra_offset(), 3));
    }
  }

  TEST_CASE("property: warehouse extras stay in [0, 1] along a random episode") {
    const auto spec = make_env_spec(EnvKind::warehouse);
    for (std::uint64_t e = 0; e < 3; ++e) {
      auto s = reset(spec, derive_episode_seed(RunSeed{9}, e));
      Rng rng(e + 100);
      while (!s.done) {
        step(spec, s, random_actions(rng));
        for (double x : extras(s, spec)) {
          REQUIRE(x >= 0.0);
          REQUIRE(x <= 1.0);
        }
      }
      CHECK(s.t <= 500);
    }
  }

  TEST_CASE("property: counters and coverage are non-decreasing; horizon respected") {
    for (auto k : kAllEnvs) {
      const auto spec = make_env_spec(k);
      for (std::uint64_t e = 0; e < 2; ++e) {
        auto s = reset(spec, derive_episode_seed(RunSeed{12}, e));
        Rng rng(e * 31 + 7);
        Counters prev = s.counters;
        double cov = s.coverage;
        while (!s.done) {
          const auto r = step(spec, s, random_actions(rng));
          REQUIRE(s.counters.delivered >= prev.delivered);
          REQUIRE(s.counters.picked_up >= prev.picked_up);
          REQUIRE(s.counters.collisions >= prev.collisions);
          REQUIRE(s.counters.found >= prev.found);
          REQUIRE(s.counters.rescued >= prev.rescued);
          REQUIRE(s.coverage >= cov);
          REQUIRE((!r.success || r.done));
          prev = s.counters;
          cov = s.coverage;
        }
        CHECK(s.t <= spec.horizon);
        CHECK((s.success || s.t == spec.horizon));
      }
    }
  }

  TEST_CASE("same seed and actions give the same trajectory") {
    const auto spec = make_env_spec(EnvKind::search_rescue);
    auto a = reset(spec, EpisodeSeed{77});
    auto b = reset(spec, EpisodeSeed{77});
    Rng ra(5), rb(5);
    double ta = 0.0, tb = 0.0;
    for (int t = 0; t < 100; ++t) {
      ta += step(spec, a, random_actions(ra)).reward;
      tb += step(spec, b, random_actions(rb)).reward;
    }
    CHECK(ta == tb);
    CHECK(same_state(a, b));
  }

  TEST_CASE("joint action arity is checked") {
    const auto spec = make_env_spec(EnvKind::mapping);
    auto s = reset(spec, EpisodeSeed{1});
    CHECK_THROWS_AS(step(spec, s, std::vector<Vec2>(3)), std::invalid_argument);
  }

  TEST_CASE("scripted scenes match the frozen reward oracle") {
    const auto scenes = testing::load_reward_scenes(std::string(DCADA_TEST_DATA_DIR) + "/reward_scenes.json");
    REQUIRE(scenes.size() == 15);
    for (const auto& sc : scenes) {
      const auto o = testing::replay_scene(sc);
      CAPTURE(o.env);
      CAPTURE(o.name);
      CHECK(o.max_step_error <= 1e-9);
      CHECK(o.return_error <= 1e-9);
      CHECK(o.steps == 20);
      CHECK(o.success == (o.name.find("success") != std::string::npos));
    }
  }
}
