#include <doctest.h>

#include "dcada/stress.hpp"

using namespace dcada;

namespace {

Eigen::MatrixXd ramp(int d, double base) {
  Eigen::MatrixXd m(d, kNumRobots);
  for (int c = 0; c < kNumRobots; ++c)
    for (int r = 0; r < d; ++r) m(r, c) = base + 0.01 * r + c;
  return m;
}

}  // namespace

TEST_SUITE("stress") {
  TEST_CASE("clean is an identity and draws nothing") {
    const ObservationLayout layout{2};
    StressProcess proc(StressSpec{}, layout);
    Rng rng(1);
    const auto before = rng.state();
    Eigen::MatrixXd o = ramp(layout.dim(), 0.0);
    const Eigen::MatrixXd copy = o;
    proc.apply(o, rng);
    CHECK(o == copy);
    CHECK(rng.state() == before);
  }

  TEST_CASE("delay pads with the first observation") {
    const ObservationLayout layout{2};
    StressSpec spec;
    spec.kind = StressKind::delay;
    spec.delay_steps = 2;
    StressProcess proc(spec, layout);
    Rng rng(2);
    std::vector<Eigen::MatrixXd> raw;
    for (int t = 0; t < 5; ++t) raw.push_back(ramp(layout.dim(), t));
    for (int t = 0; t < 5; ++t) {
      Eigen::MatrixXd o = raw[static_cast<std::size_t>(t)];
      proc.apply(o, rng);
      CHECK(o == raw[static_cast<std::size_t>(std::max(0, t - 2))]);
    }
  }

  TEST_CASE("dropout with p = 1 gives the neutral vector") {
    const ObservationLayout layout{3};
    StressSpec spec;
    spec.kind = StressKind::dropout;
    spec.dropout_prob = 1.0;
    StressProcess proc(spec, layout);
    Rng rng(3);
    Eigen::MatrixXd o = ramp(layout.dim(), 0.5);
    proc.apply(o, rng);
    for (int c = 0; c < kNumRobots; ++c) CHECK(o.col(c) == layout.neutral());
  }

  TEST_CASE("noise has the configured scale") {
    StressSpec spec;
    spec.kind = StressKind::gaussian_noise;
    spec.noise_sigma = 0.2;
    const Eigen::VectorXd o = Eigen::VectorXd::Zero(20000);
    Rng rng(4);
    const auto out = apply_stress(spec, o, {}, o, rng);
    CHECK(std::sqrt(out.squaredNorm() / 20000.0) == doctest::Approx(0.2).epsilon(0.03));
  }

  TEST_CASE("combined mild halves the knobs and delays one step") {
    StressSpec spec;
    spec.kind = StressKind::combined_mild;
    CHECK(spec.effective_sigma() == 0.025);
    CHECK(spec.effective_dropout() == 0.05);
    CHECK(spec.effective_delay() == 1);
  }

  TEST_CASE("names and validation") {
    CHECK(parse_stress_kind("dropout") == StressKind::dropout);
    CHECK(to_string(StressKind::combined_mild) == "combined_mild");
    CHECK_THROWS_AS(parse_stress_kind("fog"), std::invalid_argument);
    StressSpec bad;
    bad.dropout_prob = 1.5;
    CHECK_THROWS(bad.validate());
  }
}
