#include "dcada/stress.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace dcada {

std::string_view to_string(StressKind kind) {
  switch (kind) {
    case StressKind::clean:
      return "clean";
    case StressKind::gaussian_noise:
      return "gaussian_noise";
    case StressKind::dropout:
      return "dropout";
    case StressKind::delay:
      return "delay";
    case StressKind::combined_mild:
      return "combined_mild";
  }
  return "?";
}

StressKind parse_stress_kind(std::string_view name) {
  for (auto k : {StressKind::clean, StressKind::gaussian_noise, StressKind::dropout,
                 StressKind::delay, StressKind::combined_mild})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("invalid stress kind '" + std::string(name) + "'");
}

void StressSpec::validate() const {
  if (noise_sigma < 0.0) throw std::invalid_argument("stress noise_sigma must be >= 0");
  if (dropout_prob < 0.0 || dropout_prob > 1.0)
    throw std::invalid_argument("stress dropout_prob must lie in [0, 1]");
  if (delay_steps < 0) throw std::invalid_argument("stress delay_steps must be >= 0");
}

double StressSpec::effective_sigma() const {
  switch (kind) {
    case StressKind::gaussian_noise:
      return noise_sigma;
    case StressKind::combined_mild:
      return 0.5 * noise_sigma;
    default:
      return 0.0;
  }
}

double StressSpec::effective_dropout() const {
  switch (kind) {
    case StressKind::dropout:
      return dropout_prob;
    case StressKind::combined_mild:
      return 0.5 * dropout_prob;
    default:
      return 0.0;
  }
}

int StressSpec::effective_delay() const {
  switch (kind) {
    case StressKind::delay:
      return delay_steps;
    case StressKind::combined_mild:
      return 1;
    default:
      return 0;
  }
}

Eigen::VectorXd apply_stress(const StressSpec& spec, const Eigen::VectorXd& o,
                             std::span<const Eigen::VectorXd> history,
                             const Eigen::VectorXd& neutral, Rng& rng) {
  if (spec.kind == StressKind::clean) return o;
  const int delay = spec.effective_delay();
  if (static_cast<int>(history.size()) < delay)
    throw std::invalid_argument("stress history shorter than delay");
  Eigen::VectorXd out = delay > 0 ? history[history.size() - static_cast<std::size_t>(delay)] : o;

  const bool noisy = spec.kind == StressKind::gaussian_noise || spec.kind == StressKind::combined_mild;
  const bool drops = spec.kind == StressKind::dropout || spec.kind == StressKind::combined_mild;
  if (noisy) {
    const double sigma = spec.effective_sigma();
    const auto noise = gaussian(rng, static_cast<std::size_t>(out.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += sigma * noise[static_cast<std::size_t>(i)];
  }
  if (drops) {
    const double p = spec.effective_dropout();
    for (Eigen::Index i = 0; i < out.size(); ++i)
      if (rng.uniform() < p) out[i] = neutral[i];
  }
  return out;
}

StressProcess::StressProcess(const StressSpec& spec, const ObservationLayout& layout)
    : spec_(spec), neutral_(layout.neutral()) {}

void StressProcess::apply(Eigen::MatrixXd& obs, Rng& rng) {
  if (spec_.kind == StressKind::clean) return;
  const auto delay = static_cast<std::size_t>(spec_.effective_delay());
  for (int i = 0; i < kNumRobots; ++i) {
    auto& hist = history_[static_cast<std::size_t>(i)];
    const Eigen::VectorXd raw = obs.col(i);
    if (hist.empty())
      for (std::size_t k = 0; k < delay; ++k) hist.push_back(raw);
    const std::vector<Eigen::VectorXd> window(hist.begin(), hist.end());
    obs.col(i) = apply_stress(spec_, raw, window, neutral_, rng);
    if (delay > 0) {
      hist.push_back(raw);
      while (hist.size() > delay) hist.pop_front();
    }
  }
}

}  // namespace dcada
