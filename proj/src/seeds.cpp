#include "dcada/seeds.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dcada {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t purpose_salt(StreamPurpose purpose) {
  switch (purpose) {
    case StreamPurpose::env:
      return 0x656E765F73747265ULL;
    case StreamPurpose::noise:
      return 0x6E6F6973655F7374ULL;
    case StreamPurpose::policy:
      return 0x706F6C6963795F73ULL;
  }
  return 0;
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::string_view to_string(StreamPurpose purpose) {
  switch (purpose) {
    case StreamPurpose::env:
      return "env";
    case StreamPurpose::noise:
      return "noise";
    case StreamPurpose::policy:
      return "policy";
  }
  return "unknown";
}

std::uint64_t splitmix64_mix(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& word : state_) {
    s += kGolden;
    word = splitmix64_mix(s);
  }
}

Rng Rng::from_state(const State& state) {
  if (state == State{}) throw std::invalid_argument("xoshiro256** state must be nonzero");
  Rng rng;
  rng.state_ = state;
  return rng;
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

EpisodeSeed derive_episode_seed(RunSeed run, std::uint64_t episode_index) {
  return EpisodeSeed{splitmix64_mix((run.value << 32) ^ episode_index)};
}

Rng spawn_stream(EpisodeSeed seed, StreamPurpose purpose) {
  return Rng(splitmix64_mix(seed.value ^ purpose_salt(purpose)));
}

Rng run_stream(RunSeed run, StreamPurpose purpose) {
  return spawn_stream(EpisodeSeed{splitmix64_mix(~run.value * kGolden)}, purpose);
}

std::vector<double> gaussian(Rng& rng, std::size_t n) {
  std::vector<double> out;
  out.reserve(n + 1);
  while (out.size() < n) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out.push_back(r * std::cos(angle));
    out.push_back(r * std::sin(angle));
  }
  out.resize(n);
  return out;
}

}  // namespace dcada
