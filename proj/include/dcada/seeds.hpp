#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace dcada {

/// Seed identifying one run (environment x level x method x seed).
struct RunSeed {
  std::uint64_t value = 0;
  friend bool operator==(RunSeed, RunSeed) = default;
};

/// Seed for one episode or short rollout. Rollouts sharing an EpisodeSeed
/// see identical initial states and identical environment-side noise.
struct EpisodeSeed {
  std::uint64_t value = 0;
  friend bool operator==(EpisodeSeed, EpisodeSeed) = default;
};

enum class StreamPurpose { env, noise, policy };

std::string_view to_string(StreamPurpose purpose);

/// SplitMix64 finalizer (Steele, Lea, Flood 2014). Bijective on 64-bit words.
std::uint64_t splitmix64_mix(std::uint64_t x);

/// xoshiro256** 1.0 (Blackman & Vigna), seeded by iterating SplitMix64.
///
/// Uniform doubles take the top 53 bits of one output word. Gaussian draws use
/// Box-Muller: each pair of normals consumes exactly two words, u1 first
/// (mapped to (0,1]) then u2; the pair is (r cos(2 pi u2), r sin(2 pi u2)).
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed);
  static Rng from_state(const State& state);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// One standard normal; consumes two words and keeps the cosine branch.
  double normal();

  const State& state() const { return state_; }

 private:
  Rng() = default;
  State state_{};
};

EpisodeSeed derive_episode_seed(RunSeed run, std::uint64_t episode_index);

/// Independent stream for one purpose within an episode.
Rng spawn_stream(EpisodeSeed seed, StreamPurpose purpose);

/// Run-level stream (adaptation noise, candidate-round seeds).
Rng run_stream(RunSeed run, StreamPurpose purpose);

/// n i.i.d. standard normals, generated pairwise; for odd n the final sine
/// branch is discarded, so the call always consumes 2*ceil(n/2) words.
std::vector<double> gaussian(Rng& rng, std::size_t n);

}  // namespace dcada
