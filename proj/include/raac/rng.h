#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace raac {

std::uint64_t splitmix64(std::uint64_t x);

// Chainable seed derivation: hash(seed, part, part, ...).
std::uint64_t hash_combine(std::uint64_t seed, std::string_view part);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t part);

// Uniform double in (0, 1), fully determined by the engine state.
double uniform01(std::mt19937_64& engine);

// Deterministic standard-normal stream. std::normal_distribution is
// implementation-defined, so we pair the fully specified mt19937_64 with
// an explicit Box-Muller transform instead.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

  double next();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// In-place Fisher-Yates shuffle. std::shuffle is implementation-defined;
// this one is stable across standard libraries.
template <typename T>
void seeded_shuffle(std::vector<T>& values, std::mt19937_64& engine) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(engine() % i);
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace raac
