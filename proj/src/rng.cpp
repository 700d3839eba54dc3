#include "raac/rng.h"

#include <cmath>
#include <numbers>

namespace raac {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t hash_combine(std::uint64_t seed, std::string_view part) {
  return splitmix64(seed ^ fnv1a(part));
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t part) {
  return splitmix64(seed ^ splitmix64(part));
}

double uniform01(std::mt19937_64& engine) {
  // 53 random bits, offset by half an ulp so the result is never 0 or 1.
  return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
}

double NormalSampler::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform01(engine_);
  const double u2 = uniform01(engine_);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace raac
