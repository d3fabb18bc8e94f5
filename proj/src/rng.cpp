#include "abmrl/rng.hpp"

#include "abmrl/errors.hpp"

namespace abmrl {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer
uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

// FNV-1a over the label, folded into the parent key.
uint64_t hash_label(uint64_t key, std::string_view label) {
  uint64_t h = 0xcbf29ce484222325ull ^ mix64(key + kGolden);
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return mix64(h);
}

}  // namespace

RngStream::RngStream(uint64_t state0, uint64_t gamma, std::string path)
    : state0_(state0), gamma_(gamma), path_(std::move(path)) {}

RngStream::RngStream(uint64_t seed, std::string_view label) {
  state0_ = hash_label(mix64(seed + kGolden), label);
  gamma_ = mix64(state0_ ^ kGolden) | 1;  // odd, so the orbit has full period
  path_ = std::string(label);
}

RngStream RngStream::fork(std::string_view label) {
  auto [it, inserted] = children_.emplace(label);
  (void)it;
  require(inserted, "RngStream::fork: duplicate child label '" + std::string(label) +
                        "' under stream '" + path_ + "'");
  uint64_t s0 = hash_label(state0_, label);
  uint64_t g = mix64(s0 ^ kGolden) | 1;
  return RngStream(s0, g, path_ + "/" + std::string(label));
}

void RngStream::want(Mode m) const {
  if (mode_ == Mode::kFresh) {
    mode_ = m;
    return;
  }
  require(mode_ == m, "RngStream '" + path_ + "': sequential and indexed draws mixed");
}

uint64_t RngStream::next_u64() {
  want(Mode::kSequential);
  ++counter_;
  return mix64(state0_ + gamma_ * counter_);
}

uint64_t RngStream::at(uint64_t index) const {
  want(Mode::kIndexed);
  return mix64(state0_ + gamma_ * (index + 1));
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform_at(uint64_t index) const {
  return static_cast<double>(at(index) >> 11) * 0x1.0p-53;
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

bool RngStream::bernoulli_at(uint64_t index, double p) const { return uniform_at(index) < p; }

int RngStream::bit() { return static_cast<int>(next_u64() >> 63); }

uint64_t RngStream::below(uint64_t n) {
  require(n > 0, "RngStream::below: n must be positive");
  // Lemire's multiply-shift with rejection of the biased low range.
  __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
  auto lo = static_cast<uint64_t>(m);
  if (lo < n) {
    uint64_t threshold = -n % n;
    while (lo < threshold) {
      m = static_cast<__uint128_t>(next_u64()) * n;
      lo = static_cast<uint64_t>(m);
    }
  }
  return static_cast<uint64_t>(m >> 64);
}

}  // namespace abmrl
