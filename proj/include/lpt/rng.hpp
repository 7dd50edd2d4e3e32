#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace lpt {

// Counter-free seeded stream built on xoshiro256++. Streams are addressed by
// (master_seed, stream_id); equal addresses replay the same sequence, distinct
// ids give statistically independent sequences. State is four words, so a
// stream can be checkpointed and resumed exactly.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : master_seed_(master_seed), stream_id_(stream_id) {
    std::uint64_t x = master_seed ^ (0x9E3779B97F4A7C15ULL * (stream_id + 1));
    for (auto& w : state_) w = splitmix64(x);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  // Derives a stream id from a purpose label plus an index, so parallel
  // consumers (per-example chains, per-episode rollouts) stay reproducible
  // regardless of scheduling.
  static RngStream named(std::uint64_t master_seed, std::string_view purpose,
                         std::uint64_t index = 0) {
    return RngStream(master_seed, fnv1a(purpose) ^ (0x9E3779B97F4A7C15ULL * index));
  }

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; used where log(u) must stay finite.
  double uniform_pos() { return 1.0 - uniform(); }

  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller pair; the sine half is discarded so that consumption per call
  // is fixed and the stream state alone captures the generator position.
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double theta = 6.283185307179586476925286766559 * uniform();
    return r * std::cos(theta);
  }

  void fill_normal(double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 1 < n; i += 2) {
      const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
      const double theta = 6.283185307179586476925286766559 * uniform();
      out[i] = r * std::cos(theta);
      out[i + 1] = r * std::sin(theta);
    }
    if (i < n) out[i] = normal();
  }

  std::array<std::uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> state_;
};

}  // namespace lpt
