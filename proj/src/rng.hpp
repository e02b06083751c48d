#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace idp {

// Seed of the substream identified by (master seed, purpose tag, index).
// One master seed drives a run; every consumer (sampling at iteration t,
// noise at iteration t, model init, probe trial k, ...) derives its own
// stream from a tag, so draws made by one consumer never shift another.
std::uint64_t stream_seed_of(std::uint64_t master_seed, std::string_view purpose,
                             std::uint64_t index = 0);

// Deterministic generator with explicitly coded distributions. The std::
// distribution adaptors are implementation-defined, which would break the
// bit-reproducibility contract across standard libraries, so uniforms and
// normals are derived from raw mt19937_64 words here.
class Rng {
 public:
  explicit Rng(std::uint64_t stream_seed) : eng_(stream_seed) {}

  static Rng substream(std::uint64_t master_seed, std::string_view purpose,
                       std::uint64_t index = 0) {
    return Rng(stream_seed_of(master_seed, purpose, index));
  }

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // (0, 1], safe as a log argument
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds, rejection sampled so the result is unbiased
  int uniform_int(int lo, int hi);

  // standard normal via Box-Muller; always consumes exactly two words
  double normal();

 private:
  std::mt19937_64 eng_;
};

}  // namespace idp
