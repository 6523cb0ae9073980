#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

namespace saflow {

/* Counter-based splittable generator (Philox4x32-10). A (seed, stream) pair
 * addresses an independent sequence, so parallel trials can draw from
 * non-overlapping streams without shared state. Integer and uniform output is
 * reproducible bit-for-bit across platforms; gaussian/poisson go through libm
 * and are reproducible for a fixed libm. */
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // uniform on [0, 1), 53-bit resolution
  double next_double();

  // standard normal via Box-Muller; the sine partner is cached
  double next_gaussian();

  // exact Poisson sampling; large means are split using additivity so the
  // exp(-lambda) inversion never underflows
  std::uint64_t next_poisson(double lambda);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::array<std::uint32_t, 4> block_(std::uint64_t counter) const;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  unsigned buf_pos_ = 4;
  double gauss_spare_ = 0.0;
  bool has_gauss_spare_ = false;
};

// entries (g1 + i g2)/sqrt(2), so each entry has unit second moment
std::vector<std::complex<double>> random_complex_gaussian(std::size_t d, SeededRng& rng);

// unit-modulus scalar with uniform phase
std::complex<double> random_phase(SeededRng& rng);

}  // namespace saflow
