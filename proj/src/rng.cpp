#include "saflow/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace saflow {

namespace {

// Philox4x32 round constants (Salmon et al., Random123)
constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::uint32_t k0, std::uint32_t k1) {
  const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
  const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
  const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
}

}  // namespace

std::array<std::uint32_t, 4> SeededRng::block_(std::uint64_t counter) const {
  std::array<std::uint32_t, 4> ctr = {
      std::uint32_t(counter), std::uint32_t(counter >> 32),
      std::uint32_t(stream_), std::uint32_t(stream_ >> 32)};
  std::uint32_t k0 = std::uint32_t(seed_), k1 = std::uint32_t(seed_ >> 32);
  for (int round = 0; round < 10; ++round) {
    philox_round(ctr, k0, k1);
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return ctr;
}

std::uint32_t SeededRng::next_u32() {
  if (buf_pos_ == 4) {
    buf_ = block_(counter_++);
    buf_pos_ = 0;
  }
  return buf_[buf_pos_++];
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double SeededRng::next_double() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::next_gaussian() {
  if (has_gauss_spare_) {
    has_gauss_spare_ = false;
    return gauss_spare_;
  }
  // 1 - u keeps the log argument in (0, 1]
  const double u1 = 1.0 - next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  gauss_spare_ = r * std::sin(a);
  has_gauss_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t SeededRng::next_poisson(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("next_poisson: lambda must be finite and >= 0");
  std::uint64_t total = 0;
  // Poisson(a + b) = Poisson(a) + Poisson(b) for independent draws
  while (lambda > 0.0) {
    const double chunk = lambda > 600.0 ? 500.0 : lambda;
    lambda -= chunk;
    const double limit = std::exp(-chunk);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_double();
    } while (p > limit);
    total += k - 1;
  }
  return total;
}

std::vector<std::complex<double>> random_complex_gaussian(std::size_t d, SeededRng& rng) {
  std::vector<std::complex<double>> v(d);
  const double s = std::numbers::sqrt2 / 2.0;
  for (auto& e : v) {
    const double re = rng.next_gaussian();
    const double im = rng.next_gaussian();
    e = {s * re, s * im};
  }
  return v;
}

std::complex<double> random_phase(SeededRng& rng) {
  const double a = 2.0 * std::numbers::pi * rng.next_double();
  return {std::cos(a), std::sin(a)};
}

}  // namespace saflow
