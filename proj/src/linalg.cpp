#include "saflow/linalg.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "saflow/rng.hpp"

namespace saflow {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// in-place radix-2 transform, sign = -1 forward, +1 inverse/adjoint; no scaling
void fft_pow2(cvec& a, double sign) {
  const std::size_t n = a.size();
  if (n < 2) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  // root[k] = e^{sign * 2 pi i k / n}; table lookup keeps per-butterfly error
  // at machine precision instead of accumulating across a running product
  std::vector<cdouble> root(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k)
    root[k] = std::polar(1.0, sign * 2.0 * kPi * double(k) / double(n));
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cdouble w = root[j * stride];
        const cdouble u = a[i + j];
        const cdouble t = w * a[i + j + len / 2];
        a[i + j] = u + t;
        a[i + j + len / 2] = u - t;
      }
    }
  }
}

cvec transform_direct(const cvec& v, double sign) {
  const std::size_t d = v.size();
  cvec out(d);
  const double base = sign * 2.0 * kPi / double(d);
  for (std::size_t k = 0; k < d; ++k) {
    cdouble acc = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      // reducing k*j mod d keeps the phase argument small
      acc += v[j] * std::polar(1.0, base * double((k * j) % d));
    out[k] = acc;
  }
  return out;
}

cvec transform(const cvec& v, double sign) {
  if (is_pow2(v.size())) {
    cvec a = v;
    fft_pow2(a, sign);
    return a;
  }
  return transform_direct(v, sign);
}

}  // namespace

cvec dft(const cvec& v) { return transform(v, -1.0); }

cvec idft(const cvec& v) {
  cvec a = transform(v, +1.0);
  const double s = 1.0 / double(v.size());
  for (auto& e : a) e *= s;
  return a;
}

cvec dft_adjoint(const cvec& v) { return transform(v, +1.0); }

cvec dft_direct(const cvec& v) { return transform_direct(v, -1.0); }

cvec idft_direct(const cvec& v) {
  cvec a = transform_direct(v, +1.0);
  const double s = 1.0 / double(v.size());
  for (auto& e : a) e *= s;
  return a;
}

cvec circular_shift(const cvec& v, long long r) {
  const long long d = (long long)v.size();
  if (d == 0) return {};
  const long long rr = ((r % d) + d) % d;
  cvec out(v.size());
  for (long long j = 0; j < d; ++j) out[(std::size_t)j] = v[(std::size_t)((j - rr + d) % d)];
  return out;
}

double norm2(const cvec& v) {
  double s = 0.0;
  for (const auto& e : v) s += std::norm(e);
  return std::sqrt(s);
}

double norm_inf(const cvec& v) {
  double s = 0.0;
  for (const auto& e : v) s = std::max(s, std::abs(e));
  return s;
}

cdouble inner(const cvec& a, const cvec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("inner: size mismatch");
  cdouble s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::conj(a[j]) * b[j];
  return s;
}

DenseOperator::DenseOperator(std::size_t rows_, std::size_t cols_, cvec entries)
    : m(rows_), n(cols_), a(std::move(entries)) {
  if (a.size() != m * n) throw std::invalid_argument("DenseOperator: entry count != m*n");
}

cvec DenseOperator::apply(const cvec& z) const {
  if (z.size() != n) throw std::invalid_argument("DenseOperator::apply: size mismatch");
  cvec out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    cdouble acc = 0.0;
    const cdouble* row = a.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * z[j];
    out[i] = acc;
  }
  return out;
}

cvec DenseOperator::apply_adjoint(const cvec& u) const {
  if (u.size() != m) throw std::invalid_argument("DenseOperator::apply_adjoint: size mismatch");
  cvec out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const cdouble* row = a.data() + i * n;
    const cdouble ui = u[i];
    for (std::size_t j = 0; j < n; ++j) out[j] += std::conj(row[j]) * ui;
  }
  return out;
}

double DenseOperator::row_norm_sq(std::size_t i) const {
  double s = 0.0;
  const cdouble* row = a.data() + i * n;
  for (std::size_t j = 0; j < n; ++j) s += std::norm(row[j]);
  return s;
}

double frobenius_norm(const DenseOperator& op) {
  double s = 0.0;
  for (const auto& e : op.a) s += std::norm(e);
  return std::sqrt(s);
}

double spectral_norm(const LinearOperator& op, double tol, int max_iter) {
  const std::size_t n = op.cols();
  if (n == 0) return 0.0;
  cvec v(n, 1.0);
  SeededRng rng(0x5af1005eed, 0xa11);
  for (auto& e : v) e += 0.01 * cdouble(rng.next_gaussian(), rng.next_gaussian());
  double nv = norm2(v);
  for (auto& e : v) e /= nv;

  double est = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const cvec w = op.apply(v);
    const double s = norm2(w);  // ||A v|| with unit v, the current estimate
    if (s == 0.0) return 0.0;
    cvec u = op.apply_adjoint(w);
    const double nu = norm2(u);
    if (nu == 0.0) return s;
    for (auto& e : u) e /= nu;
    v = std::move(u);
    if (it > 0 && std::abs(s - est) <= tol * s) return s;
    est = s;
  }
  throw std::runtime_error("spectral_norm: no convergence in " + std::to_string(max_iter) +
                           " iterations; last estimate " + std::to_string(est));
}

}  // namespace saflow
