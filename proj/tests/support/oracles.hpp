#pragma once

// Test-local reference implementations. Everything here is computed from the
// literal definitions (matrix entries, explicit Fourier sums, Jacobi
// eigenvalues), never by calling the library's transform or gradient paths,
// so a library bug cannot cancel out of a comparison.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "saflow/linalg.hpp"
#include "saflow/measurement.hpp"

namespace oracle {

using saflow::cdouble;
using saflow::cvec;

// unnormalized forward transform, long-double accumulation
inline cvec dft(const cvec& v, int sign = -1) {
  const std::size_t d = v.size();
  cvec out(d);
  for (std::size_t k = 0; k < d; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t j = 0; j < d; ++j) {
      const long double ang =
          sign * 2.0L * std::numbers::pi_v<long double> * (long double)(k * j) / (long double)d;
      const long double c = std::cos(ang), s = std::sin(ang);
      re += c * v[j].real() - s * v[j].imag();
      im += c * v[j].imag() + s * v[j].real();
    }
    out[k] = {double(re), double(im)};
  }
  return out;
}

inline cvec shifted_window(const cvec& w, long long s) {
  const long long d = (long long)w.size();
  cvec out(w.size());
  for (long long j = 0; j < d; ++j) out[j] = w[(((j - s) % d) + d) % d];
  return out;
}

// rows of block r from the literal definition
inline std::vector<cvec> block_rows(const saflow::MeasurementEnsemble& e, std::size_t r) {
  const auto& b = e.blocks[r];
  if (b.kind == saflow::Block::Kind::stft) {
    const std::size_t d = e.d;
    const cvec sw = shifted_window(e.window, b.shift);
    std::vector<cvec> rows(d, cvec(d));
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t j = 0; j < d; ++j) {
        const double ang = -2.0 * std::numbers::pi * double(k * j) / double(d);
        rows[k][j] = cdouble(std::cos(ang), std::sin(ang)) * sw[j];
      }
    return rows;
  }
  std::vector<cvec> rows(b.dense.m, cvec(b.dense.n));
  for (std::size_t i = 0; i < b.dense.m; ++i)
    for (std::size_t j = 0; j < b.dense.n; ++j) rows[i][j] = b.dense.at(i, j);
  return rows;
}

inline cvec apply_block(const saflow::MeasurementEnsemble& e, std::size_t r, const cvec& z) {
  const auto rows = block_rows(e, r);
  cvec out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    cdouble acc = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) acc += rows[i][j] * z[j];
    out[i] = acc;
  }
  return out;
}

// full stacked matrix, blocks in order
inline std::vector<cvec> full_matrix(const saflow::MeasurementEnsemble& e) {
  std::vector<cvec> rows;
  for (std::size_t r = 0; r < e.block_count(); ++r) {
    auto br = block_rows(e, r);
    rows.insert(rows.end(), br.begin(), br.end());
  }
  return rows;
}

inline double loss(const saflow::MeasurementEnsemble& e, const cvec& z, double eps) {
  long double total = 0.0L;
  for (std::size_t r = 0; r < e.block_count(); ++r) {
    const cvec w = apply_block(e, r, z);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const long double model = std::sqrt((long double)std::norm(w[j]) + (long double)eps);
      const long double target =
          std::sqrt(std::max((long double)e.y[r][j] + (long double)eps, 0.0L));
      total += (model - target) * (model - target);
    }
  }
  return double(total);
}

// central differences on the oracle loss, (g_re + i g_im) / 2
inline cvec fd_gradient(const saflow::MeasurementEnsemble& e, const cvec& z, double eps,
                        double h) {
  cvec g(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    cvec zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    const double g_re = (loss(e, zp, eps) - loss(e, zm, eps)) / (2.0 * h);
    zp = z;
    zm = z;
    zp[j] += cdouble(0.0, h);
    zm[j] -= cdouble(0.0, h);
    const double g_im = (loss(e, zp, eps) - loss(e, zm, eps)) / (2.0 * h);
    g[j] = cdouble(g_re / 2.0, g_im / 2.0);
  }
  return g;
}

// cyclic Jacobi on a real symmetric matrix; returns the largest eigenvalue
inline double jacobi_max_eigenvalue(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
      }
  }
  double best = a[0][0];
  for (std::size_t i = 1; i < n; ++i) best = std::max(best, a[i][i]);
  return best;
}

/* Largest singular value via the real symmetric embedding of the Gram matrix:
 * B = A^* A (Hermitian, d x d) embeds as [[Re B, -Im B], [Im B, Re B]], whose
 * spectrum is that of B with doubled multiplicity. */
inline double spectral_norm(const std::vector<cvec>& rows, std::size_t d) {
  std::vector<std::vector<cdouble>> gram(d, std::vector<cdouble>(d, 0.0));
  for (const cvec& row : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) gram[i][j] += std::conj(row[i]) * row[j];
  std::vector<std::vector<double>> emb(2 * d, std::vector<double>(2 * d, 0.0));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      emb[i][j] = gram[i][j].real();
      emb[i][j + d] = -gram[i][j].imag();
      emb[i + d][j] = gram[i][j].imag();
      emb[i + d][j + d] = gram[i][j].real();
    }
  return std::sqrt(std::max(0.0, jacobi_max_eigenvalue(std::move(emb))));
}

inline double frobenius_norm(const std::vector<cvec>& rows) {
  long double s = 0.0L;
  for (const cvec& row : rows)
    for (const cdouble& v : row) s += std::norm(v);
  return double(std::sqrt(s));
}

}  // namespace oracle
