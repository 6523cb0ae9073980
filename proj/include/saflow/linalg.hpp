#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace saflow {

using cdouble = std::complex<double>;
using cvec = std::vector<cdouble>;

/* Unnormalized forward DFT, (F v)_k = sum_j v_j e^{-2 pi i k j / d} (0-based).
 * Power-of-two lengths take an iterative radix-2 path with a precomputed root
 * table; everything else falls back to the direct O(d^2) sum. The two paths
 * agree to 1e-12 and the tests pin that. */
cvec dft(const cvec& v);

// inverse transform: idft(dft(v)) == v, i.e. (1/d) F* v
cvec idft(const cvec& v);

// adjoint transform F* v = d * idft(v), needed by adjoint block applications
cvec dft_adjoint(const cvec& v);

// direct O(d^2) reference paths, exposed so tests can cross-check the fft
cvec dft_direct(const cvec& v);
cvec idft_direct(const cvec& v);

// (S_r v)_j = v_{(j - r) mod d}; r may be any integer, reduced mod d
cvec circular_shift(const cvec& v, long long r);

double norm2(const cvec& v);
double norm_inf(const cvec& v);
// <a, b> = sum_j conj(a_j) b_j
cdouble inner(const cvec& a, const cvec& b);

struct LinearOperator {
  virtual ~LinearOperator() = default;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  virtual cvec apply(const cvec& z) const = 0;
  virtual cvec apply_adjoint(const cvec& u) const = 0;
};

// row-major dense matrix
struct DenseOperator final : LinearOperator {
  std::size_t m = 0, n = 0;
  cvec a;  // m * n entries

  DenseOperator() = default;
  DenseOperator(std::size_t rows_, std::size_t cols_, cvec entries);

  std::size_t rows() const override { return m; }
  std::size_t cols() const override { return n; }
  cvec apply(const cvec& z) const override;
  cvec apply_adjoint(const cvec& u) const override;

  cdouble at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
  double row_norm_sq(std::size_t i) const;
};

double frobenius_norm(const DenseOperator& op);

/* Largest singular value by power iteration on op* . op. Start vector is
 * all-ones plus a fixed-seed perturbation, so results are deterministic.
 * Stops when successive estimates agree to tol (relative); throws if max_iter
 * is exhausted, reporting the last estimate. */
double spectral_norm(const LinearOperator& op, double tol = 1e-10, int max_iter = 5000);

}  // namespace saflow
