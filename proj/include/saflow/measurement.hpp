#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saflow/linalg.hpp"
#include "saflow/rng.hpp"

namespace saflow {

struct NoiseSpec {
  enum class Kind { none, gaussian, poisson };
  Kind kind = Kind::none;
  double sigma = 0.0;         // gaussian: y = clean + sigma * N(0,1), may go negative
  double scale = 1.0;         // poisson: y = Poisson(scale * clean) / scale, so E[y] = clean
  std::uint64_t seed = 0;
};

/* One measurement block A_r. Dense blocks carry their own matrix; windowed
 * DFT blocks are A_r = F diag(S_{s_r} w) and only store the shift, the window
 * lives on the ensemble (all such blocks share it). */
struct Block {
  enum class Kind { dense, stft };
  Kind kind = Kind::dense;
  DenseOperator dense;     // kind == dense
  long long shift = 0;     // kind == stft, reduced mod d
};

/* Block-partitioned measurement map A = [A_1; ...; A_R] with per-block
 * intensity data y^r. Either all blocks are dense or all are windowed-DFT. */
struct MeasurementEnsemble {
  std::size_t d = 0;
  std::vector<Block> blocks;
  cvec window;                          // nonempty iff stft blocks
  std::vector<std::vector<double>> y;   // filled by simulate() or loaded

  std::size_t block_count() const { return blocks.size(); }
  std::size_t block_rows(std::size_t r) const;
  std::size_t rows() const;
  bool is_stft() const { return !window.empty(); }
  bool has_measurements() const { return !y.empty(); }

  cvec apply_block(std::size_t r, const cvec& z) const;
  cvec adjoint_block(std::size_t r, const cvec& u) const;
  cvec shifted_window(std::size_t r) const;  // S_{s_r} w

  // spectral norm squared of A_r: exact d*||w||_inf^2 for windowed-DFT blocks
  // (diag factors have norm ||.||_inf, F* F = d I), power iteration for dense
  double block_norm_sq(std::size_t r) const;
};

// shifts must be distinct mod d, 1 <= R <= d, window nonzero of length d
MeasurementEnsemble build_stft_ensemble(std::size_t d, const cvec& window,
                                        const std::vector<long long>& shifts);
MeasurementEnsemble build_dense_ensemble(std::size_t d, std::vector<DenseOperator> ops);
// one single-row block per matrix row, the shape row-action methods expect
MeasurementEnsemble build_row_partition(const DenseOperator& a);

// fills e.y with |A_r x|^2 plus noise; noise streams are per block so the
// draw sequence does not depend on block iteration order elsewhere
void simulate(MeasurementEnsemble& e, const cvec& x, const NoiseSpec& noise);

// stacked-operator views
struct EnsembleOperator final : LinearOperator {
  const MeasurementEnsemble* e;
  explicit EnsembleOperator(const MeasurementEnsemble& ens) : e(&ens) {}
  std::size_t rows() const override { return e->rows(); }
  std::size_t cols() const override { return e->d; }
  cvec apply(const cvec& z) const override;
  cvec apply_adjoint(const cvec& u) const override;
};

struct BlockOperator final : LinearOperator {
  const MeasurementEnsemble* e;
  std::size_t r;
  BlockOperator(const MeasurementEnsemble& ens, std::size_t block) : e(&ens), r(block) {}
  std::size_t rows() const override { return e->block_rows(r); }
  std::size_t cols() const override { return e->d; }
  cvec apply(const cvec& z) const override { return e->apply_block(r, z); }
  cvec apply_adjoint(const cvec& u) const override { return e->adjoint_block(r, u); }
};

double ensemble_norm(const MeasurementEnsemble& e);            // ||A||
double ensemble_frobenius_norm(const MeasurementEnsemble& e);  // ||A||_F

/* JSON serialization. Numeric payloads (window, dense matrices, y) are raw
 * little-endian f64 in base64; complex data interleaves re/im. Round trips
 * are bit-exact and identical inputs produce identical bytes. */
std::string ensemble_to_json(const MeasurementEnsemble& e);
MeasurementEnsemble ensemble_from_json(const std::string& text);
void save_ensemble(const MeasurementEnsemble& e, const std::string& path);
MeasurementEnsemble load_ensemble(const std::string& path);

}  // namespace saflow
