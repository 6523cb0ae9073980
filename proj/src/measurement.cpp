#include "saflow/measurement.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace saflow {

namespace {

using json = nlohmann::json;

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(kB64[(v >> 6) & 63]);
    out.push_back(kB64[v & 63]);
  }
  const std::size_t rem = bytes.size() - i;
  if (rem == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out += "==";
  } else if (rem == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(kB64[(v >> 6) & 63]);
    out += "=";
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::array<int, 256> lut;
  lut.fill(-1);
  for (int i = 0; i < 64; ++i) lut[(unsigned char)kB64[i]] = i;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t v = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int x = lut[(unsigned char)c];
    if (x < 0) throw std::invalid_argument("base64: invalid character");
    v = (v << 6) | std::uint32_t(x);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(std::uint8_t(v >> bits));
    }
  }
  return out;
}

// explicit little-endian layout, independent of host byte order
void push_f64(std::vector<std::uint8_t>& bytes, double x) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) bytes.push_back(std::uint8_t(u >> (8 * b)));
}

double pop_f64(const std::vector<std::uint8_t>& bytes, std::size_t pos) {
  std::uint64_t u = 0;
  for (int b = 0; b < 8; ++b) u |= std::uint64_t(bytes[pos + b]) << (8 * b);
  return std::bit_cast<double>(u);
}

std::string encode_real(const std::vector<double>& v) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(v.size() * 8);
  for (double x : v) push_f64(bytes, x);
  return base64_encode(bytes);
}

std::vector<double> decode_real(const std::string& text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 8 != 0) throw std::invalid_argument("payload: byte count not a multiple of 8");
  std::vector<double> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = pop_f64(bytes, i * 8);
  return v;
}

std::string encode_complex(const cvec& v) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(v.size() * 16);
  for (const auto& e : v) {
    push_f64(bytes, e.real());
    push_f64(bytes, e.imag());
  }
  return base64_encode(bytes);
}

cvec decode_complex(const std::string& text) {
  const auto flat = decode_real(text);
  if (flat.size() % 2 != 0) throw std::invalid_argument("payload: odd f64 count for complex data");
  cvec v(flat.size() / 2);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = {flat[2 * i], flat[2 * i + 1]};
  return v;
}

}  // namespace

std::size_t MeasurementEnsemble::block_rows(std::size_t r) const {
  const Block& b = blocks.at(r);
  return b.kind == Block::Kind::dense ? b.dense.m : d;
}

std::size_t MeasurementEnsemble::rows() const {
  std::size_t total = 0;
  for (std::size_t r = 0; r < blocks.size(); ++r) total += block_rows(r);
  return total;
}

cvec MeasurementEnsemble::shifted_window(std::size_t r) const {
  const Block& b = blocks.at(r);
  if (b.kind != Block::Kind::stft)
    throw std::invalid_argument("shifted_window: block is not a windowed-DFT block");
  return circular_shift(window, b.shift);
}

cvec MeasurementEnsemble::apply_block(std::size_t r, const cvec& z) const {
  if (z.size() != d) throw std::invalid_argument("apply_block: size mismatch");
  const Block& b = blocks.at(r);
  if (b.kind == Block::Kind::dense) return b.dense.apply(z);
  cvec masked = circular_shift(window, b.shift);
  for (std::size_t j = 0; j < d; ++j) masked[j] *= z[j];
  return dft(masked);
}

cvec MeasurementEnsemble::adjoint_block(std::size_t r, const cvec& u) const {
  const Block& b = blocks.at(r);
  if (b.kind == Block::Kind::dense) return b.dense.apply_adjoint(u);
  if (u.size() != d) throw std::invalid_argument("adjoint_block: size mismatch");
  cvec out = dft_adjoint(u);
  const cvec sw = circular_shift(window, b.shift);
  for (std::size_t j = 0; j < d; ++j) out[j] *= std::conj(sw[j]);
  return out;
}

double MeasurementEnsemble::block_norm_sq(std::size_t r) const {
  const Block& b = blocks.at(r);
  if (b.kind == Block::Kind::stft) {
    double winf = 0.0;
    for (const auto& e : window) winf = std::max(winf, std::abs(e));
    return double(d) * winf * winf;
  }
  // a single row has spectral norm equal to its 2-norm, no iteration needed
  if (b.dense.m == 1) return b.dense.row_norm_sq(0);
  const double s = spectral_norm(BlockOperator(*this, r));
  return s * s;
}

MeasurementEnsemble build_stft_ensemble(std::size_t d, const cvec& window,
                                        const std::vector<long long>& shifts) {
  if (d == 0) throw std::invalid_argument("build_stft_ensemble: d must be positive");
  if (window.size() != d) throw std::invalid_argument("build_stft_ensemble: window length != d");
  bool nonzero = false;
  for (const auto& e : window) nonzero = nonzero || (e != cdouble(0.0));
  if (!nonzero) throw std::invalid_argument("build_stft_ensemble: window is identically zero");
  if (shifts.empty() || shifts.size() > d)
    throw std::invalid_argument("build_stft_ensemble: need 1 <= R <= d shifts");
  std::set<long long> reduced;
  for (long long s : shifts) reduced.insert(((s % (long long)d) + (long long)d) % (long long)d);
  if (reduced.size() != shifts.size())
    throw std::invalid_argument("build_stft_ensemble: shifts must be distinct mod d");

  MeasurementEnsemble e;
  e.d = d;
  e.window = window;
  e.blocks.reserve(shifts.size());
  for (long long s : shifts) {
    Block b;
    b.kind = Block::Kind::stft;
    b.shift = ((s % (long long)d) + (long long)d) % (long long)d;
    e.blocks.push_back(std::move(b));
  }
  return e;
}

MeasurementEnsemble build_dense_ensemble(std::size_t d, std::vector<DenseOperator> ops) {
  if (d == 0) throw std::invalid_argument("build_dense_ensemble: d must be positive");
  if (ops.empty()) throw std::invalid_argument("build_dense_ensemble: need at least one block");
  MeasurementEnsemble e;
  e.d = d;
  e.blocks.reserve(ops.size());
  for (auto& op : ops) {
    if (op.n != d) throw std::invalid_argument("build_dense_ensemble: block column count != d");
    if (op.m == 0) throw std::invalid_argument("build_dense_ensemble: empty block");
    Block b;
    b.kind = Block::Kind::dense;
    b.dense = std::move(op);
    e.blocks.push_back(std::move(b));
  }
  return e;
}

MeasurementEnsemble build_row_partition(const DenseOperator& a) {
  if (a.m == 0 || a.n == 0) throw std::invalid_argument("build_row_partition: empty matrix");
  std::vector<DenseOperator> rows;
  rows.reserve(a.m);
  for (std::size_t i = 0; i < a.m; ++i) {
    cvec row(a.a.begin() + (long long)(i * a.n), a.a.begin() + (long long)((i + 1) * a.n));
    rows.emplace_back(1, a.n, std::move(row));
  }
  return build_dense_ensemble(a.n, std::move(rows));
}

void simulate(MeasurementEnsemble& e, const cvec& x, const NoiseSpec& noise) {
  if (x.size() != e.d) throw std::invalid_argument("simulate: x length != d");
  if (noise.kind == NoiseSpec::Kind::gaussian && !(noise.sigma >= 0.0))
    throw std::invalid_argument("simulate: gaussian sigma must be >= 0");
  if (noise.kind == NoiseSpec::Kind::poisson && !(noise.scale > 0.0))
    throw std::invalid_argument("simulate: poisson scale must be > 0");

  e.y.assign(e.block_count(), {});
  for (std::size_t r = 0; r < e.block_count(); ++r) {
    const cvec w = e.apply_block(r, x);
    std::vector<double>& yr = e.y[r];
    yr.resize(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) yr[j] = std::norm(w[j]);
    if (noise.kind == NoiseSpec::Kind::gaussian && noise.sigma > 0.0) {
      SeededRng rng(noise.seed, r);
      for (auto& v : yr) v += noise.sigma * rng.next_gaussian();
    } else if (noise.kind == NoiseSpec::Kind::poisson) {
      SeededRng rng(noise.seed, r);
      for (auto& v : yr) v = double(rng.next_poisson(noise.scale * v)) / noise.scale;
    }
  }
}

cvec EnsembleOperator::apply(const cvec& z) const {
  cvec out;
  out.reserve(rows());
  for (std::size_t r = 0; r < e->block_count(); ++r) {
    const cvec w = e->apply_block(r, z);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

cvec EnsembleOperator::apply_adjoint(const cvec& u) const {
  if (u.size() != rows()) throw std::invalid_argument("EnsembleOperator: size mismatch");
  cvec out(e->d, 0.0);
  std::size_t pos = 0;
  for (std::size_t r = 0; r < e->block_count(); ++r) {
    const std::size_t mr = e->block_rows(r);
    const cvec ur(u.begin() + (long long)pos, u.begin() + (long long)(pos + mr));
    const cvec back = e->adjoint_block(r, ur);
    for (std::size_t j = 0; j < e->d; ++j) out[j] += back[j];
    pos += mr;
  }
  return out;
}

double ensemble_norm(const MeasurementEnsemble& e) {
  return spectral_norm(EnsembleOperator(e));
}

double ensemble_frobenius_norm(const MeasurementEnsemble& e) {
  double s = 0.0;
  for (std::size_t r = 0; r < e.block_count(); ++r) {
    const Block& b = e.blocks[r];
    if (b.kind == Block::Kind::dense) {
      const double f = frobenius_norm(b.dense);
      s += f * f;
    } else {
      // ||F diag(v)||_F^2 = d ||v||_2^2 and shifts preserve the window norm
      const double wn = norm2(e.window);
      s += double(e.d) * wn * wn;
    }
  }
  return std::sqrt(s);
}

std::string ensemble_to_json(const MeasurementEnsemble& e) {
  json root;
  root["format"] = 1;
  root["d"] = e.d;
  if (e.is_stft()) root["window"] = encode_complex(e.window);
  json blocks = json::array();
  for (const Block& b : e.blocks) {
    json jb;
    if (b.kind == Block::Kind::stft) {
      jb["type"] = "stft";
      jb["shift"] = b.shift;
    } else {
      jb["type"] = "dense";
      jb["rows"] = b.dense.m;
      jb["matrix"] = encode_complex(b.dense.a);
    }
    blocks.push_back(std::move(jb));
  }
  root["blocks"] = std::move(blocks);
  json ys = json::array();
  for (const auto& yr : e.y) ys.push_back(encode_real(yr));
  root["y"] = std::move(ys);
  return root.dump(2) + "\n";
}

MeasurementEnsemble ensemble_from_json(const std::string& text) {
  const json root = json::parse(text);
  if (!root.contains("d")) throw std::invalid_argument("ensemble: missing d");
  const std::size_t d = root.at("d").get<std::size_t>();
  const bool stft = root.contains("window");

  MeasurementEnsemble e;
  if (stft) {
    cvec window = decode_complex(root.at("window").get<std::string>());
    std::vector<long long> shifts;
    for (const auto& jb : root.at("blocks")) {
      if (jb.at("type").get<std::string>() != "stft")
        throw std::invalid_argument("ensemble: mixed block types are not supported");
      shifts.push_back(jb.at("shift").get<long long>());
    }
    e = build_stft_ensemble(d, window, shifts);
  } else {
    std::vector<DenseOperator> ops;
    for (const auto& jb : root.at("blocks")) {
      if (jb.at("type").get<std::string>() != "dense")
        throw std::invalid_argument("ensemble: mixed block types are not supported");
      const std::size_t rows = jb.at("rows").get<std::size_t>();
      cvec entries = decode_complex(jb.at("matrix").get<std::string>());
      ops.emplace_back(rows, d, std::move(entries));
    }
    e = build_dense_ensemble(d, std::move(ops));
  }

  if (root.contains("y") && !root.at("y").empty()) {
    const auto& ys = root.at("y");
    if (ys.size() != e.block_count())
      throw std::invalid_argument("ensemble: y block count mismatch");
    e.y.reserve(ys.size());
    for (std::size_t r = 0; r < ys.size(); ++r) {
      auto yr = decode_real(ys[r].get<std::string>());
      if (yr.size() != e.block_rows(r))
        throw std::invalid_argument("ensemble: y row count mismatch");
      e.y.push_back(std::move(yr));
    }
  }
  return e;
}

void save_ensemble(const MeasurementEnsemble& e, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_ensemble: cannot open " + path);
  out << ensemble_to_json(e);
  if (!out) throw std::runtime_error("save_ensemble: write failed for " + path);
}

MeasurementEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_ensemble: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ensemble_from_json(buf.str());
}

}  // namespace saflow
