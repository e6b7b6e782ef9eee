#ifndef HEATSC_IO_HPP
#define HEATSC_IO_HPP

// CSV output and the on-disk cache of Galerkin decompositions.
//
// Cache file layout (all integers unsigned 64-bit, all reals IEEE doubles,
// both little-endian):
//
//   magic "HEATSCD1"
//   header: kind, dim, rank, cutoff, block_count
//   reals:  hbar, potential_floor, potential_ceil, scale[0..dim-1]
//   per block:
//     header: mode_count, is_real, has_vectors
//     ints:   mode_count * dim wave-vector entries (two's complement)
//     reals:  eigenvalues (mode_count * rank)
//     reals:  eigenvectors column-major, complex entries as (re, im) pairs
//
// Files are named by the FNV-1a hash of a canonical JSON description of
// (manifold, fields, hbar, cutoff).

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "heatsc/errors.hpp"
#include "heatsc/spectral_oracle.hpp"

namespace heatsc {

/// Shortest-exact decimal form used in every CSV cell.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot open " + path.string() + " for writing");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ValidationError("truncated decomposition cache file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace detail

inline void save_decomposition(const std::filesystem::path& path, const SpectralDecomposition& sd) {
  if (sd.mode != SpectralMode::galerkin) throw ValidationError("only Galerkin decompositions are cached");
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw ValidationError("cannot write cache file " + tmp);
    os.write("HEATSCD1", 8);
    const auto& m = sd.manifold;
    detail::put_u64(os, static_cast<std::uint64_t>(m.kind()));
    detail::put_u64(os, static_cast<std::uint64_t>(m.dim()));
    detail::put_u64(os, static_cast<std::uint64_t>(sd.rank));
    detail::put_u64(os, static_cast<std::uint64_t>(sd.cutoff));
    detail::put_u64(os, sd.blocks.size());
    detail::put_f64(os, sd.hbar);
    detail::put_f64(os, sd.potential_floor);
    detail::put_f64(os, sd.potential_ceil);
    for (int i = 0; i < m.dim(); ++i) detail::put_f64(os, m.kind() == ManifoldKind::circle ? m.scale()[0] : m.scale()[i]);
    for (const auto& b : sd.blocks) {
      detail::put_u64(os, b.modes.size());
      detail::put_u64(os, b.real ? 1 : 0);
      detail::put_u64(os, b.has_vectors() ? 1 : 0);
      for (const auto& k : b.modes)
        for (int v : k) detail::put_u64(os, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
      for (Eigen::Index i = 0; i < b.eigenvalues.size(); ++i) detail::put_f64(os, b.eigenvalues[i]);
      if (!b.has_vectors()) continue;
      if (b.real) {
        for (Eigen::Index i = 0; i < b.vectors_real.size(); ++i) detail::put_f64(os, b.vectors_real.data()[i]);
      } else {
        for (Eigen::Index i = 0; i < b.vectors_complex.size(); ++i) {
          detail::put_f64(os, b.vectors_complex.data()[i].real());
          detail::put_f64(os, b.vectors_complex.data()[i].imag());
        }
      }
    }
  }
  std::filesystem::rename(tmp, path);
}

inline SpectralDecomposition load_decomposition(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open cache file " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != "HEATSCD1") throw ValidationError("not a decomposition cache file");
  const auto kind = static_cast<ManifoldKind>(detail::get_u64(is));
  const int dim = static_cast<int>(detail::get_u64(is));
  SpectralDecomposition sd;
  sd.mode = SpectralMode::galerkin;
  sd.rank = static_cast<int>(detail::get_u64(is));
  sd.cutoff = static_cast<int>(detail::get_u64(is));
  const auto nblocks = detail::get_u64(is);
  sd.hbar = detail::get_f64(is);
  sd.potential_floor = detail::get_f64(is);
  sd.potential_ceil = detail::get_f64(is);
  std::vector<double> scale(dim);
  for (auto& s : scale) s = detail::get_f64(is);
  if (kind == ManifoldKind::circle)
    sd.manifold = ModelManifold::circle(scale[0]);
  else if (kind == ManifoldKind::flat_torus)
    sd.manifold = ModelManifold::flat_torus(scale);
  else
    throw ValidationError("cache file names an unsupported manifold");
  for (std::uint64_t bi = 0; bi < nblocks; ++bi) {
    GalerkinBlock b;
    const auto nm = detail::get_u64(is);
    b.real = detail::get_u64(is) != 0;
    const bool vectors = detail::get_u64(is) != 0;
    b.modes.assign(nm, std::vector<int>(dim));
    for (auto& k : b.modes)
      for (auto& v : k) v = static_cast<int>(static_cast<std::int64_t>(detail::get_u64(is)));
    const auto d = static_cast<Eigen::Index>(nm) * sd.rank;
    b.eigenvalues.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) b.eigenvalues[i] = detail::get_f64(is);
    if (vectors) {
      if (b.real) {
        b.vectors_real.resize(d, d);
        for (Eigen::Index i = 0; i < d * d; ++i) b.vectors_real.data()[i] = detail::get_f64(is);
      } else {
        b.vectors_complex.resize(d, d);
        for (Eigen::Index i = 0; i < d * d; ++i) {
          const double re = detail::get_f64(is);
          b.vectors_complex.data()[i] = {re, detail::get_f64(is)};
        }
      }
    }
    sd.blocks.push_back(std::move(b));
  }
  return sd;
}

}  // namespace heatsc

#endif  // HEATSC_IO_HPP
