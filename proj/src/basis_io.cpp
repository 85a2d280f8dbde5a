// Basis cache layout (all little-endian):
//   8 bytes   magic "GFBASIS1"
//   u64       grid size n
//   u64       number of modes J
//   f64       s, dx, L
//   f64 x n   grid points
//   f64 x J   eigenvalues
//   f64 x nJ  eigenvectors, one eigenvector (n values) after another
// The potential is rebuilt from s as (1 + x^2)^{s/2}.

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/spectral.hpp"

namespace gibbsflow {

namespace {

constexpr char kMagic[8] = {'G', 'F', 'B', 'A', 'S', 'I', 'S', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  unsigned char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

template <typename T>
T read_le(std::istream& in) {
  static_assert(sizeof(T) == 8);
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw IoError("basis cache truncated");
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace

void save_basis(const SpectralBasis& basis, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(basis.grid_size()));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(basis.n_modes()));
  write_le<double>(out, basis.s());
  write_le<double>(out, basis.grid().spacing);
  write_le<double>(out, basis.grid().half_extent);
  for (Index i = 0; i < basis.grid_size(); ++i) write_le<double>(out, basis.grid().points(i));
  for (Index j = 0; j < basis.n_modes(); ++j) write_le<double>(out, basis.lambda(j));
  for (Index j = 0; j < basis.n_modes(); ++j) {
    for (Index i = 0; i < basis.grid_size(); ++i) {
      write_le<double>(out, basis.eigenvectors()(i, j));
    }
  }
  if (!out) throw IoError("write to " + path + " failed");
}

SpectralBasis load_basis(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError(path + " is not a GFBASIS1 cache");
  }
  const auto n = static_cast<Index>(read_le<std::uint64_t>(in));
  const auto modes = static_cast<Index>(read_le<std::uint64_t>(in));
  if (n < 64 || modes < 1 || modes > n) throw IoError("corrupt basis header");
  const double s = read_le<double>(in);
  const double dx = read_le<double>(in);
  const double half_extent = read_le<double>(in);

  Grid grid;
  grid.spacing = dx;
  grid.half_extent = half_extent;
  grid.points.resize(n);
  for (Index i = 0; i < n; ++i) grid.points(i) = read_le<double>(in);

  Eigen::VectorXd lambdas(modes);
  for (Index j = 0; j < modes; ++j) lambdas(j) = read_le<double>(in);
  Eigen::MatrixXd vectors(n, modes);
  for (Index j = 0; j < modes; ++j) {
    for (Index i = 0; i < n; ++i) vectors(i, j) = read_le<double>(in);
  }
  return SpectralBasis(grid, build_potential(s, grid), std::move(lambdas),
                       std::move(vectors));
}

}  // namespace gibbsflow
