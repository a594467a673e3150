#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "vop/field.hpp"

namespace vop {

// VOPF1 binary field format:
//   magic "VOPF1\0" (6 bytes), u8 dim, u8 m,
//   per axis: u32 node count (LE),
//   per axis: f64 lo, f64 hi (LE),
//   node data: f64 LE, row-major with the last axis fastest, m components
//   interleaved per node.

static_assert(std::endian::native == std::endian::little,
              "VOPF1 writer assumes a little-endian host");

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("VOPF1: truncated file");
  return v;
}

}  // namespace detail

inline void write_field(const VectorField& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write("VOPF1\0", 6);
  detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(f.grid.dim));
  detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(f.m));
  for (int a = 0; a < f.grid.dim; ++a)
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(f.grid.count[a]));
  for (int a = 0; a < f.grid.dim; ++a) {
    detail::put<double>(os, f.grid.lo[a]);
    detail::put<double>(os, f.grid.hi[a]);
  }
  os.write(reinterpret_cast<const char*>(f.values.data()),
           static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!os) throw IoError("write failed: " + path);
}

inline VectorField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[6];
  is.read(magic, 6);
  if (!is || std::memcmp(magic, "VOPF1\0", 6) != 0)
    throw FormatError("VOPF1: bad magic");
  const int dim = detail::get<std::uint8_t>(is);
  const int m = detail::get<std::uint8_t>(is);
  if (dim < 1 || dim > 3 || m < 1) throw FormatError("VOPF1: bad header shape");
  std::array<std::int64_t, 3> count{};
  for (int a = 0; a < dim; ++a) {
    count[a] = detail::get<std::uint32_t>(is);
    if (count[a] < 3) throw FormatError("VOPF1: node count below 3");
  }
  std::array<std::array<double, 2>, 3> ext{};
  for (int a = 0; a < dim; ++a) {
    ext[a][0] = detail::get<double>(is);
    ext[a][1] = detail::get<double>(is);
    if (!(ext[a][0] < ext[a][1])) throw FormatError("VOPF1: degenerate extent");
  }
  Grid g = make_grid(dim, std::span(ext.data(), static_cast<std::size_t>(dim)),
                     std::span(count.data(), static_cast<std::size_t>(dim)));
  VectorField f(g, m);
  is.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!is) throw FormatError("VOPF1: truncated node data");
  if (!f.all_finite()) throw FormatError("VOPF1: non-finite node values");
  return f;
}

}  // namespace vop
