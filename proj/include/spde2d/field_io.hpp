#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spde2d/errors.hpp"
#include "spde2d/model.hpp"

namespace spde2d {

// Field file layout: 8 ASCII magic bytes "SPDE2D01", three little-endian
// uint32 dims (n_time+1, n_y, n_z), then the float64 payload in index order
// time, y, z. Grid geometry and provenance live in a key-value sidecar at
// <path>.meta.

inline constexpr char kFieldMagic[8] = {'S', 'P', 'D', 'E', '2', 'D', '0', '1'};

namespace detail {

static_assert(sizeof(double) == 8);

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::string axis_to_string(const Axis& a) {
  if (a.is_uniform()) return "uniform " + std::to_string(a.uniform_m);
  std::ostringstream os;
  os.precision(17);
  os << "explicit";
  for (double v : a.nodes) os << ' ' << v;
  return os.str();
}

inline Axis axis_from_string(const std::string& s) {
  std::istringstream is(s);
  std::string kind;
  is >> kind;
  if (kind == "uniform") {
    int m = 0;
    is >> m;
    return Axis::uniform(m);
  }
  if (kind == "explicit") {
    std::vector<double> nodes;
    double v;
    while (is >> v) nodes.push_back(v);
    return Axis::explicit_nodes(std::move(nodes));
  }
  throw Error(ErrorCode::BadConfig, "unknown axis kind '" + kind + "'");
}

}  // namespace detail

inline void write_field(const FieldRecord& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::BadConfig, "cannot open '" + path + "' for writing");
  os.write(kFieldMagic, 8);
  detail::write_u32(os, static_cast<std::uint32_t>(f.nt()));
  detail::write_u32(os, static_cast<std::uint32_t>(f.ny()));
  detail::write_u32(os, static_cast<std::uint32_t>(f.nz()));
  os.write(reinterpret_cast<const char*>(f.values.data()),
           static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!os) throw Error(ErrorCode::BadConfig, "short write to '" + path + "'");

  std::ofstream meta(path + ".meta", std::ios::trunc);
  meta.precision(17);
  meta << "n_time = " << f.grid.n_time << "\n";
  meta << "time_step = " << f.grid.time_step << "\n";
  meta << "y_axis = " << detail::axis_to_string(f.grid.y) << "\n";
  meta << "z_axis = " << detail::axis_to_string(f.grid.z) << "\n";
  meta << "theta0 = " << f.params.theta0 << "\n";
  meta << "theta1 = " << f.params.theta1 << "\n";
  meta << "eta1 = " << f.params.eta1 << "\n";
  meta << "theta2 = " << f.params.theta2 << "\n";
  meta << "sigma = " << f.params.sigma << "\n";
  meta << "alpha = " << f.params.alpha << "\n";
  meta << "noise = " << noise_family_name(f.params.noise) << "\n";
  meta << "mu0 = " << f.params.mu0 << "\n";
  meta << "L1 = " << f.trunc.L1 << "\n";
  meta << "L2 = " << f.trunc.L2 << "\n";
  meta << "seed = " << f.seed << "\n";
  meta << "scheme = " << f.scheme << "\n";
  meta << "em_unstable = " << (f.em_unstable ? 1 : 0) << "\n";
  if (!meta) throw Error(ErrorCode::BadConfig, "cannot write sidecar for '" + path + "'");
}

inline FieldRecord read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::BadConfig, "cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kFieldMagic, 8) != 0)
    throw Error(ErrorCode::BadMagic, "'" + path + "' is not a field file");
  const std::uint32_t nt = detail::read_u32(is);
  const std::uint32_t ny = detail::read_u32(is);
  const std::uint32_t nz = detail::read_u32(is);
  if (!is) throw Error(ErrorCode::TruncatedFile, "header ends early");
  if (nt == 0 || ny == 0 || nz == 0) throw Error(ErrorCode::DimMismatch, "zero dimension");
  FieldRecord f;
  const std::size_t count = static_cast<std::size_t>(nt) * ny * nz;
  f.values.resize(count);
  is.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(is.gcount()) != count * sizeof(double))
    throw Error(ErrorCode::TruncatedFile, "payload shorter than the header promises");
  is.peek();
  if (!is.eof()) throw Error(ErrorCode::TruncatedFile, "trailing bytes after payload");

  std::ifstream meta(path + ".meta");
  if (!meta) throw Error(ErrorCode::BadConfig, "missing sidecar '" + path + ".meta'");
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(val);
    if (key == "n_time") f.grid.n_time = std::stoi(val);
    else if (key == "time_step") f.grid.time_step = std::stod(val);
    else if (key == "y_axis") f.grid.y = detail::axis_from_string(val);
    else if (key == "z_axis") f.grid.z = detail::axis_from_string(val);
    else if (key == "theta0") f.params.theta0 = std::stod(val);
    else if (key == "theta1") f.params.theta1 = std::stod(val);
    else if (key == "eta1") f.params.eta1 = std::stod(val);
    else if (key == "theta2") f.params.theta2 = std::stod(val);
    else if (key == "sigma") f.params.sigma = std::stod(val);
    else if (key == "alpha") f.params.alpha = std::stod(val);
    else if (key == "noise") f.params.noise = (val == "q2") ? NoiseFamily::Q2 : NoiseFamily::Q1;
    else if (key == "mu0") f.params.mu0 = std::stod(val);
    else if (key == "L1") f.trunc.L1 = std::stoi(val);
    else if (key == "L2") f.trunc.L2 = std::stoi(val);
    else if (key == "seed") f.seed = std::stoull(val);
    else if (key == "scheme") f.scheme = val;
    else if (key == "em_unstable") f.em_unstable = val == "1";
  }
  if (f.grid.n_time + 1 != static_cast<int>(nt) || f.grid.y.count() != static_cast<int>(ny) ||
      f.grid.z.count() != static_cast<int>(nz))
    throw Error(ErrorCode::DimMismatch, "sidecar grid disagrees with binary dims");
  return f;
}

}  // namespace spde2d
