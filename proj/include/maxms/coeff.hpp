#ifndef MAXMS_COEFF_HPP
#define MAXMS_COEFF_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "maxms/common.hpp"
#include "maxms/mesh.hpp"

// Per-fine-cell relative permeability, ordered lexicographically by (z, y, x).

namespace maxms {

struct CoefficientField {
  std::vector<double> values;  // mu_r per fine cell
  double mu_min = 1.0, mu_max = 1.0;

  double contrast() const { return mu_max / mu_min; }
  std::uint64_t hash() const { return hash_doubles(values); }

  void cache_extrema() {
    if (values.empty()) throw std::invalid_argument("coefficient field is empty");
    mu_min = mu_max = values[0];
    for (double v : values) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::domain_error("coefficient values must be positive and finite");
      mu_min = std::min(mu_min, v);
      mu_max = std::max(mu_max, v);
    }
  }
};

enum class ModelKind { HOMOGENEOUS, RANDOM_CUBES, PERIODIC_RODS, VOXEL_FILE };

struct ModelSpec {
  ModelKind kind = ModelKind::HOMOGENEOUS;
  double inclusion_value = 1e3;
  double background_value = 1.0;
  int cube_count = 4;
  int cube_side = 0;  // voxels; 0 = auto (n/8, at least 1)
  int rod_count = 5;  // rods per axis in the lattice
  double rod_radius = 0.06;  // domain units; lattice pitch is 1/rod_count
  std::uint64_t rng_seed = 1;
  std::string path;  // VOXEL_FILE only
};

inline CoefficientField generate(const ModelSpec& spec, const NestedMesh& mesh) {
  const int n = mesh.n;
  CoefficientField f;
  f.values.assign(std::size_t(mesh.num_cells()), spec.background_value);
  auto at = [&](i64 x, i64 y, i64 z) -> double& {
    return f.values[std::size_t((z * n + y) * n + x)];
  };

  switch (spec.kind) {
    case ModelKind::HOMOGENEOUS:
      break;
    case ModelKind::RANDOM_CUBES: {
      int side = spec.cube_side > 0 ? spec.cube_side : std::max(1, n / 8);
      if (side > n)
        throw std::invalid_argument("cube side exceeds grid");
      Rng rng(spec.rng_seed);
      struct Box { i64 x, y, z; };
      std::vector<Box> placed;
      const int max_attempts = 10000;
      for (int c = 0; c < spec.cube_count; ++c) {
        bool ok = false;
        for (int attempt = 0; attempt < max_attempts && !ok; ++attempt) {
          Box b{rng.uniform_int(0, n - side), rng.uniform_int(0, n - side),
                rng.uniform_int(0, n - side)};
          ok = true;
          for (const Box& q : placed) {
            bool overlap = std::abs(b.x - q.x) < side &&
                           std::abs(b.y - q.y) < side &&
                           std::abs(b.z - q.z) < side;
            if (overlap) {
              ok = false;
              break;
            }
          }
          if (ok) placed.push_back(b);
        }
        if (!ok)
          throw std::runtime_error(
              "random cube placement failed after bounded attempts, seed " +
              std::to_string(spec.rng_seed));
      }
      for (const Box& b : placed)
        for (i64 z = b.z; z < b.z + side; ++z)
          for (i64 y = b.y; y < b.y + side; ++y)
            for (i64 x = b.x; x < b.x + side; ++x)
              at(x, y, z) = spec.inclusion_value;
      break;
    }
    case ModelKind::PERIODIC_RODS: {
      double pitch = 1.0 / spec.rod_count;
      double r2 = spec.rod_radius * spec.rod_radius;
      for (i64 z = 0; z < n; ++z)
        for (i64 y = 0; y < n; ++y)
          for (i64 x = 0; x < n; ++x) {
            double cx = (x + 0.5) * mesh.h, cy = (y + 0.5) * mesh.h;
            bool inside = false;
            for (int ry = 0; ry < spec.rod_count && !inside; ++ry)
              for (int rx = 0; rx < spec.rod_count && !inside; ++rx) {
                double ax = (rx + 0.5) * pitch, ay = (ry + 0.5) * pitch;
                double dx = cx - ax, dy = cy - ay;
                inside = dx * dx + dy * dy <= r2;
              }
            if (inside) at(x, y, z) = spec.inclusion_value;
          }
      break;
    }
    case ModelKind::VOXEL_FILE:
      throw std::invalid_argument("generate: use load_voxels for VOXEL_FILE");
  }
  f.cache_extrema();
  return f;
}

inline void save_voxels(const std::string& path, const CoefficientField& field,
                        const NestedMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open voxel file for writing: " + path);
  out << "MAXWELL-COEFF v1 " << mesh.n << " " << mesh.n << " " << mesh.n
      << " zyx f64le\n";
  out.write(reinterpret_cast<const char*>(field.values.data()),
            std::streamsize(field.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write to voxel file: " + path);
}

inline CoefficientField load_voxels(const std::string& path, const NestedMesh& mesh) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open voxel file: " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version, order, dtype;
  i64 nx = 0, ny = 0, nz = 0;
  hs >> magic >> version >> nx >> ny >> nz >> order >> dtype;
  if (magic != "MAXWELL-COEFF" || version != "v1" || order != "zyx" ||
      dtype != "f64le" || hs.fail())
    throw std::runtime_error("malformed voxel header: " + header);
  if (nx != mesh.n || ny != mesh.n || nz != mesh.n)
    throw std::runtime_error("voxel grid " + std::to_string(nx) + "x" +
                             std::to_string(ny) + "x" + std::to_string(nz) +
                             " does not match mesh with n = " +
                             std::to_string(mesh.n));
  CoefficientField f;
  f.values.resize(std::size_t(mesh.num_cells()));
  in.read(reinterpret_cast<char*>(f.values.data()),
          std::streamsize(f.values.size() * sizeof(double)));
  if (in.gcount() != std::streamsize(f.values.size() * sizeof(double)))
    throw std::runtime_error("voxel payload truncated: " + path);
  f.cache_extrema();
  return f;
}

inline std::vector<double> inverse_values(const CoefficientField& field) {
  std::vector<double> inv(field.values.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / field.values[i];
  return inv;
}

}  // namespace maxms

#endif
