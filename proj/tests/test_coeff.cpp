#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <unistd.h>

#include "support/oracles.hpp"

using namespace maxms;

namespace {

std::string temp_path(const char* stem) {
  return (std::filesystem::temp_directory_path() /
          (std::string(stem) + "-" + std::to_string(::getpid()) + ".voxels"))
      .string();
}

}  // namespace

TEST_CASE("homogeneous model fills the grid with the background value") {
  NestedMesh mesh = build_nested_mesh(2, 4);
  ModelSpec spec;
  CoefficientField f = generate(spec, mesh);
  REQUIRE(f.values.size() == std::size_t(mesh.num_cells()));
  for (double v : f.values) CHECK(v == 1.0);
  CHECK(f.contrast() == 1.0);
}

TEST_CASE("random cubes are deterministic, sized, and non-overlapping") {
  NestedMesh mesh = build_nested_mesh(4, 4);
  ModelSpec spec;
  spec.kind = ModelKind::RANDOM_CUBES;
  spec.cube_count = 4;
  spec.cube_side = 3;
  spec.inclusion_value = 100.0;
  spec.rng_seed = 11;

  CoefficientField a = generate(spec, mesh);
  CoefficientField b = generate(spec, mesh);
  CHECK(a.values == b.values);

  i64 inclusion = 0;
  for (double v : a.values) {
    CHECK((v == 1.0 || v == 100.0));
    if (v == 100.0) ++inclusion;
  }
  // Non-overlap means the inclusion volume is exactly count * side^3.
  CHECK(inclusion == i64(spec.cube_count) * spec.cube_side * spec.cube_side *
                         spec.cube_side);
  CHECK(a.mu_max == 100.0);
  CHECK(a.mu_min == 1.0);

  spec.rng_seed = 12;
  CoefficientField c = generate(spec, mesh);
  CHECK(c.values != a.values);
}

TEST_CASE("impossible cube packings raise instead of looping") {
  NestedMesh mesh = build_nested_mesh(2, 2);
  ModelSpec spec;
  spec.kind = ModelKind::RANDOM_CUBES;
  spec.cube_side = 4;  // one cube fills the whole grid
  spec.cube_count = 2;
  CHECK_THROWS_AS(generate(spec, mesh), std::runtime_error);
  spec.cube_side = 5;
  CHECK_THROWS_AS(generate(spec, mesh), std::invalid_argument);
}

TEST_CASE("periodic rods match a pointwise disc scan and are z-invariant") {
  NestedMesh mesh = build_nested_mesh(4, 4);
  ModelSpec spec;
  spec.kind = ModelKind::PERIODIC_RODS;
  spec.inclusion_value = 1000.0;
  spec.rod_count = 3;
  spec.rod_radius = 0.11;
  CoefficientField f = generate(spec, mesh);

  const int n = mesh.n;
  auto at = [&](i64 x, i64 y, i64 z) {
    return f.values[std::size_t((z * n + y) * n + x)];
  };
  double pitch = 1.0 / spec.rod_count;
  for (i64 y = 0; y < n; ++y)
    for (i64 x = 0; x < n; ++x) {
      double cx = (x + 0.5) * mesh.h, cy = (y + 0.5) * mesh.h;
      bool inside = false;
      for (int ry = 0; ry < spec.rod_count; ++ry)
        for (int rx = 0; rx < spec.rod_count; ++rx) {
          double dx = cx - (rx + 0.5) * pitch, dy = cy - (ry + 0.5) * pitch;
          if (dx * dx + dy * dy <= spec.rod_radius * spec.rod_radius)
            inside = true;
        }
      double want = inside ? spec.inclusion_value : 1.0;
      for (i64 z = 0; z < n; ++z) REQUIRE(at(x, y, z) == want);
    }

  i64 rod_cells = 0;
  for (double v : f.values)
    if (v == spec.inclusion_value) ++rod_cells;
  CHECK(rod_cells > 0);
  CHECK(rod_cells < mesh.num_cells());
}

TEST_CASE("contrast of a power-of-ten inclusion is exact") {
  NestedMesh mesh = build_nested_mesh(2, 4);
  ModelSpec spec;
  spec.kind = ModelKind::PERIODIC_RODS;
  spec.rod_count = 2;
  spec.rod_radius = 0.2;
  for (double p : {1.0, 2.0, 3.0, 4.0}) {
    spec.inclusion_value = std::pow(10.0, p);
    CoefficientField f = generate(spec, mesh);
    CHECK(f.contrast() == spec.inclusion_value);
  }
}

TEST_CASE("voxel files round-trip bit for bit") {
  NestedMesh mesh = build_nested_mesh(3, 2);
  CoefficientField f = oracle::random_field(mesh, 21, 0.5, 50.0);
  std::string path = temp_path("roundtrip");
  save_voxels(path, f, mesh);
  CoefficientField g = load_voxels(path, mesh);
  CHECK(g.values == f.values);
  CHECK(g.mu_min == f.mu_min);
  CHECK(g.mu_max == f.mu_max);
  std::filesystem::remove(path);
}

TEST_CASE("a single hot voxel sets the contrast") {
  NestedMesh mesh = build_nested_mesh(2, 2);
  CoefficientField f;
  f.values.assign(std::size_t(mesh.num_cells()), 1.0);
  f.values[13] = 1000.0;
  f.cache_extrema();
  std::string path = temp_path("hotvoxel");
  save_voxels(path, f, mesh);
  CoefficientField g = load_voxels(path, mesh);
  CHECK(g.contrast() == 1000.0);
  std::filesystem::remove(path);
}

TEST_CASE("voxel loader rejects malformed input") {
  NestedMesh mesh = build_nested_mesh(2, 2);
  std::string path = temp_path("badvoxel");

  CHECK_THROWS_AS(load_voxels(path + ".missing", mesh), std::runtime_error);

  {
    std::ofstream out(path, std::ios::binary);
    out << "NOT-A-HEADER\n";
  }
  CHECK_THROWS_WITH(load_voxels(path, mesh),
                    Catch::Matchers::ContainsSubstring("malformed"));

  {
    std::ofstream out(path, std::ios::binary);
    out << "MAXWELL-COEFF v1 8 8 8 zyx f64le\n";
  }
  CHECK_THROWS_WITH(load_voxels(path, mesh),
                    Catch::Matchers::ContainsSubstring("does not match"));

  {
    std::ofstream out(path, std::ios::binary);
    out << "MAXWELL-COEFF v1 4 4 4 zyx f64le\n";
    double one = 1.0;  // payload far too short
    out.write(reinterpret_cast<const char*>(&one), sizeof one);
  }
  CHECK_THROWS_WITH(load_voxels(path, mesh),
                    Catch::Matchers::ContainsSubstring("truncated"));
  std::filesystem::remove(path);
}

TEST_CASE("field validation rejects nonpositive values") {
  CoefficientField f;
  f.values = {1.0, -2.0};
  CHECK_THROWS_AS(f.cache_extrema(), std::domain_error);
  f.values = {};
  CHECK_THROWS_AS(f.cache_extrema(), std::invalid_argument);
}

TEST_CASE("inverse values multiply back to one") {
  NestedMesh mesh = build_nested_mesh(2, 3);
  CoefficientField f = oracle::random_field(mesh, 9, 0.1, 1000.0);
  std::vector<double> inv = inverse_values(f);
  REQUIRE(inv.size() == f.values.size());
  for (std::size_t i = 0; i < inv.size(); ++i)
    CHECK(std::abs(inv[i] * f.values[i] - 1.0) < 1e-15);
}
