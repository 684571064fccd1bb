#ifndef MAXMS_MESH_HPP
#define MAXMS_MESH_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "maxms/common.hpp"
#include "maxms/element.hpp"

// Nested coarse/fine axis-aligned cube grids on the unit cube. Every edge is
// directed along its positive axis; numbering is x-edges, then y-edges, then
// z-edges, each family lexicographic by (z, y, x) of the edge origin.

namespace maxms {

using i64 = std::int64_t;

// Edge numbering for an axis-aligned box of wx*wy*wz cells.
struct BoxEdgeIndexer {
  i64 wx = 0, wy = 0, wz = 0;

  i64 family_count(int f) const {
    if (f == 0) return wx * (wy + 1) * (wz + 1);
    if (f == 1) return (wx + 1) * wy * (wz + 1);
    return (wx + 1) * (wy + 1) * wz;
  }
  i64 family_offset(int f) const {
    i64 off = 0;
    for (int q = 0; q < f; ++q) off += family_count(q);
    return off;
  }
  i64 count() const { return family_offset(3); }

  i64 id(int f, i64 ix, i64 iy, i64 iz) const {
    if (f == 0) return (iz * (wy + 1) + iy) * wx + ix;
    if (f == 1) return family_offset(1) + (iz * wy + iy) * (wx + 1) + ix;
    return family_offset(2) + (iz * (wy + 1) + iy) * (wx + 1) + ix;
  }

  // Inverse of id(); origin lattice coordinates and family.
  void decode(i64 id, int& f, i64& ix, i64& iy, i64& iz) const {
    i64 c0 = family_count(0), c1 = family_count(1);
    if (id < c0) {
      f = 0;
      ix = id % wx;
      iy = (id / wx) % (wy + 1);
      iz = id / (wx * (wy + 1));
    } else if (id < c0 + c1) {
      id -= c0;
      f = 1;
      ix = id % (wx + 1);
      iy = (id / (wx + 1)) % wy;
      iz = id / ((wx + 1) * wy);
    } else {
      id -= c0 + c1;
      f = 2;
      ix = id % (wx + 1);
      iy = (id / (wx + 1)) % (wy + 1);
      iz = id / ((wx + 1) * (wy + 1));
    }
  }

  // Global edge id of local edge le of cell (cx, cy, cz).
  i64 cell_edge(i64 cx, i64 cy, i64 cz, int le) const {
    LocalEdge E = local_edge(le);
    if (E.family == 0) return id(0, cx, cy + E.a, cz + E.b);
    if (E.family == 1) return id(1, cx + E.a, cy, cz + E.b);
    return id(2, cx + E.a, cy + E.b, cz);
  }
};

struct NestedMesh {
  int n_coarse = 0;          // coarse cells per axis
  int n_fine_per_coarse = 0; // fine cells per coarse cell per axis
  int n = 0;                 // fine cells per axis
  double H = 0.0, h = 0.0;
  BoxEdgeIndexer edges;

  i64 num_edges() const { return edges.count(); }
  i64 num_cells() const { return i64(n) * n * n; }
  i64 num_coarse() const { return i64(n_coarse) * n_coarse * n_coarse; }
  i64 num_vertices() const { return i64(n + 1) * (n + 1) * (n + 1); }

  i64 cell_id(i64 cx, i64 cy, i64 cz) const { return (cz * n + cy) * n + cx; }
  void cell_coords(i64 id, i64& cx, i64& cy, i64& cz) const {
    cx = id % n;
    cy = (id / n) % n;
    cz = id / (i64(n) * n);
  }
  i64 coarse_id(i64 ci, i64 cj, i64 ck) const {
    return (ck * n_coarse + cj) * n_coarse + ci;
  }
  void coarse_coords(i64 id, i64& ci, i64& cj, i64& ck) const {
    ci = id % n_coarse;
    cj = (id / n_coarse) % n_coarse;
    ck = id / (i64(n_coarse) * n_coarse);
  }
  i64 vertex_id(i64 ix, i64 iy, i64 iz) const {
    return (iz * (n + 1) + iy) * (n + 1) + ix;
  }
};

inline NestedMesh build_nested_mesh(int n_coarse_per_axis, int n_fine_per_coarse,
                                    int fine_cap = 128) {
  if (n_coarse_per_axis < 1 || n_fine_per_coarse < 1)
    throw std::invalid_argument("build_nested_mesh: subdivisions must be >= 1");
  i64 n = i64(n_coarse_per_axis) * n_fine_per_coarse;
  if (n > fine_cap)
    throw std::length_error("build_nested_mesh: fine cells per axis " +
                            std::to_string(n) + " exceeds cap " +
                            std::to_string(fine_cap));
  NestedMesh m;
  m.n_coarse = n_coarse_per_axis;
  m.n_fine_per_coarse = n_fine_per_coarse;
  m.n = int(n);
  m.H = 1.0 / n_coarse_per_axis;
  m.h = m.H / n_fine_per_coarse;
  m.edges = BoxEdgeIndexer{n, n, n};
  return m;
}

enum class EdgeClass : std::uint8_t { INTERIOR, PATCH_BOUNDARY, DOMAIN_BOUNDARY };

struct Patch {
  i64 center_element = -1;
  int layers = 0;
  std::array<i64, 3> clo{}, chi{};  // coarse-element box, inclusive
  std::array<i64, 3> flo{}, fhi{};  // fine-cell box, half-open
  BoxEdgeIndexer edges;             // local numbering over the box
  int n_global = 0;                 // fine cells per axis of the parent mesh
  std::vector<i64> coarse_elements;
  std::vector<i64> edge_map;  // patch-local edge -> global edge
  std::vector<EdgeClass> edge_class;

  i64 num_edges() const { return edges.count(); }
  bool full_domain() const {
    return edges.wx == n_global && edges.wy == n_global && edges.wz == n_global;
  }
};

// True when the local edge lies on the geometric boundary of the patch box
// (regardless of whether that part of the box coincides with the domain boundary).
inline bool on_box_boundary(const Patch& p, i64 local_edge_id) {
  int f;
  i64 ix, iy, iz;
  p.edges.decode(local_edge_id, f, ix, iy, iz);
  int t1, t2;
  transverse_axes(f, t1, t2);
  i64 c[3] = {ix, iy, iz};
  i64 w[3] = {p.edges.wx, p.edges.wy, p.edges.wz};
  return c[t1] == 0 || c[t1] == w[t1] || c[t2] == 0 || c[t2] == w[t2];
}

inline Patch extract_patch(const NestedMesh& mesh, i64 i, int m) {
  if (i < 0 || i >= mesh.num_coarse())
    throw std::out_of_range("extract_patch: coarse index out of range");
  if (m < 0) throw std::invalid_argument("extract_patch: layers must be >= 0");
  Patch p;
  p.center_element = i;
  p.layers = m;
  p.n_global = mesh.n;
  i64 ci, cj, ck;
  mesh.coarse_coords(i, ci, cj, ck);
  i64 cc[3] = {ci, cj, ck};
  for (int d = 0; d < 3; ++d) {
    p.clo[d] = std::max<i64>(0, cc[d] - m);
    p.chi[d] = std::min<i64>(mesh.n_coarse - 1, cc[d] + m);
    p.flo[d] = p.clo[d] * mesh.n_fine_per_coarse;
    p.fhi[d] = (p.chi[d] + 1) * mesh.n_fine_per_coarse;
  }
  for (i64 ek = p.clo[2]; ek <= p.chi[2]; ++ek)
    for (i64 ej = p.clo[1]; ej <= p.chi[1]; ++ej)
      for (i64 ei = p.clo[0]; ei <= p.chi[0]; ++ei)
        p.coarse_elements.push_back(mesh.coarse_id(ei, ej, ek));

  p.edges = BoxEdgeIndexer{p.fhi[0] - p.flo[0], p.fhi[1] - p.flo[1],
                           p.fhi[2] - p.flo[2]};
  i64 ne = p.edges.count();
  p.edge_map.resize(ne);
  p.edge_class.resize(ne);
  i64 w[3] = {p.edges.wx, p.edges.wy, p.edges.wz};
  for (i64 le = 0; le < ne; ++le) {
    int f;
    i64 lc[3];
    p.edges.decode(le, f, lc[0], lc[1], lc[2]);
    i64 gx = p.flo[0] + lc[0], gy = p.flo[1] + lc[1], gz = p.flo[2] + lc[2];
    p.edge_map[le] = mesh.edges.id(f, gx, gy, gz);
    int t1, t2;
    transverse_axes(f, t1, t2);
    i64 g[3] = {gx, gy, gz};
    bool domain = g[t1] == 0 || g[t1] == mesh.n || g[t2] == 0 || g[t2] == mesh.n;
    bool box = lc[t1] == 0 || lc[t1] == w[t1] || lc[t2] == 0 || lc[t2] == w[t2];
    p.edge_class[le] = domain ? EdgeClass::DOMAIN_BOUNDARY
                              : (box ? EdgeClass::PATCH_BOUNDARY : EdgeClass::INTERIOR);
  }
  return p;
}

inline VectorXcd restrict_field(const Patch& p, const VectorXcd& global_field) {
  i64 total = 3LL * p.n_global * (p.n_global + 1) * (p.n_global + 1);
  if (global_field.size() != total)
    throw std::invalid_argument("restrict_field: global field length mismatch");
  VectorXcd out(p.num_edges());
  for (i64 le = 0; le < out.size(); ++le) out[le] = global_field[p.edge_map[le]];
  return out;
}

inline VectorXcd prolong_field(const Patch& p, const VectorXcd& local_field) {
  if (local_field.size() != p.num_edges())
    throw std::invalid_argument("prolong_field: local field length mismatch");
  i64 total = 3LL * p.n_global * (p.n_global + 1) * (p.n_global + 1);
  VectorXcd out = VectorXcd::Zero(total);
  for (i64 le = 0; le < local_field.size(); ++le)
    out[p.edge_map[le]] = local_field[le];
  return out;
}

// Condensed numbering of the degrees of freedom kept in a patch-local solve.
// Default: drop PATCH_BOUNDARY edges (impedance traces on the domain boundary
// stay free). Strict: drop every edge on the geometric patch-box boundary.
struct FreeSet {
  std::vector<i64> local_of_free;
  std::vector<i64> free_of_local;  // -1 for eliminated edges
  i64 count = 0;
};

inline FreeSet free_dofs(const Patch& p, bool strict_boundary = false) {
  FreeSet fs;
  i64 ne = p.num_edges();
  fs.free_of_local.assign(ne, -1);
  for (i64 le = 0; le < ne; ++le) {
    bool drop = strict_boundary ? on_box_boundary(p, le)
                                : p.edge_class[le] == EdgeClass::PATCH_BOUNDARY;
    if (drop) continue;
    fs.free_of_local[le] = i64(fs.local_of_free.size());
    fs.local_of_free.push_back(le);
  }
  fs.count = i64(fs.local_of_free.size());
  return fs;
}

}  // namespace maxms

#endif
