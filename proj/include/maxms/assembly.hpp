#ifndef MAXMS_ASSEMBLY_HPP
#define MAXMS_ASSEMBLY_HPP

#include <functional>

#include "maxms/coeff.hpp"
#include "maxms/common.hpp"
#include "maxms/element.hpp"
#include "maxms/mesh.hpp"

// Assembled operators over a region (full domain, one coarse element, or an
// oversampled patch). All matrices are real; complex weights enter only when
// forms are applied or systems are built.

namespace maxms {

struct OperatorSet {
  Patch region;
  double k = 0.0, H = 0.0;
  SpMat K;    // mu_inv-weighted curl-curl
  SpMat K1;   // unweighted curl-curl (k-imp norm)
  SpMat M;    // edge mass
  SpMat Mbd;  // tangential trace mass on region boundary faces lying in the domain boundary
  SpMat S;    // mu_inv * H^-2 weighted mass
};

inline Patch full_region(const NestedMesh& mesh) {
  return extract_patch(mesh, 0, mesh.n_coarse);
}

namespace detail {

enum class AsmKind { CurlMu, CurlPlain, Mass, SWeight, Boundary };

inline SpMat assemble_one(const NestedMesh& mesh, const CoefficientField& field,
                          const Patch& region, double H, AsmKind kind) {
  const double h = mesh.h;
  const i64 ne = region.num_edges();
  std::vector<Triplet> trip;
  const i64 ncells = (region.fhi[0] - region.flo[0]) *
                     (region.fhi[1] - region.flo[1]) *
                     (region.fhi[2] - region.flo[2]);
  if (kind != AsmKind::Boundary) trip.reserve(std::size_t(ncells) * 144);

  const Mat12& Khat = ref_curl_curl();
  const Mat12& Mhat = ref_mass();
  for (i64 cz = region.flo[2]; cz < region.fhi[2]; ++cz)
    for (i64 cy = region.flo[1]; cy < region.fhi[1]; ++cy)
      for (i64 cx = region.flo[0]; cx < region.fhi[0]; ++cx) {
        double mu_inv = 1.0 / field.values[std::size_t(mesh.cell_id(cx, cy, cz))];
        i64 lx = cx - region.flo[0], ly = cy - region.flo[1], lz = cz - region.flo[2];
        Mat12 Ae;
        switch (kind) {
          case AsmKind::CurlMu:
            Ae = (mu_inv / h) * Khat;
            break;
          case AsmKind::CurlPlain:
            Ae = (1.0 / h) * Khat;
            break;
          case AsmKind::Mass:
            Ae = h * Mhat;
            break;
          case AsmKind::SWeight:
            Ae = (mu_inv / (H * H)) * h * Mhat;
            break;
          case AsmKind::Boundary: {
            Ae = Mat12::Zero();
            bool any = false;
            i64 c[3] = {cx, cy, cz};
            for (int axis = 0; axis < 3; ++axis)
              for (int side = 0; side < 2; ++side) {
                bool on_domain = side == 0 ? c[axis] == 0 : c[axis] == mesh.n - 1;
                if (!on_domain) continue;
                Ae += ref_face_mass(axis, side);
                any = true;
              }
            if (!any) continue;
            break;
          }
        }
        i64 ge[12];
        for (int le = 0; le < 12; ++le) ge[le] = region.edges.cell_edge(lx, ly, lz, le);
        for (int a = 0; a < 12; ++a)
          for (int b = 0; b < 12; ++b)
            if (Ae(a, b) != 0.0) trip.emplace_back(int(ge[a]), int(ge[b]), Ae(a, b));
      }
  SpMat A(ne, ne);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

}  // namespace detail

inline OperatorSet assemble_operators(const NestedMesh& mesh,
                                      const CoefficientField& field,
                                      const Patch& region, double k, double H) {
  if (!(k > 0.0)) throw std::domain_error("assemble_operators: k must be positive");
  if (field.values.size() != std::size_t(mesh.num_cells()))
    throw std::invalid_argument("assemble_operators: field/mesh size mismatch");
  if (region.n_global != mesh.n)
    throw std::invalid_argument("assemble_operators: region built for another mesh");
  using detail::AsmKind;
  OperatorSet ops;
  ops.region = region;
  ops.k = k;
  ops.H = H;
  ops.K = detail::assemble_one(mesh, field, region, H, AsmKind::CurlMu);
  ops.K1 = detail::assemble_one(mesh, field, region, H, AsmKind::CurlPlain);
  ops.M = detail::assemble_one(mesh, field, region, H, AsmKind::Mass);
  ops.S = detail::assemble_one(mesh, field, region, H, AsmKind::SWeight);
  ops.Mbd = detail::assemble_one(mesh, field, region, H, AsmKind::Boundary);
  return ops;
}

// B(w, v) = v^H (K - k^2 M - i k M_bd) w; conjugate-linear in v.
inline cdouble apply_B(const OperatorSet& ops, const VectorXcd& w, const VectorXcd& v) {
  if (w.size() != ops.K.rows() || v.size() != ops.K.rows())
    throw std::invalid_argument("apply_B: vector length mismatch");
  return sesq(ops.K, v, w) - ops.k * ops.k * sesq(ops.M, v, w) -
         kImagUnit * ops.k * sesq(ops.Mbd, v, w);
}

// The complex system matrix of B, materialized for sparse solvers.
inline SpMatC b_matrix(const OperatorSet& ops) {
  SpMat re = ops.K - (ops.k * ops.k) * ops.M;
  SpMatC B = re.cast<cdouble>();
  SpMatC bd = ops.Mbd.cast<cdouble>();
  B += cdouble(0.0, -ops.k) * bd;
  B.makeCompressed();
  return B;
}

// Real SPD part K + k^2 M + k M_bd (the local a-form; also a preconditioner).
inline SpMat a_matrix(const OperatorSet& ops) {
  SpMat A = ops.K + (ops.k * ops.k) * ops.M + ops.k * ops.Mbd;
  A.makeCompressed();
  return A;
}

inline double norm_a(const OperatorSet& ops, const VectorXcd& v) {
  double q = quad_form(ops.K, v) + ops.k * ops.k * quad_form(ops.M, v) +
             ops.k * quad_form(ops.Mbd, v);
  return std::sqrt(std::max(0.0, q));
}

inline double norm_s(const OperatorSet& ops, const VectorXcd& v) {
  return std::sqrt(std::max(0.0, quad_form(ops.S, v)));
}

inline double norm_kimp(const OperatorSet& ops, const VectorXcd& v) {
  double q = quad_form(ops.K1, v) + ops.k * ops.k * quad_form(ops.M, v) +
             ops.k * quad_form(ops.Mbd, v);
  return std::sqrt(std::max(0.0, q));
}

inline double norm_l2(const OperatorSet& ops, const VectorXcd& v) {
  return std::sqrt(std::max(0.0, quad_form(ops.M, v)));
}

// 3-point Gauss-Legendre rule on [0, 1].
struct Gauss3 {
  static constexpr double n0 = 0.11270166537925831;
  static constexpr double n1 = 0.5;
  static constexpr double n2 = 0.88729833462074169;
  static constexpr double w0 = 5.0 / 18.0;
  static constexpr double w1 = 8.0 / 18.0;
  static constexpr double w2 = 5.0 / 18.0;
  static constexpr double node[3] = {n0, n1, n2};
  static constexpr double weight[3] = {w0, w1, w2};
};

inline cdouble dot_unconj(const Eigen::Vector3cd& a, const Eigen::Vector3d& b) {
  return a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

using VolumeFn = std::function<Eigen::Vector3cd(const Eigen::Vector3d&)>;
// Boundary data sampled at a point on a face with outward normal (axis, side).
using BoundaryFn =
    std::function<Eigen::Vector3cd(const Eigen::Vector3d&, int axis, int side)>;

// Right side (f, v) + <g, v_T> over the region edges: per-cell and per-boundary-
// face 3-point Gauss quadrature against the real edge shape functions.
inline VectorXcd assemble_load(const NestedMesh& mesh, const Patch& region,
                               const VolumeFn& f, const BoundaryFn& g) {
  const double h = mesh.h;
  VectorXcd load = VectorXcd::Zero(region.num_edges());
  for (i64 cz = region.flo[2]; cz < region.fhi[2]; ++cz)
    for (i64 cy = region.flo[1]; cy < region.fhi[1]; ++cy)
      for (i64 cx = region.flo[0]; cx < region.fhi[0]; ++cx) {
        i64 lx = cx - region.flo[0], ly = cy - region.flo[1], lz = cz - region.flo[2];
        i64 ge[12];
        for (int le = 0; le < 12; ++le) ge[le] = region.edges.cell_edge(lx, ly, lz, le);
        Eigen::Vector3d base(cx * h, cy * h, cz * h);
        if (f) {
          for (int qz = 0; qz < 3; ++qz)
            for (int qy = 0; qy < 3; ++qy)
              for (int qx = 0; qx < 3; ++qx) {
                Eigen::Vector3d local(Gauss3::node[qx] * h, Gauss3::node[qy] * h,
                                      Gauss3::node[qz] * h);
                double w = Gauss3::weight[qx] * Gauss3::weight[qy] *
                           Gauss3::weight[qz] * h * h * h;
                Eigen::Vector3cd fv = f(base + local);
                for (int le = 0; le < 12; ++le) {
                  Eigen::Vector3d nv = edge_shape_value(le, local, h);
                  load[ge[le]] += w * dot_unconj(fv, nv);
                }
              }
        }
        if (g) {
          i64 c[3] = {cx, cy, cz};
          for (int axis = 0; axis < 3; ++axis)
            for (int side = 0; side < 2; ++side) {
              bool on_domain = side == 0 ? c[axis] == 0 : c[axis] == mesh.n - 1;
              if (!on_domain) continue;
              int t1 = (axis == 0) ? 1 : 0;
              int t2 = (axis == 2) ? 1 : 2;
              for (int q1 = 0; q1 < 3; ++q1)
                for (int q2 = 0; q2 < 3; ++q2) {
                  Eigen::Vector3d local;
                  local[axis] = side == 0 ? 0.0 : h;
                  local[t1] = Gauss3::node[q1] * h;
                  local[t2] = Gauss3::node[q2] * h;
                  double w = Gauss3::weight[q1] * Gauss3::weight[q2] * h * h;
                  Eigen::Vector3cd gv = g(base + local, axis, side);
                  for (int le = 0; le < 12; ++le) {
                    if (local_edge(le).family == axis) continue;
                    Eigen::Vector3d nv = edge_shape_value(le, local, h);
                    load[ge[le]] += w * dot_unconj(gv, nv);
                  }
                }
            }
        }
      }
  return load;
}

}  // namespace maxms

#endif
