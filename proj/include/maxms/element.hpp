#ifndef MAXMS_ELEMENT_HPP
#define MAXMS_ELEMENT_HPP

#include <Eigen/Dense>
#include <stdexcept>

#include "maxms/common.hpp"

// Lowest-order edge element on an axis-aligned cube cell, line-integral DOFs.
// Local edge numbering: id = 4*family + a + 2*b, family 0/1/2 = x/y/z aligned,
// (a, b) the edge position along the two transverse axes in ascending order.

namespace maxms {

using Mat12 = Eigen::Matrix<double, 12, 12>;

struct LocalEdge {
  int family;  // axis the edge runs along
  int a, b;    // position (0 or 1) along the two transverse axes, ascending
};

inline LocalEdge local_edge(int le) {
  return {le / 4, (le % 4) % 2, (le % 4) / 2};
}

// Transverse axes of a family, ascending.
inline void transverse_axes(int family, int& t1, int& t2) {
  t1 = (family == 0) ? 1 : 0;
  t2 = (family == 2) ? 1 : 2;
}

namespace detail {

// G[i][j] = integral of q_i q_j over [0,1] with q_0 = 1-t, q_1 = t;
// s[i] = q_i'.
constexpr double kG[2][2] = {{1.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 1.0 / 3.0}};
constexpr double kDq[2] = {-1.0, 1.0};

inline Mat12 build_ref_curl_curl() {
  Mat12 K = Mat12::Zero();
  const auto& G = kG;
  const auto& s = kDq;
  for (int e = 0; e < 12; ++e) {
    LocalEdge E = local_edge(e);
    for (int f = 0; f < 12; ++f) {
      LocalEdge F = local_edge(f);
      int a = E.a, b = E.b, c = F.a, d = F.b;
      double v = 0.0;
      if (E.family == F.family) {
        v = G[a][c] * s[b] * s[d] + s[a] * s[c] * G[b][d];
      } else {
        int fam1 = std::min(E.family, F.family);
        int fam2 = std::max(E.family, F.family);
        // Swap so (a,b) belongs to the lower family.
        if (E.family != fam1) {
          std::swap(a, c);
          std::swap(b, d);
        }
        if (fam1 == 0 && fam2 == 1) v = -s[a] * s[c] * G[b][d];
        if (fam1 == 0 && fam2 == 2) v = -s[b] * s[c] * G[a][d];
        if (fam1 == 1 && fam2 == 2) v = -s[b] * s[d] * G[a][c];
      }
      K(e, f) = v;
    }
  }
  return K;
}

inline Mat12 build_ref_mass() {
  Mat12 M = Mat12::Zero();
  for (int e = 0; e < 12; ++e) {
    LocalEdge E = local_edge(e);
    for (int f = 0; f < 12; ++f) {
      LocalEdge F = local_edge(f);
      if (E.family != F.family) continue;
      M(e, f) = kG[E.a][F.a] * kG[E.b][F.b];
    }
  }
  return M;
}

}  // namespace detail

// Reference curl-curl matrix on the unit cube (mu = 1).
inline const Mat12& ref_curl_curl() {
  static const Mat12 K = detail::build_ref_curl_curl();
  return K;
}

// Reference edge mass matrix on the unit cube.
inline const Mat12& ref_mass() {
  static const Mat12 M = detail::build_ref_mass();
  return M;
}

// Tangential-trace mass on the face {x_axis = side}; entries pair the four
// in-plane edges of that face, zero elsewhere. Scale-invariant in h.
inline const Mat12& ref_face_mass(int axis, int side) {
  static const auto all = [] {
    std::array<Mat12, 6> F;
    for (int axis = 0; axis < 3; ++axis) {
      for (int side = 0; side < 2; ++side) {
        Mat12& Fm = F[2 * axis + side];
        Fm = Mat12::Zero();
        for (int e = 0; e < 12; ++e) {
          LocalEdge E = local_edge(e);
          if (E.family == axis) continue;
          int t1, t2;
          transverse_axes(E.family, t1, t2);
          int pos_axis = (t1 == axis) ? E.a : E.b;
          int pos_free = (t1 == axis) ? E.b : E.a;
          if (pos_axis != side) continue;
          for (int f = 0; f < 12; ++f) {
            LocalEdge Q = local_edge(f);
            if (Q.family != E.family) continue;
            int q_axis = (t1 == axis) ? Q.a : Q.b;
            int q_free = (t1 == axis) ? Q.b : Q.a;
            if (q_axis != side) continue;
            Fm(e, f) = detail::kG[pos_free][q_free];
          }
        }
      }
    }
    return F;
  }();
  return all[2 * axis + side];
}

struct ElementMatrices {
  Mat12 K;             // mu_inv-weighted curl-curl on an h-cell
  Mat12 M;             // edge mass on an h-cell
  Mat12 S_weightless;  // equals M; the mu_inv * H^-2 weight is applied at assembly
};

inline ElementMatrices element_matrices(double h, double mu_inv) {
  if (!(h > 0.0) || !(mu_inv > 0.0))
    throw std::domain_error("element_matrices: h and mu_inv must be positive");
  ElementMatrices out;
  out.K = (mu_inv / h) * ref_curl_curl();
  out.M = h * ref_mass();
  out.S_weightless = out.M;
  return out;
}

// Value of the local edge shape function at p, with the cell mapped to [0,h]^3.
inline Eigen::Vector3d edge_shape_value(int le, const Eigen::Vector3d& p, double h) {
  LocalEdge E = local_edge(le);
  int t1, t2;
  transverse_axes(E.family, t1, t2);
  auto q = [](int i, double t) { return i == 0 ? 1.0 - t : t; };
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  v[E.family] = q(E.a, p[t1] / h) * q(E.b, p[t2] / h) / h;
  return v;
}

// Curl of the local edge shape function at p on an h-cell.
inline Eigen::Vector3d edge_shape_curl(int le, const Eigen::Vector3d& p, double h) {
  LocalEdge E = local_edge(le);
  int t1, t2;
  transverse_axes(E.family, t1, t2);
  auto q = [](int i, double t) { return i == 0 ? 1.0 - t : t; };
  double dq_a = detail::kDq[E.a] / h, dq_b = detail::kDq[E.b] / h;
  double q_a = q(E.a, p[t1] / h), q_b = q(E.b, p[t2] / h);
  // curl of (component along family) with factors q_a(t1) q_b(t2):
  // d/dt1 contributes along t2-ish axis and vice versa, with orientation signs.
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
  grad[t1] = dq_a * q_b / h;
  grad[t2] = q_a * dq_b / h;
  Eigen::Vector3d unit = Eigen::Vector3d::Zero();
  unit[E.family] = 1.0;
  return grad.cross(unit);
}

}  // namespace maxms

#endif
