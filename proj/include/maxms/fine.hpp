#ifndef MAXMS_FINE_HPP
#define MAXMS_FINE_HPP

#include "maxms/assembly.hpp"
#include "maxms/common.hpp"
#include "maxms/solver.hpp"

// Fine-scale reference solve and the homogeneous benchmark fields.

namespace maxms {

struct FineSolution {
  VectorXcd u;
  SolveStats stats;
};

// Solve (K - k^2 M - i k M_bd) u = load. Direct factorization first; if its
// memory estimate exceeds the budget, a preconditioned conjugate-orthogonal CG
// takes over with the SPD part K + k^2 M + k M_bd as preconditioner.
inline FineSolution solve_fine(const OperatorSet& ops, const VectorXcd& load,
                               const SolvePolicy& policy = {}) {
  if (load.size() != ops.K.rows())
    throw std::invalid_argument("solve_fine: load length mismatch");
  FineSolution sol;
  SpMatC B = b_matrix(ops);
  double bnorm = load.norm();
  if (bnorm == 0.0) {
    sol.u = VectorXcd::Zero(load.size());
    sol.stats.method = "trivial";
    return sol;
  }

  Timer t;
  UmfpackComplexLU lu;
  bool direct = lu.factor(B, nullptr, policy.umfpack_budget_bytes);
  if (direct) {
    sol.stats.factor_seconds = t.seconds();
    t.reset();
    sol.u = lu.solve(load);
    sol.stats.solve_seconds = t.seconds();
    sol.stats.method = "umfpack";
    sol.stats.rel_residual = (B * sol.u - load).norm() / bnorm;
    if (sol.stats.rel_residual <= policy.rel_tol) return sol;
  }

  t.reset();
  RealSpdPreconditioner prec(a_matrix(ops));
  if (!prec.ok()) throw std::runtime_error("solve_fine: preconditioner failed");
  sol.stats.factor_seconds = t.seconds();
  t.reset();
  ApplyFn apply_A = [&](const VectorXcd& x) { return VectorXcd(B * x); };
  ApplyFn apply_P = [&](const VectorXcd& r) { return prec.apply(r); };
  sol.u = VectorXcd::Zero(load.size());
  IterReport rep =
      cocg(apply_A, apply_P, load, sol.u, policy.rel_tol, policy.max_iterations);
  sol.stats.solve_seconds = t.seconds();
  sol.stats.method = "cocg+cholmod";
  sol.stats.iterations = rep.iterations;
  sol.stats.rel_residual = rep.rel_residual;
  if (!rep.converged)
    throw std::runtime_error(
        "solve_fine: iterative fallback stalled at relative residual " +
        std::to_string(rep.rel_residual) + " after " +
        std::to_string(rep.iterations) + " iterations");
  return sol;
}

// sqrt(f^H S^-1 f): the load norm appearing in the coarse-space error bound.
// Diagnostic only; S is SPD, so one Cholesky solve suffices.
inline double dual_s_norm(const OperatorSet& ops, const VectorXcd& f) {
  if (f.size() != ops.S.rows())
    throw std::invalid_argument("dual_s_norm: load length mismatch");
  if (f.norm() == 0.0) return 0.0;
  RealSpdPreconditioner chol(ops.S);
  if (!chol.ok()) throw std::runtime_error("dual_s_norm: factorization failed");
  VectorXcd v = chol.apply(f);
  return std::sqrt(std::max(0.0, (f.conjugate().transpose() * v)[0].real()));
}

// Homogeneous benchmark u = sin(kx)(1,1,1)^T with matching source and
// impedance data g = curl u x n - i k u_T, evaluated analytically.
struct Benchmark {
  double k = 0.0;
  VolumeFn u;
  VolumeFn curl_u;
  VolumeFn f;
  BoundaryFn g;
};

inline Benchmark exact_benchmark(double k) {
  if (!(k > 0.0)) throw std::domain_error("exact_benchmark: k must be positive");
  Benchmark bm;
  bm.k = k;
  bm.u = [k](const Eigen::Vector3d& p) {
    double s = std::sin(k * p[0]);
    return Eigen::Vector3cd(s, s, s);
  };
  bm.curl_u = [k](const Eigen::Vector3d& p) {
    double c = k * std::cos(k * p[0]);
    return Eigen::Vector3cd(0.0, -c, c);
  };
  bm.f = [k](const Eigen::Vector3d& p) {
    return Eigen::Vector3cd(-k * k * std::sin(k * p[0]), 0.0, 0.0);
  };
  bm.g = [k, u = bm.u, curl_u = bm.curl_u](const Eigen::Vector3d& p, int axis,
                                           int side) {
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    n[axis] = side == 0 ? -1.0 : 1.0;
    Eigen::Vector3cd w = curl_u(p);
    Eigen::Vector3cd uv = u(p);
    cdouble un = uv(0) * n(0) + uv(1) * n(1) + uv(2) * n(2);
    Eigen::Vector3cd u_t = uv - un * n.cast<cdouble>();
    Eigen::Vector3cd wxn = w.cross(n.cast<cdouble>().eval());
    return Eigen::Vector3cd(wxn - kImagUnit * k * u_t);
  };
  return bm;
}

// Edge-moment interpolation: per-edge line integral of the tangential
// component, 3-point Gauss along each edge.
inline VectorXcd interpolate_edge(const NestedMesh& mesh, const VolumeFn& field) {
  VectorXcd dofs(mesh.num_edges());
  const double h = mesh.h;
  for (i64 id = 0; id < dofs.size(); ++id) {
    int f;
    i64 ix, iy, iz;
    mesh.edges.decode(id, f, ix, iy, iz);
    Eigen::Vector3d origin(ix * h, iy * h, iz * h);
    cdouble acc = 0.0;
    for (int q = 0; q < 3; ++q) {
      Eigen::Vector3d p = origin;
      p[f] += Gauss3::node[q] * h;
      acc += Gauss3::weight[q] * field(p)(f);
    }
    dofs[id] = acc * h;
  }
  return dofs;
}

// Pointwise value of an edge-element field. Points on shared faces pick the
// lower cell; the tangential components agree there, so edge-moment uses of
// this function are insensitive to the choice.
inline Eigen::Vector3cd evaluate_field(const NestedMesh& mesh,
                                       const VectorXcd& dofs,
                                       const Eigen::Vector3d& p) {
  if (dofs.size() != mesh.num_edges())
    throw std::invalid_argument("evaluate_field: dof length mismatch");
  const double h = mesh.h;
  i64 c[3];
  for (int d = 0; d < 3; ++d)
    c[d] = std::clamp<i64>(i64(std::floor(p[d] / h)), 0, mesh.n - 1);
  Eigen::Vector3d local = p - h * Eigen::Vector3d(double(c[0]), double(c[1]),
                                                  double(c[2]));
  Eigen::Vector3cd out = Eigen::Vector3cd::Zero();
  for (int le = 0; le < 12; ++le) {
    i64 gid = mesh.edges.cell_edge(c[0], c[1], c[2], le);
    out += dofs[gid] * edge_shape_value(le, local, h).cast<cdouble>();
  }
  return out;
}

}  // namespace maxms

#endif
