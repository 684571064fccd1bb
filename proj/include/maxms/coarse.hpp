#ifndef MAXMS_COARSE_HPP
#define MAXMS_COARSE_HPP

#include "maxms/assembly.hpp"
#include "maxms/basis.hpp"
#include "maxms/solver.hpp"

// Petrov-Galerkin coarse problem. The test space is the conjugate of the trial
// space, and B is conjugate-linear in its second slot, so the coarse entry
//   (q, p) = B(psi_p, conj(psi_q)) = psi_q^T (K - k^2 M - i k M_bd) psi_p
// reduces to the unconjugated pairing; the same reduction gives the coarse
// load entry (f, conj(psi_q)) + <g, conj(psi_q)_T> = psi_q^T b. Covered by a
// test against direct sesquilinear evaluation.

namespace maxms {

struct CoarseProblem {
  MatrixXcd Bc;
  VectorXcd rhs;
  VectorXcd coeff;
  VectorXcd u_ms;
  std::vector<double> psi_anorm;  // per basis entry; equals the test vector's
  double solve_seconds = 0.0;
};

inline CoarseProblem assemble_coarse(const OperatorSet& ops, const MsBasis& basis,
                                     const VectorXcd& load,
                                     double panel_budget_bytes = 4.5e8) {
  const i64 N = ops.K.rows();
  const i64 P = i64(basis.entries.size());
  if (P == 0) throw std::invalid_argument("assemble_coarse: empty basis");
  if (load.size() != N)
    throw std::invalid_argument("assemble_coarse: load length mismatch");
  for (const BasisEntry& e : basis.entries)
    if (!e.patch || e.t.size() != e.patch->num_edges())
      throw std::invalid_argument("assemble_coarse: basis entry not built");

  const double k = ops.k;
  i64 pw = std::clamp<i64>(i64(panel_budget_bytes) / (3 * N * 16), 8, 96);
  pw = std::min(pw, P);

  auto scatter_panel = [&](i64 c0, i64 c1, MatrixXcd& panel) {
    panel.setZero(N, c1 - c0);
    for (i64 p = c0; p < c1; ++p) {
      const BasisEntry& e = basis.entries[std::size_t(p)];
      const auto& map = e.patch->edge_map;
      for (i64 le = 0; le < e.t.size(); ++le) panel(map[le], p - c0) = e.t[le];
    }
  };

  // y = B psi, column by column over the basis support; the operator columns
  // outside a patch never contribute, which keeps the panel cost proportional
  // to the patch size instead of the mesh size.
  auto apply_b_panel = [&](i64 c0, i64 c1, MatrixXcd& y) {
    y.setZero(N, c1 - c0);
    for (i64 p = c0; p < c1; ++p) {
      const BasisEntry& e = basis.entries[std::size_t(p)];
      const auto& map = e.patch->edge_map;
      auto col = y.col(p - c0);
      for (i64 le = 0; le < e.t.size(); ++le) {
        cdouble v = e.t[le];
        if (v == 0.0) continue;
        const i64 g = map[le];
        for (SpMat::InnerIterator it(ops.K, g); it; ++it)
          col[it.row()] += it.value() * v;
        cdouble vm = -k * k * v;
        for (SpMat::InnerIterator it(ops.M, g); it; ++it)
          col[it.row()] += it.value() * vm;
        cdouble vb = cdouble(0.0, -k) * v;
        for (SpMat::InnerIterator it(ops.Mbd, g); it; ++it)
          col[it.row()] += it.value() * vb;
      }
    }
  };

  CoarseProblem cp;
  cp.Bc.resize(P, P);
  cp.rhs.resize(P);
  cp.psi_anorm.assign(std::size_t(P), 0.0);
  MatrixXcd psi_p, psi_q, y;
  for (i64 p0 = 0; p0 < P; p0 += pw) {
    i64 p1 = std::min(P, p0 + pw);
    scatter_panel(p0, p1, psi_p);
    apply_b_panel(p0, p1, y);
    for (i64 p = p0; p < p1; ++p) {
      VectorXcd col = psi_p.col(p - p0);
      cp.rhs[p] = col.transpose() * load;
      double qk = quad_form(ops.K, col);
      double qm = quad_form(ops.M, col);
      double qb = quad_form(ops.Mbd, col);
      cp.psi_anorm[std::size_t(p)] = std::sqrt(
          std::max(0.0, qk + k * k * qm + k * qb));
    }
    for (i64 q0 = 0; q0 < P; q0 += pw) {
      i64 q1 = std::min(P, q0 + pw);
      if (q0 == p0) {
        cp.Bc.block(q0, p0, q1 - q0, p1 - p0).noalias() =
            psi_p.transpose() * y;
      } else {
        scatter_panel(q0, q1, psi_q);
        cp.Bc.block(q0, p0, q1 - q0, p1 - p0).noalias() =
            psi_q.transpose() * y;
      }
    }
  }

  Timer t;
  MatrixXcd sol;
  try {
    sol = dense_solve(cp.Bc, cp.rhs);
  } catch (const std::exception& ex) {
    throw std::runtime_error(std::string("coarse solve failed (check the "
                                         "resolution condition): ") +
                             ex.what());
  }
  cp.coeff = sol.col(0);
  cp.solve_seconds = t.seconds();

  cp.u_ms = VectorXcd::Zero(N);
  for (i64 p = 0; p < P; ++p) {
    const BasisEntry& e = basis.entries[std::size_t(p)];
    const auto& map = e.patch->edge_map;
    cdouble c = cp.coeff[p];
    for (i64 le = 0; le < e.t.size(); ++le) cp.u_ms[map[le]] += c * e.t[le];
  }
  return cp;
}

// max over test functions q of |B(d, psi_q*)| for a global defect d.
inline double galerkin_defect(const OperatorSet& ops, const MsBasis& basis,
                              const VectorXcd& d) {
  SpMatC B = b_matrix(ops);
  VectorXcd y = B * d;
  double mx = 0.0;
  for (const BasisEntry& e : basis.entries) {
    cdouble s = 0.0;
    const auto& map = e.patch->edge_map;
    for (i64 le = 0; le < e.t.size(); ++le) s += e.t[le] * y[map[le]];
    mx = std::max(mx, std::abs(s));
  }
  return mx;
}

}  // namespace maxms

#endif
