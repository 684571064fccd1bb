#ifndef MAXMS_SPECTRAL_HPP
#define MAXMS_SPECTRAL_HPP

#include <limits>
#include <vector>

#include "maxms/assembly.hpp"
#include "maxms/common.hpp"
#include "maxms/mesh.hpp"
#include "maxms/solver.hpp"
#include "maxms/threadpool.hpp"

// Per-element auxiliary spectral spaces and the s-orthogonal projection.

namespace maxms {

inline VectorXcd mul_rc(const MatrixXd& A, const VectorXcd& x) {
  VectorXcd out(A.rows());
  out.real() = A * x.real();
  out.imag() = A * x.imag();
  return out;
}

struct AuxElement {
  i64 element = -1;
  int l = 0;
  VectorXd eigvals;  // l + 1 values, ascending
  MatrixXd Phi;      // element edges x l, s-orthonormal, phase-fixed
  MatrixXd W;        // S_i * Phi; the border/projection factor
  Patch elem_patch;  // the element as an m = 0 patch
};

// Deterministic sign: largest-magnitude entry (lowest index on ties) positive.
inline void fix_phase(MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      double a = std::abs(vectors(r, j));
      if (a > mag) {
        mag = a;
        best = r;
      }
    }
    if (vectors(best, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }
}

// Edge representation of every nodal gradient on a patch box: column p holds
// the tangential line integrals of grad(hat_p), i.e. +1 at the edge head and
// -1 at the tail. Rank is one less than the node count.
inline MatrixXd gradient_matrix(const Patch& p) {
  const i64 wx = p.edges.wx, wy = p.edges.wy, wz = p.edges.wz;
  MatrixXd G = MatrixXd::Zero(p.num_edges(), (wx + 1) * (wy + 1) * (wz + 1));
  auto nid = [&](i64 ix, i64 iy, i64 iz) {
    return (iz * (wy + 1) + iy) * (wx + 1) + ix;
  };
  for (i64 e = 0; e < p.num_edges(); ++e) {
    int f;
    i64 c[3];
    p.edges.decode(e, f, c[0], c[1], c[2]);
    i64 h[3] = {c[0], c[1], c[2]};
    h[f] += 1;
    G(e, nid(h[0], h[1], h[2])) += 1.0;
    G(e, nid(c[0], c[1], c[2])) -= 1.0;
  }
  return G;
}

// Smallest l eigenpairs plus the (l+1)-th value of the symmetric-definite
// pencil (K + k^2 M + k M_bd, S) on one coarse element.
inline AuxElement solve_local_spectral(const OperatorSet& ops_i, int l) {
  const i64 n = ops_i.K.rows();
  if (l < 1 || l + 1 > n)
    throw std::invalid_argument("solve_local_spectral: need 1 <= l and l+1 <= dim");
  MatrixXd A = MatrixXd(a_matrix(ops_i));
  MatrixXd S = MatrixXd(ops_i.S);
  AuxElement e;
  e.element = ops_i.region.center_element;
  e.l = l;
  try {
    sym_definite_eigs(std::move(A), std::move(S), 1, l + 1, e.eigvals, e.Phi);
  } catch (const std::exception& ex) {
    throw std::runtime_error("local spectral solve failed on element " +
                             std::to_string(e.element) + ": " + ex.what());
  }
  e.Phi.conservativeResize(Eigen::NoChange, l);
  fix_phase(e.Phi);
  e.W = ops_i.S * e.Phi;
  e.elem_patch = ops_i.region;
  return e;
}

// Same pencil restricted to the s-orthogonal complement of the discrete
// gradient space. Every gradient field has zero curl energy, which pins its
// Rayleigh quotient at k^2 H^2 on interior unit-coefficient elements; for
// k H < pi that entire band sits below the first curl-carrying mode, so an
// ascending selection of fixed l retains an arbitrary slice of it and the
// coarse space never sees the wave. Deflation moves the spectral floor to
// the first curl mode, whose quotient does not shrink with H.
inline AuxElement solve_local_spectral_deflated(const OperatorSet& ops_i, int l) {
  MatrixXd S = MatrixXd(ops_i.S);
  MatrixXd G = gradient_matrix(ops_i.region);
  Eigen::FullPivLU<MatrixXd> lu(MatrixXd((S * G).transpose()));
  lu.setThreshold(1e-10);
  MatrixXd Z = lu.kernel();
  const i64 n = Z.cols();
  if (l < 1 || l + 1 > n)
    throw std::invalid_argument(
        "solve_local_spectral_deflated: need 1 <= l and l+1 <= deflated dim");
  MatrixXd A = MatrixXd(a_matrix(ops_i));
  MatrixXd Ad = Z.transpose() * A * Z;
  MatrixXd Sd = Z.transpose() * S * Z;
  AuxElement e;
  e.element = ops_i.region.center_element;
  e.l = l;
  VectorXd vals;
  MatrixXd Y;
  try {
    sym_definite_eigs(std::move(Ad), std::move(Sd), 1, l + 1, vals, Y);
  } catch (const std::exception& ex) {
    throw std::runtime_error("deflated spectral solve failed on element " +
                             std::to_string(e.element) + ": " + ex.what());
  }
  e.eigvals = vals;
  e.Phi = Z * Y.leftCols(l);
  fix_phase(e.Phi);
  e.W = ops_i.S * e.Phi;
  e.elem_patch = ops_i.region;
  return e;
}

enum class AuxSelection { ASCENDING, DEFLATE_GRADIENTS };

struct AuxiliarySpace {
  int l = 0;
  double Lambda = 0.0;  // min over elements of eigvals[l]
  std::vector<AuxElement> elements;  // indexed by coarse element id

  const AuxElement& at(i64 i) const { return elements.at(std::size_t(i)); }
};

inline AuxiliarySpace build_auxiliary_space(
    const NestedMesh& mesh, const CoefficientField& field, double k, double H,
    int l, int jobs = 1, AuxSelection sel = AuxSelection::DEFLATE_GRADIENTS) {
  AuxiliarySpace aux;
  aux.l = l;
  aux.elements.resize(std::size_t(mesh.num_coarse()));
  parallel_for(mesh.num_coarse(), jobs, [&](i64 i) {
    Patch elem = extract_patch(mesh, i, 0);
    OperatorSet ops = assemble_operators(mesh, field, elem, k, H);
    aux.elements[std::size_t(i)] = sel == AuxSelection::ASCENDING
                                       ? solve_local_spectral(ops, l)
                                       : solve_local_spectral_deflated(ops, l);
  });
  aux.Lambda = std::numeric_limits<double>::infinity();
  for (const AuxElement& e : aux.elements)
    aux.Lambda = std::min(aux.Lambda, e.eigvals[l]);
  return aux;
}

// Projection coefficients of v (global field) on element e's retained modes.
inline VectorXcd pi_coefficients(const AuxElement& e, const VectorXcd& v_global) {
  VectorXcd v_loc = restrict_field(e.elem_patch, v_global);
  return mul_rc(e.W.transpose(), v_loc);
}

// Accumulated edge representation of the broken projection: interface edge
// DOFs receive contributions from every adjacent element.
inline VectorXcd project_pi(const AuxiliarySpace& aux, const VectorXcd& v) {
  if (aux.elements.empty()) throw std::logic_error("project_pi: empty space");
  i64 ng = aux.elements[0].elem_patch.n_global;
  i64 total = 3LL * ng * (ng + 1) * (ng + 1);
  if (v.size() != total)
    throw std::invalid_argument("project_pi: global field length mismatch");
  VectorXcd out = VectorXcd::Zero(total);
  for (const AuxElement& e : aux.elements) {
    VectorXcd c = pi_coefficients(e, v);
    VectorXcd contrib = mul_rc(e.Phi, c);
    for (i64 le = 0; le < contrib.size(); ++le)
      out[e.elem_patch.edge_map[le]] += contrib[le];
  }
  return out;
}

// s-norm of the broken projection: sum of squared coefficients over elements,
// valid because each element's modes are s_i-orthonormal.
inline double pi_s_norm(const AuxiliarySpace& aux, const VectorXcd& v) {
  double acc = 0.0;
  for (const AuxElement& e : aux.elements) acc += pi_coefficients(e, v).squaredNorm();
  return std::sqrt(acc);
}

struct ResolutionReport {
  double value = 0.0;
  double threshold = 0.0;
  bool satisfied = false;
};

// Resolution condition k H sqrt(mu_max / Lambda) against a configurable
// threshold; diagnostic only, never blocks a run.
inline ResolutionReport resolution_check(double k, double H, double mu_max,
                                         double Lambda, double threshold = 0.35) {
  ResolutionReport r;
  r.value = k * H * std::sqrt(mu_max / Lambda);
  r.threshold = threshold;
  r.satisfied = r.value < threshold;
  return r;
}

}  // namespace maxms

#endif
