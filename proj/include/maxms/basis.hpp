#ifndef MAXMS_BASIS_HPP
#define MAXMS_BASIS_HPP

#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "maxms/assembly.hpp"
#include "maxms/solver.hpp"
#include "maxms/spectral.hpp"
#include "maxms/threadpool.hpp"

// Localized multiscale basis: per (element, mode), solve on the oversampled
// patch the bordered system
//   [ B_ff  W ] [t]   [w_ij]
//   [ W^T  -I ] [c] = [ 0  ]
// whose condensed form is (B + Pi) t = w_ij with Pi = W W^T the projection
// penalty and w_ij the scattered column S_i Phi_i[:, j]. Eliminated
// patch-boundary DOFs stay exactly zero. Direct factorization of the
// condensed operator is ruled out by fill (tens of GB for a 3-layer patch at
// h = 1/32), so every solve runs conjugate-orthogonal CG on the condensed
// form, preconditioned by a Cholesky factorization of the SPD proxy
// K + k^2 M + k M_bd. All retained modes of an element share one Krylov
// block, which amortizes the triangular solves across the panel.

namespace maxms {

// Patch-local index of a global edge, -1 outside the patch box.
inline i64 patch_local_of_global(const Patch& p, const NestedMesh& mesh, i64 gid) {
  int f;
  i64 g[3];
  mesh.edges.decode(gid, f, g[0], g[1], g[2]);
  int t1, t2;
  transverse_axes(f, t1, t2);
  i64 lc[3], w[3];
  for (int d = 0; d < 3; ++d) {
    lc[d] = g[d] - p.flo[d];
    w[d] = p.fhi[d] - p.flo[d];
  }
  if (lc[f] < 0 || lc[f] >= w[f]) return -1;
  if (lc[t1] < 0 || lc[t1] > w[t1] || lc[t2] < 0 || lc[t2] > w[t2]) return -1;
  return p.edges.id(f, lc[0], lc[1], lc[2]);
}

struct BasisEntry {
  i64 element = -1;
  int mode = 0;
  int m = 0;
  bool global_flag = false;  // patch covers the whole domain
  double coercivity_ratio = 0.0;
  std::shared_ptr<const Patch> patch;
  VectorXcd t;  // over all patch edges; exact zeros on eliminated DOFs
};

// One preconditioner factorization per patch box, shared by every element
// whose oversampled patch is that box.
class PatchSolver {
 public:
  PatchSolver(const NestedMesh& mesh, const CoefficientField& field,
              const AuxiliarySpace& aux, std::shared_ptr<const Patch> patch,
              double k, double H, bool strict, const SolvePolicy& policy)
      : patch_(std::move(patch)), k_(k), l_(aux.l), policy_(policy) {
    OperatorSet ops = assemble_operators(mesh, field, *patch_, k, H);
    Kp_ = std::move(ops.K);
    Mp_ = std::move(ops.M);
    Bdp_ = std::move(ops.Mbd);
    fs_ = free_dofs(*patch_, strict);
    const i64 nf = fs_.count;

    // Border: one column per retained mode of every coarse element in the box.
    std::vector<Triplet> wtrip;
    int cols = 0;
    for (i64 ce : patch_->coarse_elements) {
      const AuxElement& e = aux.at(ce);
      if (e.l != l_) throw std::logic_error("auxiliary mode count is not uniform");
      elem_col0_[ce] = cols;
      for (int j = 0; j < e.l; ++j, ++cols) {
        for (i64 le = 0; le < e.elem_patch.num_edges(); ++le) {
          i64 pl = patch_local_of_global(*patch_, mesh, e.elem_patch.edge_map[le]);
          if (pl < 0) throw std::logic_error("aux element leaks outside its patch");
          i64 fr = fs_.free_of_local[pl];
          if (fr < 0) continue;
          double val = e.W(le, j);
          if (val != 0.0) wtrip.emplace_back(int(fr), cols, val);
        }
      }
    }
    Wp_.resize(nf, cols);
    Wp_.setFromTriplets(wtrip.begin(), wtrip.end());
    Wp_.makeCompressed();
    WpC_ = Wp_.cast<cdouble>();
    WpTC_ = SpMatC(WpC_.transpose());

    std::vector<TripletC> btrip;
    std::vector<Triplet> atrip;
    auto add_free = [&](const SpMat& A, double wa, cdouble wb) {
      for (int oc = 0; oc < A.outerSize(); ++oc)
        for (SpMat::InnerIterator it(A, oc); it; ++it) {
          i64 fr = fs_.free_of_local[it.row()];
          i64 fc = fs_.free_of_local[it.col()];
          if (fr < 0 || fc < 0) continue;
          btrip.emplace_back(int(fr), int(fc), wb * it.value());
          atrip.emplace_back(int(fr), int(fc), wa * it.value());
        }
    };
    add_free(Kp_, 1.0, cdouble(1.0, 0.0));
    add_free(Mp_, k * k, cdouble(-k * k, 0.0));
    add_free(Bdp_, k, cdouble(0.0, -k));
    B_ff_.resize(nf, nf);
    B_ff_.setFromTriplets(btrip.begin(), btrip.end());
    B_ff_.makeCompressed();

    // Small boxes factorize directly: immune to the near-resonances that can
    // stall the Krylov path when an unlucky box has an eigenvalue close to
    // k^2. Large boxes are refused by the memory gate (fill grows to tens of
    // GB at three layers) and go through preconditioned block COCG instead;
    // the unknown-count gate skips even the fill estimate where the outcome
    // is a foregone conclusion.
    Timer t;
    if (nf + cols <= policy.umfpack_max_unknowns) {
      std::vector<TripletC> full = btrip;
      for (int oc = 0; oc < Wp_.outerSize(); ++oc)
        for (SpMat::InnerIterator it(Wp_, oc); it; ++it) {
          full.emplace_back(int(it.row()), int(nf + it.col()),
                            cdouble(it.value(), 0.0));
          full.emplace_back(int(nf + it.col()), int(it.row()),
                            cdouble(it.value(), 0.0));
        }
      for (int c = 0; c < cols; ++c)
        full.emplace_back(int(nf + c), int(nf + c), cdouble(-1.0, 0.0));
      SpMatC bordered(nf + cols, nf + cols);
      bordered.setFromTriplets(full.begin(), full.end());
      direct_ = lu_.factor(std::move(bordered), nullptr,
                           policy.umfpack_budget_bytes);
    }
    if (!direct_) {
      SpMat A_ff(nf, nf);
      A_ff.setFromTriplets(atrip.begin(), atrip.end());
      prec_ = std::make_unique<RealSpdPreconditioner>(A_ff);
      if (!prec_->ok())
        throw std::runtime_error("patch preconditioner factorization failed");
    }
    factor_seconds_ = t.seconds();
  }

  const Patch& patch() const { return *patch_; }
  std::shared_ptr<const Patch> patch_ptr() const { return patch_; }
  bool direct() const { return direct_; }
  double factor_seconds() const { return factor_seconds_; }
  int modes() const { return l_; }

  // All retained modes of one element, over all patch edges, one column per
  // mode. Thread-safe; concurrent calls serialize on the shared factorization.
  MatrixXcd solve_modes(i64 element, SolveStats* stats = nullptr) const {
    auto it = elem_col0_.find(element);
    if (it == elem_col0_.end())
      throw std::out_of_range("patch solver: element not in border");
    const int c0 = it->second;
    const i64 nf = fs_.count;
    MatrixXcd rhs = MatrixXcd::Zero(nf, l_);
    rhs.real() = MatrixXd(Wp_.middleCols(c0, l_));

    SolveStats st;
    Timer timer;
    MatrixXcd X(nf, l_);
    if (direct_) {
      st.method = "umfpack";
      const i64 nb = nf + Wp_.cols();
      for (int j = 0; j < l_; ++j) {
        VectorXcd b = VectorXcd::Zero(nb);
        b.head(nf) = rhs.col(j);
        double rel = 0.0;
        VectorXcd x = lu_.solve(b, &rel);
        if (rel > policy_.patch_rel_tol)
          throw std::runtime_error("patch direct solve residual " +
                                   std::to_string(rel) + " above tolerance");
        st.rel_residual = std::max(st.rel_residual, rel);
        X.col(j) = x.head(nf);
      }
    } else {
      st.method = "cocg+cholmod";
      ApplyFnM apply_A = [this](const MatrixXcd& x) {
        return MatrixXcd(B_ff_ * x + WpC_ * (WpTC_ * x));
      };
      ApplyFnM apply_P = [this](const MatrixXcd& r) {
        std::lock_guard<std::mutex> lk(prec_mu_);
        return prec_->apply(r);
      };
      X.setZero();
      IterReport rep = cocg_block(apply_A, apply_P, rhs, X, policy_.patch_rel_tol,
                                  policy_.max_iterations);
      st.iterations = rep.iterations;
      if (!rep.converged) {
        // Block breakdown or stall: restart the offending columns one by one.
        ApplyFn a1 = [this](const VectorXcd& x) {
          return VectorXcd(B_ff_ * x + WpC_ * (WpTC_ * x));
        };
        ApplyFn p1 = [this](const VectorXcd& r) {
          std::lock_guard<std::mutex> lk(prec_mu_);
          return prec_->apply(r);
        };
        double worst = 0.0;
        for (int j = 0; j < l_; ++j) {
          double bn = rhs.col(j).norm();
          if (bn == 0.0) continue;
          VectorXcd xj = X.col(j);
          double res = (rhs.col(j) - a1(xj)).norm() / bn;
          if (res >= policy_.patch_rel_tol) {
            IterReport r1 = cocg(a1, p1, rhs.col(j), xj, policy_.patch_rel_tol,
                                 policy_.max_iterations);
            st.iterations += r1.iterations;
            res = r1.rel_residual;
            X.col(j) = xj;
          }
          worst = std::max(worst, res);
        }
        if (worst >= policy_.patch_rel_tol)
          throw std::runtime_error("patch solve stalled at residual " +
                                   std::to_string(worst));
        rep.rel_residual = worst;
      }
      st.rel_residual = rep.rel_residual;
    }
    st.solve_seconds = timer.seconds();
    st.factor_seconds = factor_seconds_;
    if (stats) *stats = st;

    MatrixXcd T = MatrixXcd::Zero(patch_->num_edges(), l_);
    for (i64 i = 0; i < nf; ++i) T.row(fs_.local_of_free[i]) = X.row(i);
    return T;
  }

  VectorXcd solve(i64 element, int mode, SolveStats* stats = nullptr) const {
    return solve_modes(element, stats).col(mode);
  }

  // |B(t,t) + s(pi t, pi t)| / (|t|_a^2 + |pi t|_s^2); reported, not enforced.
  double coercivity_ratio(const VectorXcd& t_full) const {
    double qk = quad_form(Kp_, t_full);
    double qm = quad_form(Mp_, t_full);
    double qb = quad_form(Bdp_, t_full);
    VectorXcd t_free(fs_.count);
    for (i64 i = 0; i < fs_.count; ++i) t_free[i] = t_full[fs_.local_of_free[i]];
    double s2 = VectorXcd(WpTC_ * t_free).squaredNorm();
    cdouble num = cdouble(qk - k_ * k_ * qm + s2, -k_ * qb);
    double den = qk + k_ * k_ * qm + k_ * qb + s2;
    return den == 0.0 ? 0.0 : std::abs(num) / den;
  }

 private:
  std::shared_ptr<const Patch> patch_;
  FreeSet fs_;
  SpMat Kp_, Mp_, Bdp_;
  SpMat Wp_;
  SpMatC WpC_, WpTC_;
  SpMatC B_ff_;
  std::map<i64, int> elem_col0_;
  UmfpackComplexLU lu_;
  bool direct_ = false;
  std::unique_ptr<RealSpdPreconditioner> prec_;
  mutable std::mutex prec_mu_;
  double factor_seconds_ = 0.0;
  double k_ = 0.0;
  int l_ = 0;
  SolvePolicy policy_;
};

inline BasisEntry build_ms_basis(const NestedMesh& mesh, const CoefficientField& field,
                                 double k, double H, const AuxiliarySpace& aux,
                                 i64 i, int j, int m, bool strict = false,
                                 const SolvePolicy& policy = {}) {
  auto patch = std::make_shared<const Patch>(extract_patch(mesh, i, m));
  PatchSolver ps(mesh, field, aux, patch, k, H, strict, policy);
  BasisEntry e;
  e.element = i;
  e.mode = j;
  e.m = m;
  e.patch = patch;
  e.global_flag = patch->full_domain();
  e.t = ps.solve(i, j);
  e.coercivity_ratio = ps.coercivity_ratio(e.t);
  return e;
}

// Test basis: elementwise complex conjugate of the trial basis.
inline VectorXcd build_adjoint_basis(const BasisEntry& entry) {
  return entry.t.conjugate();
}

struct MsBasis {
  int m = 0;
  int l = 0;
  bool strict = false;
  std::vector<BasisEntry> entries;  // (element-major, mode-minor)

  const BasisEntry& at(i64 element, int mode) const {
    return entries.at(std::size_t(element) * std::size_t(l) + std::size_t(mode));
  }
};

struct BasisBuildStats {
  double seconds = 0.0;
  int factorizations = 0;
  int direct_factorizations = 0;
  int solved_elements = 0;
  int mirrored_elements = 0;
  int max_iterations = 0;
  double min_coercivity_ratio = std::numeric_limits<double>::infinity();
};

// Per-axis mirror symmetry of the coefficient voxels about the domain center.
inline std::array<bool, 3> field_reflection_symmetry(const NestedMesh& mesh,
                                                     const CoefficientField& field) {
  std::array<bool, 3> sym{true, true, true};
  const i64 n = mesh.n;
  for (int a = 0; a < 3 && n > 1; ++a) {
    for (i64 cz = 0; cz < n && sym[a]; ++cz)
      for (i64 cy = 0; cy < n && sym[a]; ++cy)
        for (i64 cx = 0; cx < n; ++cx) {
          i64 c[3] = {cx, cy, cz};
          i64 r[3] = {cx, cy, cz};
          r[a] = n - 1 - c[a];
          if (field.values[std::size_t(mesh.cell_id(c[0], c[1], c[2]))] !=
              field.values[std::size_t(mesh.cell_id(r[0], r[1], r[2]))]) {
            sym[a] = false;
            break;
          }
        }
  }
  return sym;
}

// Image of a representative's basis function under an axis mirror of the
// domain. Edge DOFs map by a signed permutation: the mirrored axis family
// reverses its tangent, the others only move. For a mirror-symmetric
// coefficient field the mapped function solves the mirrored element's local
// problem exactly, with its auxiliary modes rotated within eigenspaces; the
// spanned multiscale space is the same.
inline BasisEntry mirror_basis_entry(const NestedMesh& mesh, const BasisEntry& rep,
                                     i64 element,
                                     std::shared_ptr<const Patch> patch,
                                     const std::array<bool, 3>& flip) {
  BasisEntry e;
  e.element = element;
  e.mode = rep.mode;
  e.m = rep.m;
  e.global_flag = rep.global_flag;
  e.coercivity_ratio = rep.coercivity_ratio;
  e.patch = std::move(patch);
  const i64 n = mesh.n;
  e.t.resize(e.patch->num_edges());
  for (i64 le = 0; le < e.patch->num_edges(); ++le) {
    int f;
    i64 g[3];
    mesh.edges.decode(e.patch->edge_map[std::size_t(le)], f, g[0], g[1], g[2]);
    double sign = 1.0;
    for (int a = 0; a < 3; ++a) {
      if (!flip[a]) continue;
      if (f == a) {
        g[a] = n - 1 - g[a];
        sign = -sign;
      } else {
        g[a] = n - g[a];
      }
    }
    i64 src = patch_local_of_global(*rep.patch, mesh,
                                    mesh.edges.id(f, g[0], g[1], g[2]));
    if (src < 0) throw std::logic_error("mirrored edge misses the source patch");
    e.t[le] = sign * rep.t[src];
  }
  return e;
}

inline MsBasis build_basis(const NestedMesh& mesh, const CoefficientField& field,
                           double k, double H, const AuxiliarySpace& aux, int m,
                           bool strict = false, const SolvePolicy& policy = {},
                           int jobs = 1, BasisBuildStats* stats_out = nullptr) {
  Timer timer;
  MsBasis basis;
  basis.m = m;
  basis.l = aux.l;
  basis.strict = strict;
  const i64 nelem = mesh.num_coarse();
  basis.entries.resize(std::size_t(nelem) * std::size_t(aux.l));

  // Elements whose oversampled boxes coincide share one patch object.
  using BoxKey = std::array<i64, 6>;
  std::map<BoxKey, std::shared_ptr<const Patch>> patches;
  std::vector<std::shared_ptr<const Patch>> patch_of{std::size_t(nelem)};
  auto key_of = [](const Patch& p) {
    return BoxKey{p.flo[0], p.flo[1], p.flo[2], p.fhi[0], p.fhi[1], p.fhi[2]};
  };
  for (i64 i = 0; i < nelem; ++i) {
    Patch p = extract_patch(mesh, i, m);
    BoxKey key = key_of(p);
    auto [it, fresh] = patches.try_emplace(key);
    if (fresh) it->second = std::make_shared<const Patch>(std::move(p));
    patch_of[std::size_t(i)] = it->second;
  }

  // Mirror classes: every element reduces to the representative with the
  // smaller coordinate along each symmetric axis; non-representatives take
  // the mirrored solutions instead of their own solves.
  std::array<bool, 3> sym{false, false, false};
  if (policy.exploit_symmetry) sym = field_reflection_symmetry(mesh, field);
  const i64 nc = mesh.n_coarse;
  struct MirrorRef {
    i64 rep = -1;
    std::array<bool, 3> flip{false, false, false};
  };
  auto mirror_ref = [&](i64 i) {
    MirrorRef ref;
    i64 c[3];
    mesh.coarse_coords(i, c[0], c[1], c[2]);
    for (int a = 0; a < 3; ++a) {
      ref.flip[a] = sym[a] && c[a] > nc - 1 - c[a];
      if (ref.flip[a]) c[a] = nc - 1 - c[a];
    }
    ref.rep = mesh.coarse_id(c[0], c[1], c[2]);
    return ref;
  };
  std::map<BoxKey, std::vector<i64>> groups;  // representative elements per box
  std::vector<i64> mirrored;
  for (i64 i = 0; i < nelem; ++i) {
    if (mirror_ref(i).rep == i)
      groups[key_of(*patch_of[std::size_t(i)])].push_back(i);
    else
      mirrored.push_back(i);
  }

  BasisBuildStats stats;
  stats.factorizations = int(groups.size());
  for (const auto& [key, members] : groups) {
    PatchSolver ps(mesh, field, aux, patches.at(key), k, H, strict, policy);
    if (ps.direct()) ++stats.direct_factorizations;
    std::vector<int> iters(members.size(), 0);
    parallel_for(i64(members.size()), jobs, [&](i64 idx) {
      i64 element = members[std::size_t(idx)];
      SolveStats st;
      MatrixXcd T = ps.solve_modes(element, &st);
      iters[std::size_t(idx)] = st.iterations;
      for (int j = 0; j < aux.l; ++j) {
        BasisEntry e;
        e.element = element;
        e.mode = j;
        e.m = m;
        e.patch = ps.patch_ptr();
        e.global_flag = ps.patch().full_domain();
        e.t = T.col(j);
        e.coercivity_ratio = ps.coercivity_ratio(e.t);
        basis.entries[std::size_t(element) * std::size_t(aux.l) + std::size_t(j)] =
            std::move(e);
      }
    });
    stats.solved_elements += int(members.size());
    for (int itc : iters) stats.max_iterations = std::max(stats.max_iterations, itc);
  }
  parallel_for(i64(mirrored.size()), jobs, [&](i64 idx) {
    i64 element = mirrored[std::size_t(idx)];
    MirrorRef ref = mirror_ref(element);
    for (int j = 0; j < aux.l; ++j) {
      const BasisEntry& rep = basis.at(ref.rep, j);
      basis.entries[std::size_t(element) * std::size_t(aux.l) + std::size_t(j)] =
          mirror_basis_entry(mesh, rep, element, patch_of[std::size_t(element)],
                             ref.flip);
    }
  });
  stats.mirrored_elements = int(mirrored.size());
  for (const BasisEntry& e : basis.entries)
    stats.min_coercivity_ratio = std::min(stats.min_coercivity_ratio,
                                          e.coercivity_ratio);
  stats.seconds = timer.seconds();
  if (stats_out) *stats_out = stats;
  return basis;
}

struct DecayPoint {
  int m = 0;
  double a_diff = 0.0;
  double s_pi_diff = 0.0;
};

// Distance of the localized basis to its global (patch = domain) counterpart,
// in the global a-norm and the s-norm of the broken projection.
inline std::vector<DecayPoint> decay_profile(
    const NestedMesh& mesh, const CoefficientField& field, double k, double H,
    const AuxiliarySpace& aux, i64 i, int j, const std::vector<int>& m_list,
    bool strict = false, const SolvePolicy& policy = {},
    const OperatorSet* full_ops = nullptr) {
  std::optional<OperatorSet> own;
  if (!full_ops) {
    own.emplace(assemble_operators(mesh, field, full_region(mesh), k, H));
    full_ops = &*own;
  }
  BasisEntry global = build_ms_basis(mesh, field, k, H, aux, i, j,
                                     mesh.n_coarse, strict, policy);
  VectorXcd u_glob = prolong_field(*global.patch, global.t);
  std::vector<DecayPoint> out;
  for (int m : m_list) {
    BasisEntry local = build_ms_basis(mesh, field, k, H, aux, i, j, m, strict,
                                      policy);
    VectorXcd d = u_glob - prolong_field(*local.patch, local.t);
    DecayPoint pt;
    pt.m = m;
    pt.a_diff = norm_a(*full_ops, d);
    pt.s_pi_diff = pi_s_norm(aux, d);
    out.push_back(pt);
  }
  return out;
}

}  // namespace maxms

#endif
