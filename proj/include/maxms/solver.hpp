#ifndef MAXMS_SOLVER_HPP
#define MAXMS_SOLVER_HPP

#include <functional>
#include <memory>
#include <string>

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>
#include <umfpack.h>

#include <Eigen/CholmodSupport>
#include <Eigen/Dense>

#include "maxms/common.hpp"

namespace maxms {

// Complex LU via UMFPACK (packed complex interface). The symbolic analysis can
// be shared between matrices with identical sparsity patterns.
class UmfpackComplexLU {
 public:
  UmfpackComplexLU() = default;
  UmfpackComplexLU(const UmfpackComplexLU&) = delete;
  UmfpackComplexLU& operator=(const UmfpackComplexLU&) = delete;
  ~UmfpackComplexLU() { release_numeric(); }

  // Returns false without factorizing when UMFPACK's peak-memory estimate
  // exceeds the budget; the caller is expected to fall back to an iterative path.
  bool factor(SpMatC A, std::shared_ptr<void> symbolic_reuse = nullptr,
              double peak_bytes_budget = 2.8e9) {
    release_numeric();
    A_ = std::move(A);
    A_.makeCompressed();
    const int n = int(A_.rows());
    const int* Ap = A_.outerIndexPtr();
    const int* Ai = A_.innerIndexPtr();
    const double* Ax = reinterpret_cast<const double*>(A_.valuePtr());
    double info[UMFPACK_INFO];
    if (symbolic_reuse) {
      symbolic_ = std::move(symbolic_reuse);
    } else {
      void* sym = nullptr;
      int st = umfpack_zi_symbolic(n, n, Ap, Ai, Ax, nullptr, &sym, nullptr, info);
      if (st != UMFPACK_OK)
        throw std::runtime_error("umfpack symbolic failed, status " +
                                 std::to_string(st));
      symbolic_ = std::shared_ptr<void>(sym, [](void* p) {
        umfpack_zi_free_symbolic(&p);
      });
      double est = info[UMFPACK_PEAK_MEMORY_ESTIMATE] * info[UMFPACK_SIZE_OF_UNIT];
      if (est > peak_bytes_budget) {
        peak_bytes_estimate_ = est;
        return false;
      }
    }
    int st = umfpack_zi_numeric(Ap, Ai, Ax, nullptr, symbolic_.get(), &numeric_,
                                nullptr, info);
    if (st != UMFPACK_OK)
      throw std::runtime_error("umfpack numeric failed, status " + std::to_string(st));
    peak_bytes_estimate_ = info[UMFPACK_PEAK_MEMORY] * info[UMFPACK_SIZE_OF_UNIT];
    return true;
  }

  VectorXcd solve(const VectorXcd& b, double* rel_residual = nullptr) const {
    if (!numeric_) throw std::logic_error("umfpack solve before factor");
    VectorXcd x(b.size());
    const int* Ap = A_.outerIndexPtr();
    const int* Ai = A_.innerIndexPtr();
    const double* Ax = reinterpret_cast<const double*>(A_.valuePtr());
    int st = umfpack_zi_solve(UMFPACK_A, Ap, Ai, Ax, nullptr,
                              reinterpret_cast<double*>(x.data()), nullptr,
                              reinterpret_cast<const double*>(b.data()), nullptr,
                              numeric_, nullptr, nullptr);
    if (st != UMFPACK_OK)
      throw std::runtime_error("umfpack solve failed, status " + std::to_string(st));
    if (rel_residual) {
      double bn = b.norm();
      *rel_residual = bn == 0.0 ? 0.0 : (A_ * x - b).norm() / bn;
    }
    return x;
  }

  bool factored() const { return numeric_ != nullptr; }
  std::shared_ptr<void> symbolic() const { return symbolic_; }
  double peak_bytes_estimate() const { return peak_bytes_estimate_; }

 private:
  void release_numeric() {
    if (numeric_) {
      umfpack_zi_free_numeric(&numeric_);
      numeric_ = nullptr;
    }
  }
  SpMatC A_;
  std::shared_ptr<void> symbolic_;
  void* numeric_ = nullptr;
  double peak_bytes_estimate_ = 0.0;
};

struct SolvePolicy {
  double umfpack_budget_bytes = 2.8e9;  // skip direct factorization above this
  i64 umfpack_max_unknowns = 30000;     // skip even the fill estimate above this
  double rel_tol = 1e-10;               // residual contract for reference solves
  double patch_rel_tol = 1e-7;          // residual contract for basis patch solves
  int max_iterations = 3000;            // iterative fallback cap
  bool exploit_symmetry = true;         // mirror patch solutions when the field allows
};

struct SolveStats {
  std::string method;
  double rel_residual = 0.0;
  int iterations = 0;
  double factor_seconds = 0.0;
  double solve_seconds = 0.0;
};

using ApplyFn = std::function<VectorXcd(const VectorXcd&)>;
using ApplyFnM = std::function<MatrixXcd(const MatrixXcd&)>;

struct IterReport {
  bool converged = false;
  int iterations = 0;
  double rel_residual = 0.0;
};

// Conjugate-orthogonal CG for complex symmetric systems, with optional
// preconditioner. Uses the unconjugated bilinear form; falls back to a restart
// on breakdown of that form.
inline IterReport cocg(const ApplyFn& apply_A, const ApplyFn& apply_P,
                       const VectorXcd& b, VectorXcd& x, double tol = 1e-11,
                       int maxit = 2000) {
  IterReport rep;
  double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero(b.size());
    rep.converged = true;
    return rep;
  }
  if (x.size() != b.size()) x = VectorXcd::Zero(b.size());
  VectorXcd r = b - apply_A(x);
  VectorXcd z = apply_P ? apply_P(r) : r;
  VectorXcd p = z;
  cdouble rho = r.transpose() * z;
  for (int it = 1; it <= maxit; ++it) {
    VectorXcd q = apply_A(p);
    cdouble denom = p.transpose() * q;
    if (std::abs(denom) < 1e-300) break;
    cdouble alpha = rho / denom;
    x += alpha * p;
    r -= alpha * q;
    rep.iterations = it;
    rep.rel_residual = r.norm() / bnorm;
    if (rep.rel_residual < tol) {
      rep.converged = true;
      return rep;
    }
    z = apply_P ? apply_P(r) : r;
    cdouble rho_new = r.transpose() * z;
    if (std::abs(rho_new) < 1e-300 || std::abs(rho) < 1e-300) break;
    cdouble beta = rho_new / rho;
    rho = rho_new;
    p = z + beta * p;
  }
  rep.rel_residual = (b - apply_A(x)).norm() / bnorm;
  rep.converged = rep.rel_residual < tol;
  return rep;
}

// Block variant for several right-hand sides sharing one operator. The search
// blocks stay A-conjugate through small projected solves; a rank-deficient
// projection is a breakdown and leaves the caller to restart column by column.
inline IterReport cocg_block(const ApplyFnM& apply_A, const ApplyFnM& apply_P,
                             const MatrixXcd& B, MatrixXcd& X,
                             double tol = 1e-11, int maxit = 2000) {
  IterReport rep;
  const i64 n = B.rows();
  const i64 s = B.cols();
  VectorXd scale(s);
  for (i64 j = 0; j < s; ++j) {
    double bn = B.col(j).norm();
    scale[j] = bn == 0.0 ? 1.0 : bn;
  }
  if (X.rows() != n || X.cols() != s) X = MatrixXcd::Zero(n, s);
  auto worst_of = [&](const MatrixXcd& R) {
    double w = 0.0;
    for (i64 j = 0; j < s; ++j) w = std::max(w, R.col(j).norm() / scale[j]);
    return w;
  };
  MatrixXcd R = B - apply_A(X);
  if (worst_of(R) < tol) {
    rep.converged = true;
    rep.rel_residual = worst_of(R);
    return rep;
  }
  MatrixXcd Z = apply_P ? apply_P(R) : R;
  MatrixXcd P = Z;
  for (int it = 1; it <= maxit; ++it) {
    MatrixXcd Q = apply_A(P);
    Eigen::FullPivLU<MatrixXcd> lu(MatrixXcd(P.transpose() * Q));
    if (!lu.isInvertible()) break;
    MatrixXcd alpha = lu.solve(MatrixXcd(P.transpose() * R));
    X.noalias() += P * alpha;
    R.noalias() -= Q * alpha;
    rep.iterations = it;
    rep.rel_residual = worst_of(R);
    if (rep.rel_residual < tol) break;
    Z = apply_P ? apply_P(R) : R;
    MatrixXcd beta = lu.solve(MatrixXcd(-(Q.transpose() * Z)));
    P = Z + P * beta;
    // Unit search columns keep the projected system well scaled as individual
    // residuals shrink at different rates.
    for (i64 j = 0; j < s; ++j) {
      double pn = P.col(j).norm();
      if (pn > 0.0) P.col(j) /= pn;
    }
  }
  rep.rel_residual = worst_of(B - apply_A(X));
  rep.converged = rep.rel_residual < tol;
  return rep;
}

// Real SPD Cholesky (CHOLMOD supernodal) applied to complex vectors by solving
// for the real and imaginary parts together.
class RealSpdPreconditioner {
 public:
  explicit RealSpdPreconditioner(const SpMat& A) { llt_.compute(A); ok_ = llt_.info() == Eigen::Success; }
  bool ok() const { return ok_; }
  VectorXcd apply(const VectorXcd& r) const {
    MatrixXd ri(r.size(), 2);
    ri.col(0) = r.real();
    ri.col(1) = r.imag();
    MatrixXd s = llt_.solve(ri);
    VectorXcd out(r.size());
    out.real() = s.col(0);
    out.imag() = s.col(1);
    return out;
  }

  // One backsolve for all real and imaginary columns of a block together; the
  // supernodal traversal amortizes across the panel.
  MatrixXcd apply(const MatrixXcd& r) const {
    const i64 n = r.rows(), s = r.cols();
    MatrixXd ri(n, 2 * s);
    ri.leftCols(s) = r.real();
    ri.rightCols(s) = r.imag();
    MatrixXd sol = llt_.solve(ri);
    MatrixXcd out(n, s);
    out.real() = sol.leftCols(s);
    out.imag() = sol.rightCols(s);
    return out;
  }

 private:
  Eigen::CholmodSupernodalLLT<SpMat> llt_;
  bool ok_ = false;
};

// Dense complex solve (LAPACK zgesv), used for the coarse system.
inline MatrixXcd dense_solve(MatrixXcd A, MatrixXcd B) {
  const int n = int(A.rows());
  const int nrhs = int(B.cols());
  std::vector<lapack_int> ipiv(n);
  lapack_int st = LAPACKE_zgesv(LAPACK_COL_MAJOR, n, nrhs,
                                reinterpret_cast<lapack_complex_double*>(A.data()),
                                n, ipiv.data(),
                                reinterpret_cast<lapack_complex_double*>(B.data()),
                                n);
  if (st != 0)
    throw std::runtime_error("zgesv failed, status " + std::to_string(st));
  return B;
}

// Selected eigenpairs (ascending, indices il..iu, 1-based) of the real
// symmetric-definite pencil A v = lambda B v. Eigenvectors are B-orthonormal.
inline void sym_definite_eigs(MatrixXd A, MatrixXd B, int il, int iu,
                              VectorXd& values, MatrixXd& vectors) {
  const int n = int(A.rows());
  const int m_want = iu - il + 1;
  values.resize(m_want);
  vectors.resize(n, m_want);
  std::vector<lapack_int> ifail(n);
  lapack_int m_found = 0;
  double abstol = 2.0 * LAPACKE_dlamch('S');
  lapack_int st = LAPACKE_dsygvx(
      LAPACK_COL_MAJOR, 1, 'V', 'I', 'L', n, A.data(), n, B.data(), n, 0.0, 0.0,
      il, iu, abstol, &m_found, values.data(), vectors.data(), n, ifail.data());
  if (st != 0)
    throw std::runtime_error("dsygvx failed, status " + std::to_string(st));
  if (m_found != m_want)
    throw std::runtime_error("dsygvx returned " + std::to_string(m_found) +
                             " of " + std::to_string(m_want) + " eigenpairs");
}

}  // namespace maxms

#endif
