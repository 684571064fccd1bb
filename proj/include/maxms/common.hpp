#ifndef MAXMS_COMMON_HPP
#define MAXMS_COMMON_HPP

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <chrono>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace maxms {

using cdouble = std::complex<double>;
using SpMat = Eigen::SparseMatrix<double>;
using SpMatC = Eigen::SparseMatrix<cdouble>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;
using TripletC = Eigen::Triplet<cdouble>;

constexpr cdouble kImagUnit{0.0, 1.0};

// Real sparse matrix times complex vector; matrices are stored real and
// combined with complex weights only at application time.
inline VectorXcd spmv(const SpMat& A, const VectorXcd& v) {
  VectorXd re = v.real();
  VectorXd im = v.imag();
  VectorXd are = A * re;
  VectorXd aim = A * im;
  VectorXcd out(A.rows());
  out.real() = are;
  out.imag() = aim;
  return out;
}

// x^H A x for real symmetric A; the result is real up to roundoff.
inline double quad_form(const SpMat& A, const VectorXcd& x) {
  VectorXd re = x.real();
  VectorXd im = x.imag();
  return re.dot(A * re) + im.dot(A * im);
}

// Unconjugated x^T A y.
inline cdouble bilin(const SpMat& A, const VectorXcd& x, const VectorXcd& y) {
  return x.transpose() * spmv(A, y);
}

// Conjugated x^H A y.
inline cdouble sesq(const SpMat& A, const VectorXcd& x, const VectorXcd& y) {
  return x.conjugate().transpose() * spmv(A, y);
}

// Deterministic RNG with hand-rolled sampling; std distributions are not
// bit-portable across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Log-uniform over [lo, hi], lo > 0.
  double log_uniform(double lo, double hi) {
    return lo * std::exp(uniform() * std::log(hi / lo));
  }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t bound = std::uint64_t(hi - lo) + 1;
    std::uint64_t reject = (0 - bound) % bound;
    std::uint64_t x = gen_();
    while (x < reject) x = gen_();
    return lo + std::int64_t((x - reject) % bound);
  }

  VectorXcd complex_vector(Eigen::Index n) {
    VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
      v[i] = cdouble(uniform(-1.0, 1.0), uniform(-1.0, 1.0));
    return v;
  }

  VectorXd real_vector(Eigen::Index n) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(-1.0, 1.0);
    return v;
  }

 private:
  std::mt19937_64 gen_;
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    auto now = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(now - start_).count();
  }
  void reset() { start_ = std::chrono::steady_clock::now(); }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t hash_doubles(const std::vector<double>& v,
                                  std::uint64_t h = 1469598103934665603ull) {
  return v.empty() ? h : fnv1a64(v.data(), v.size() * sizeof(double), h);
}

}  // namespace maxms

#endif
