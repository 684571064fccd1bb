#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"

using namespace maxms;

namespace {

struct SpectralFixture {
  NestedMesh mesh = build_nested_mesh(2, 2);
  CoefficientField field;
  double k = 4.0;
  int l = 4;
  SpectralFixture() { field = oracle::random_field(mesh, 301, 0.5, 8.0); }

  // Dense element pencil straight from the fresh quadrature oracle.
  void element_pencil(i64 i, MatrixXd& A, MatrixXd& S) const {
    Patch p = extract_patch(mesh, i, 0);
    oracle::DenseOps d = oracle::dense_assemble(mesh.n, mesh.h, field.values,
                                                mesh.H, p.flo.data(),
                                                p.fhi.data());
    A = d.K + k * k * d.M + k * d.Mbd;
    S = d.S;
  }
};

// s-orthogonal complement of the gradient span, via SVD instead of an LU
// kernel, so the deflated pencil below has an independent construction.
MatrixXd svd_gradient_complement(const MatrixXd& S, const MatrixXd& G) {
  MatrixXd C = (S * G).transpose();
  Eigen::JacobiSVD<MatrixXd> svd(C, Eigen::ComputeFullV);
  double smax = svd.singularValues()[0];
  i64 rank = 0;
  for (i64 i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10 * smax) ++rank;
  return svd.matrixV().rightCols(C.cols() - rank);
}

}  // namespace

TEST_CASE("ascending local spectra match the dense pencil oracle") {
  SpectralFixture fx;
  AuxiliarySpace aux = build_auxiliary_space(fx.mesh, fx.field, fx.k, fx.mesh.H,
                                             fx.l, 1, AuxSelection::ASCENDING);
  REQUIRE(aux.elements.size() == std::size_t(fx.mesh.num_coarse()));
  double lambda_min = std::numeric_limits<double>::infinity();
  for (i64 i = 0; i < fx.mesh.num_coarse(); ++i) {
    const AuxElement& e = aux.at(i);
    REQUIRE(e.eigvals.size() == fx.l + 1);
    REQUIRE(e.Phi.cols() == fx.l);

    MatrixXd A, S;
    fx.element_pencil(i, A, S);
    VectorXd values;
    MatrixXd vectors;
    oracle::dense_pencil(A, S, values, vectors);

    for (int j = 0; j <= fx.l; ++j)
      REQUIRE(std::abs(e.eigvals[j] - values[j]) <=
              1e-9 * std::max(1.0, std::abs(values[j])));

    // The heterogeneous coefficient splits the spectrum; demand a genuine gap
    // before comparing subspaces.
    REQUIRE(values[fx.l] - values[fx.l - 1] > 1e-6 * values[fx.l]);
    double angle =
        oracle::max_principal_angle(e.Phi, vectors.leftCols(fx.l), S);
    REQUIRE(angle < 1e-8);

    // Retained modes are s-orthonormal with consistent Rayleigh quotients.
    MatrixXd gram = e.Phi.transpose() * S * e.Phi;
    REQUIRE((gram - MatrixXd::Identity(fx.l, fx.l)).norm() < 1e-10);
    for (int j = 0; j < fx.l; ++j) {
      VectorXd phi = e.Phi.col(j);
      double rayleigh = phi.dot(A * phi) / phi.dot(S * phi);
      REQUIRE(std::abs(rayleigh - e.eigvals[j]) <= 1e-8 * e.eigvals[j]);
    }
    // W is the s-weighted image used by projections and patch borders.
    REQUIRE((e.W - S * e.Phi).norm() <= 1e-12 * e.W.norm());
    lambda_min = std::min(lambda_min, e.eigvals[fx.l]);
  }
  CHECK(std::abs(aux.Lambda - lambda_min) <= 1e-14 * lambda_min);
}

TEST_CASE("retained spaces satisfy the spectral projection bound") {
  SpectralFixture fx;
  AuxiliarySpace aux = build_auxiliary_space(fx.mesh, fx.field, fx.k, fx.mesh.H,
                                             fx.l, 1, AuxSelection::ASCENDING);
  Rng rng(311);
  for (i64 i = 0; i < fx.mesh.num_coarse(); ++i) {
    const AuxElement& e = aux.at(i);
    MatrixXd A, S;
    fx.element_pencil(i, A, S);
    double inv_next = 1.0 / e.eigvals[fx.l];
    for (int t = 0; t < 50; ++t) {
      VectorXcd v = rng.complex_vector(A.rows());
      VectorXcd pv = mul_rc(e.Phi, mul_rc(e.W.transpose(), v));
      VectorXcd d = v - pv;
      double s2 = ((d.conjugate().transpose() * (S * d))[0]).real();
      double a2 = ((v.conjugate().transpose() * (A * v))[0]).real();
      REQUIRE(s2 <= inv_next * a2 * (1.0 + 1e-9) + 1e-10);
    }
  }
}

TEST_CASE("gradient deflation removes the low spectral band") {
  SpectralFixture fx;
  AuxiliarySpace asc = build_auxiliary_space(fx.mesh, fx.field, fx.k, fx.mesh.H,
                                             fx.l, 1, AuxSelection::ASCENDING);
  AuxiliarySpace def = build_auxiliary_space(fx.mesh, fx.field, fx.k, fx.mesh.H,
                                             fx.l, 1,
                                             AuxSelection::DEFLATE_GRADIENTS);
  CHECK(def.Lambda > asc.Lambda * 1.5);
  for (i64 i = 0; i < fx.mesh.num_coarse(); ++i) {
    const AuxElement& e = def.at(i);
    Patch p = extract_patch(fx.mesh, i, 0);
    MatrixXd A, S;
    fx.element_pencil(i, A, S);
    MatrixXd G = gradient_matrix(p);

    // Retained modes are s-orthogonal to every discrete gradient.
    MatrixXd cross = G.transpose() * S * e.Phi;
    CHECK(cross.norm() < 1e-8);

    MatrixXd gram = e.Phi.transpose() * S * e.Phi;
    CHECK((gram - MatrixXd::Identity(fx.l, fx.l)).norm() < 1e-9);

    // Independent twin: project the pencil onto an SVD complement basis.
    MatrixXd Z = svd_gradient_complement(S, G);
    MatrixXd Ad = Z.transpose() * A * Z;
    MatrixXd Sd = Z.transpose() * S * Z;
    VectorXd values;
    MatrixXd vectors;
    oracle::dense_pencil(Ad, Sd, values, vectors);
    for (int j = 0; j <= fx.l; ++j)
      REQUIRE(std::abs(e.eigvals[j] - values[j]) <= 1e-8 * values[j]);
    // Every deflated mode sits above the ascending floor.
    CHECK(e.eigvals[0] > asc.at(i).eigvals[0] * 1.5);
  }
}

TEST_CASE("the gradient matrix spans the curl-free edge fields") {
  NestedMesh mesh = build_nested_mesh(2, 2);
  CoefficientField field = oracle::random_field(mesh, 321, 0.5, 20.0);
  Patch full = full_region(mesh);
  MatrixXd G = gradient_matrix(full);
  CHECK((G - oracle::gradient_table(mesh.n)).norm() == 0.0);

  OperatorSet ops = assemble_operators(mesh, field, full, 4.0, mesh.H);
  MatrixXd K = MatrixXd(ops.K);
  CHECK((K * G).norm() <= 1e-12 * K.norm() * G.norm());

  // Rank is the node count minus one (constants drop out).
  Eigen::FullPivLU<MatrixXd> lu(G);
  CHECK(lu.rank() == G.cols() - 1);
}

TEST_CASE("projection coefficients recover a prolonged mode") {
  SpectralFixture fx;
  AuxiliarySpace aux = build_auxiliary_space(fx.mesh, fx.field, fx.k, fx.mesh.H,
                                             fx.l, 1, AuxSelection::ASCENDING);
  for (i64 i : {i64(0), fx.mesh.num_coarse() - 1}) {
    const AuxElement& e = aux.at(i);
    for (int j = 0; j < fx.l; ++j) {
      VectorXcd mode = e.Phi.col(j).cast<cdouble>();
      VectorXcd global = prolong_field(e.elem_patch, mode);
      VectorXcd c = pi_coefficients(e, global);
      for (int q = 0; q < fx.l; ++q)
        REQUIRE(std::abs(c[q] - (q == j ? 1.0 : 0.0)) < 1e-10);
    }
  }
}

TEST_CASE("the broken projection contracts the s-norm") {
  SpectralFixture fx;
  AuxiliarySpace aux = build_auxiliary_space(fx.mesh, fx.field, fx.k, fx.mesh.H,
                                             fx.l, 1, AuxSelection::ASCENDING);
  OperatorSet ops =
      assemble_operators(fx.mesh, fx.field, full_region(fx.mesh), fx.k, fx.mesh.H);
  Rng rng(331);
  for (int t = 0; t < 10; ++t) {
    VectorXcd v = rng.complex_vector(fx.mesh.num_edges());
    CHECK(pi_s_norm(aux, v) <= norm_s(ops, v) * (1.0 + 1e-12));
    // Broken norm identity: squared coefficients sum elementwise.
    double acc = 0.0;
    for (const AuxElement& e : aux.elements)
      acc += pi_coefficients(e, v).squaredNorm();
    CHECK(std::abs(pi_s_norm(aux, v) - std::sqrt(acc)) < 1e-13);
  }
  // The accumulated edge field of the projection lives on the same mesh.
  VectorXcd v = rng.complex_vector(fx.mesh.num_edges());
  CHECK(project_pi(aux, v).size() == fx.mesh.num_edges());
  CHECK_THROWS_AS(project_pi(aux, VectorXcd::Zero(7)), std::invalid_argument);
}

TEST_CASE("auxiliary spaces are identical across worker counts") {
  SpectralFixture fx;
  AuxiliarySpace a1 = build_auxiliary_space(fx.mesh, fx.field, fx.k, fx.mesh.H,
                                            fx.l, 1);
  AuxiliarySpace a2 = build_auxiliary_space(fx.mesh, fx.field, fx.k, fx.mesh.H,
                                            fx.l, 2);
  REQUIRE(a1.elements.size() == a2.elements.size());
  CHECK(a1.Lambda == a2.Lambda);
  for (std::size_t i = 0; i < a1.elements.size(); ++i) {
    CHECK((a1.elements[i].eigvals - a2.elements[i].eigvals).norm() == 0.0);
    CHECK((a1.elements[i].Phi - a2.elements[i].Phi).norm() == 0.0);
  }
}

TEST_CASE("local spectral solves validate their mode budget") {
  NestedMesh mesh = build_nested_mesh(1, 1);
  CoefficientField field = generate(ModelSpec{}, mesh);
  Patch elem = extract_patch(mesh, 0, 0);
  OperatorSet ops = assemble_operators(mesh, field, elem, 4.0, mesh.H);
  CHECK_THROWS_AS(solve_local_spectral(ops, 0), std::invalid_argument);
  CHECK_THROWS_AS(solve_local_spectral(ops, 12), std::invalid_argument);
  // A single 1-cell element has 12 edges and 7 non-gradient directions.
  CHECK_NOTHROW(solve_local_spectral(ops, 4));
  CHECK_THROWS_AS(solve_local_spectral_deflated(ops, 7), std::invalid_argument);
  CHECK_NOTHROW(solve_local_spectral_deflated(ops, 2));
}

TEST_CASE("resolution_check computes k H sqrt(mu_max / Lambda)") {
  ResolutionReport r = resolution_check(4.0, 0.125, 1.0, 4.0);
  CHECK(std::abs(r.value - 4.0 * 0.125 * 0.5) < 1e-15);
  CHECK(r.threshold == 0.35);
  CHECK(r.satisfied);

  ResolutionReport tight = resolution_check(32.0, 0.25, 1000.0, 4.0);
  CHECK_FALSE(tight.satisfied);

  ResolutionReport tiny = resolution_check(1e-9, 0.25, 10.0, 4.0);
  CHECK(tiny.satisfied);

  ResolutionReport custom = resolution_check(4.0, 0.125, 1.0, 4.0, 0.2);
  CHECK(custom.threshold == 0.2);
  CHECK_FALSE(custom.satisfied);
}
