#include <doctest.h>

#include <cmath>

#include "qdyn/rng.hpp"
#include "test_helpers.hpp"

using namespace qdyn;
using namespace qdyn::testing;

TEST_CASE("expectation values") {
  const Observable sz("sz", pauli_z());
  CHECK(expectation(DensityMatrix(diag2(1.0, 0.0)), sz) == doctest::Approx(1.0));

  const Observable sx("sx", pauli_x());
  CHECK(std::abs(expectation(DensityMatrix(Matrix::identity(2) * cplx{0.5, 0.0}), sx)) < 1e-15);

  CHECK(expectation(bloch_decode({0.5, 0.0, 0.3}), sz) == doctest::Approx(0.3).epsilon(1e-13));
}

TEST_CASE("expectation flags a corrupted state") {
  Matrix bad = diag2(1.0, 0.0);
  bad(0, 1) = cplx{0.0, 1e-3};  // non-Hermitian contamination
  const Observable sx("sx", pauli_x());
  CHECK_THROWS_AS(expectation(DensityMatrix(bad), sx), InvalidState);
}

TEST_CASE("covariance fixed cases") {
  const Observable sx("sx", pauli_x());
  const Observable sz("sz", pauli_z());
  const DensityMatrix mixed(Matrix::identity(2) * cplx{0.5, 0.0});
  CHECK(covariance(mixed, sx, sx.matrix) == doctest::Approx(1.0).epsilon(1e-13));

  CHECK(covariance(DensityMatrix(diag2(0.9, 0.1)), sz, sz.matrix) ==
        doctest::Approx(0.36).epsilon(1e-13));

  // eigenstate of the observable has zero variance
  CHECK(std::abs(covariance(DensityMatrix(diag2(1.0, 0.0)), sz, sz.matrix)) < 1e-14);
}

TEST_CASE("von Neumann entropy") {
  const DensityMatrix mixed(Matrix::identity(2) * cplx{0.5, 0.0});
  CHECK(von_neumann_entropy(mixed) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK(von_neumann_entropy(DensityMatrix(diag2(1.0, 0.0))) == doctest::Approx(0.0));
  CHECK(von_neumann_entropy(DensityMatrix(diag2(0.9, 0.1))) ==
        doctest::Approx(0.325083).epsilon(1e-6));

  // tiny negative eigenvalues are clamped, larger ones rejected
  CHECK(von_neumann_entropy(DensityMatrix(diag2(1.0 + 5e-11, -5e-11))) ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK_THROWS_AS(von_neumann_entropy(DensityMatrix(diag2(1.001, -1e-3))), InvalidState);
}

TEST_CASE("purity") {
  CHECK(purity(DensityMatrix(diag2(1.0, 0.0))) == doctest::Approx(1.0));
  CHECK(purity(DensityMatrix(Matrix::identity(2) * cplx{0.5, 0.0})) == doctest::Approx(0.5));
  CHECK(purity(bloch_decode({0.5, 0.3, 0.2})) == doctest::Approx(0.69).epsilon(1e-13));
}

TEST_CASE("projector_from_ket") {
  CHECK(approx_equal(projector_from_ket(ket2(1.0, 0.0)).matrix, diag2(1.0, 0.0), 1e-15));
  CHECK(approx_equal(projector_from_ket(ket2(2.0, 0.0)).matrix, diag2(1.0, 0.0), 1e-15));

  Matrix plus = Matrix::identity(2);
  add_scaled(plus, 1.0, pauli_x());
  plus *= cplx{0.5, 0.0};
  CHECK(approx_equal(projector_from_ket(ket2(1.0, 1.0)).matrix, plus, 1e-15));

  // norm and global phase invariance
  const cplx phase = std::exp(cplx{0.0, 1.234});
  CHECK(approx_equal(projector_from_ket(ket2(0.3 * phase, 0.3 * phase)).matrix, plus, 1e-14));

  CHECK_THROWS_AS(projector_from_ket(ket2(0.0, 0.0)), InvalidState);
}

TEST_CASE("from_mixture") {
  Mixture trivial;
  trivial.components.push_back({1.0, ket2(1.0, 0.0)});
  CHECK(approx_equal(from_mixture(trivial).matrix, diag2(1.0, 0.0), 1e-15));

  Mixture zbasis;
  zbasis.components.push_back({0.5, ket2(1.0, 0.0)});
  zbasis.components.push_back({0.5, ket2(0.0, 1.0)});
  Mixture xbasis;
  xbasis.components.push_back({0.5, ket2(1.0, 1.0)});
  xbasis.components.push_back({0.5, ket2(1.0, -1.0)});

  const Matrix half_id = Matrix::identity(2) * cplx{0.5, 0.0};
  CHECK(approx_equal(from_mixture(zbasis).matrix, half_id, 1e-15));
  // distinct decomposition, same density matrix
  CHECK(approx_equal(from_mixture(xbasis).matrix, from_mixture(zbasis).matrix, 1e-15));

  Mixture bad = zbasis;
  bad.components[0].weight = 0.6;
  CHECK_THROWS_AS(from_mixture(bad), InvalidArgument);
}

TEST_CASE("bloch encode/decode") {
  CHECK(approx_equal(bloch_decode({0.0, 0.0, 1.0}).matrix, diag2(1.0, 0.0), 1e-15));
  CHECK(approx_equal(bloch_decode({0.0, 0.0, 0.0}).matrix,
                     Matrix::identity(2) * cplx{0.5, 0.0}, 1e-15));

  Rng rng(3);
  for (int it = 0; it < 100; ++it) {
    BlochVector r{rng.normal(), rng.normal(), rng.normal()};
    const double n = r.norm();
    const double target = rng.uniform();
    r.x *= target / n;
    r.y *= target / n;
    r.z *= target / n;
    const BlochVector back = bloch_encode(bloch_decode(r));
    CHECK(std::abs(back.x - r.x) < 1e-14);
    CHECK(std::abs(back.y - r.y) < 1e-14);
    CHECK(std::abs(back.z - r.z) < 1e-14);
  }

  CHECK_THROWS_AS(bloch_decode({1.2, 0.0, 0.0}), InvalidState);
  CHECK_THROWS_AS(bloch_encode(DensityMatrix(Matrix::identity(3) * cplx{1.0 / 3.0, 0.0})),
                  DimensionMismatch);
}

TEST_CASE("entropy depends only on |r|") {
  Rng rng(17);
  for (int it = 0; it < 50; ++it) {
    const double radius = 0.95 * rng.uniform();
    // two random directions with the same radius
    auto direction = [&rng, radius]() {
      BlochVector r{rng.normal(), rng.normal(), rng.normal()};
      const double n = r.norm();
      return BlochVector{r.x * radius / n, r.y * radius / n, r.z * radius / n};
    };
    const double s1 = von_neumann_entropy(bloch_decode(direction()));
    const double s2 = von_neumann_entropy(bloch_decode(direction()));
    CHECK(std::abs(s1 - s2) < 1e-12);
  }
}

TEST_CASE("purity is 1 exactly when the top eigenvalue is 1") {
  Rng rng(29);
  for (int it = 0; it < 100; ++it) {
    const int dim = 2 + static_cast<int>(rng.next_u64() % 3);
    DensityMatrix rho = (it % 2 == 0) ? random_density(dim, rng)
                                      : projector_from_ket(random_ket(dim, rng));
    const double p = purity(rho);
    const double top = hermitian_eig(rho.matrix).eigenvalues.back();
    CHECK((std::abs(p - 1.0) < 1e-12) == (std::abs(top - 1.0) < 1e-10));
  }
}

TEST_CASE("expectation is linear in the observable") {
  Rng rng(31);
  for (int it = 0; it < 50; ++it) {
    const DensityMatrix rho = random_density(3, rng);
    const Matrix a = random_hermitian(3, rng);
    const Matrix b = random_hermitian(3, rng);
    const double alpha = rng.normal();
    const double beta = rng.normal();
    Matrix combo(3);
    add_scaled(combo, alpha, a);
    add_scaled(combo, beta, b);
    const double lhs = expectation(rho, Observable("c", combo));
    const double rhs = alpha * expectation(rho, Observable("a", a)) +
                       beta * expectation(rho, Observable("b", b));
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("log_density matches the spectral logarithm") {
  const DensityMatrix rho = bloch_decode({0.5, 0.3, 0.2});
  const auto lnrho = log_density(rho);
  REQUIRE(lnrho.has_value());
  // tr(ρ ln ρ) = −S
  CHECK(trace_product(rho.matrix, *lnrho).real() ==
        doctest::Approx(-von_neumann_entropy(rho)).epsilon(1e-12));

  // near-pure states are reported as gaps
  CHECK_FALSE(log_density(DensityMatrix(diag2(1.0, 0.0))).has_value());
}

TEST_CASE("observable constructor rejects non-Hermitian matrices") {
  CHECK_THROWS_AS(Observable("bad", mat2(0.0, 1.0, 0.5, 0.0)), NonHermitianInput);
}

TEST_CASE("density matrix validation") {
  DensityMatrix good = bloch_decode({0.2, 0.1, -0.4});
  CHECK_NOTHROW(good.validate());

  DensityMatrix off_trace(diag2(0.8, 0.1));
  CHECK_THROWS_AS(off_trace.validate(), InvalidState);

  DensityMatrix negative(diag2(1.5, -0.5));
  CHECK_THROWS_AS(negative.validate(), InvalidState);
}
