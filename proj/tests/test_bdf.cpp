#include <doctest.h>

#include "evolvefem/bdf.hpp"

#include <cmath>
#include <complex>
#include <vector>

using namespace evolvefem;
using namespace evolvefem::bdf;

namespace {

// Independent oracle: delta_j from the order conditions sum_j delta_j (n - j)^m = m n^(m-1)
// at n = 0, i.e. sum_j delta_j (-j)^m = m [m == 1] for m = 0..p, solved densely.
std::vector<double> delta_from_order_conditions(int p) {
  Eigen::MatrixXd a(p + 1, p + 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p + 1);
  for (int m = 0; m <= p; ++m)
    for (int j = 0; j <= p; ++j) a(m, j) = std::pow(-static_cast<double>(j), m);
  b[1] = 1.0;
  const Eigen::VectorXd d = a.fullPivLu().solve(b);
  return {d.data(), d.data() + d.size()};
}

}  // namespace

TEST_CASE("BDF2 and BDF3 coefficients are exact rationals") {
  const auto d2 = delta_rational(2);
  REQUIRE(d2.size() == 3);
  CHECK(d2[0] == Rational(3, 2));
  CHECK(d2[1] == Rational(-2));
  CHECK(d2[2] == Rational(1, 2));
  const auto g2 = gamma_rational(2);
  REQUIRE(g2.size() == 2);
  CHECK(g2[0] == Rational(2));
  CHECK(g2[1] == Rational(-1));

  const auto d3 = delta_rational(3);
  CHECK(d3[0] == Rational(11, 6));
  CHECK(d3[1] == Rational(-3));
  CHECK(d3[2] == Rational(3, 2));
  CHECK(d3[3] == Rational(-1, 3));
  const auto g3 = gamma_rational(3);
  CHECK(g3[0] == Rational(3));
  CHECK(g3[1] == Rational(-3));
  CHECK(g3[2] == Rational(1));

  const auto d6 = delta_rational(6);
  CHECK(d6[0] == Rational(49, 20));
  CHECK(d6[6] == Rational(1, 6));
}

TEST_CASE("delta satisfies the order conditions for every order") {
  for (int p = 1; p <= 6; ++p) {
    const auto d = delta_coefficients(p);
    const auto oracle = delta_from_order_conditions(p);
    double sum = 0.0;
    for (int j = 0; j <= p; ++j) {
      CHECK(d[j] == doctest::Approx(oracle[j]).epsilon(1e-10));
      sum += d[j];
    }
    CHECK(std::abs(sum) < 1e-14);
  }
}

TEST_CASE("extrapolation is exact for polynomials of degree p - 1") {
  for (int p = 1; p <= 6; ++p) {
    const auto g = gamma_coefficients(p);
    double gsum = 0.0;
    for (double v : g) gsum += v;
    CHECK(gsum == doctest::Approx(1.0));
    for (int deg = 0; deg < p; ++deg) {
      // history newest first at t = -1, -2, ..., -p; target t = 0
      std::vector<double> hist;
      for (int j = 1; j <= p; ++j) hist.push_back(std::pow(-static_cast<double>(j), deg) + 1.0);
      const double value = extrapolate<double>(hist, g);
      CHECK(value == doctest::Approx(deg == 0 ? 2.0 : 1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("extrapolate validates history length") {
  const auto g = gamma_coefficients(3);
  std::vector<double> hist = {1.0, 2.0};
  CHECK_THROWS_AS(extrapolate<double>(hist, g), InputError);
}

TEST_CASE("orders outside 1..6 are rejected") {
  CHECK_THROWS_AS(delta_coefficients(0), ConfigError);
  CHECK_THROWS_AS(delta_coefficients(7), ConfigError);
  CHECK_THROWS_AS(BdfScheme::make(7), ConfigError);
}

TEST_CASE("zero stability holds exactly for orders 1..6") {
  for (int p = 1; p <= 6; ++p) {
    CAPTURE(p);
    CHECK(zero_stability_check(p));
    const auto roots = delta_roots(p);
    CHECK(static_cast<int>(roots.size()) == p);
  }
  CHECK_FALSE(zero_stability_check(7));
}

TEST_CASE("multiplier table") {
  const double eta[] = {0.0, 0.0, 0.0836, 0.2878, 0.8160};
  for (int p = 1; p <= 5; ++p) {
    CAPTURE(p);
    REQUIRE(nevanlinna_odeh_eta(p).has_value());
    CHECK(*nevanlinna_odeh_eta(p) == eta[p - 1]);
    CHECK(multiplier_check(p, eta[p - 1]));
  }
  CHECK_FALSE(nevanlinna_odeh_eta(6).has_value());
  // Without a multiplier BDF5 is not A-stable, so the positivity fails.
  CHECK_FALSE(multiplier_check(5, 0.0));
  CHECK_FALSE(multiplier_check(3, 0.0));
  CHECK_THROWS_AS(multiplier_check(3, 1.0), InputError);
  CHECK_THROWS_AS(multiplier_check(3, -0.1), InputError);
}

TEST_CASE("G-matrix telescoping inequality") {
  // The tabulated BDF4 multiplier 0.2878 is rounded below the true minimum: Re delta/mu
  // dips to about -1.3e-5 on the unit circle, so no G exists there. 0.2879 is feasible.
  const double eta[] = {0.0, 0.0, 0.0836, 0.2879, 0.8160};
  for (int p = 1; p <= 5; ++p) {
    CAPTURE(p);
    const GMatrixResult r = g_matrix_search(p, eta[p - 1], 20000);
    REQUIRE(r.found);
    CHECK(r.g.rows() == p);
    CHECK(r.worst_violation >= -1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.g);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
  CHECK(g_matrix_exists_check(1, 0.0));
  CHECK(g_matrix_exists_check(5, 0.9));

  // Backward Euler: G = [1/2].
  CHECK(g_matrix_search(1, 0.0, 100).g(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  // BDF2 without multiplier: G = 1/4 [[1, -2], [-2, 5]] with the older value first.
  const GMatrixResult g2 = g_matrix_search(2, 0.0, 1000);
  REQUIRE(g2.found);
  CHECK(g2.g(0, 0) == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(g2.g(0, 1) == doctest::Approx(-0.5).epsilon(1e-10));
  CHECK(g2.g(1, 1) == doctest::Approx(1.25).epsilon(1e-10));

  CHECK_FALSE(g_matrix_search(5, 0.0, 20000).found);
  CHECK_FALSE(g_matrix_search(3, 0.0, 20000).found);
  CHECK_FALSE(g_matrix_search(6, 0.9, 20000).found);
}
