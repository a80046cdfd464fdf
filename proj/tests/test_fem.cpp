#include <doctest.h>

#include "evolvefem/fem.hpp"
#include "evolvefem/mesh.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace evolvefem;
using namespace evolvefem::fem;

namespace {

mesh::SurfaceMesh flat_triangle() {
  NodalVector p = NodalVector::vector3(3);
  p.set_node(0, {0, 0, 0});
  p.set_node(1, {1, 0, 0});
  p.set_node(2, {0, 1, 0});
  return mesh::SurfaceMesh(1, {0, 1, 2}, p);
}

// Dense copy for small oracle computations.
Eigen::MatrixXd dense(const SparseSymMatrix& s) {
  const int n = s.dimension();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  const auto& p = s.pattern();
  for (int i = 0; i < n; ++i)
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) d(i, p.cols[k]) = s.values()[k];
  return d;
}

}  // namespace

TEST_CASE("element mass matrix of the unit right triangle") {
  const auto m = flat_triangle();
  const Eigen::MatrixXd mass = dense(assemble_mass(m, m.initial_positions()));
  Eigen::Matrix3d expected;
  expected << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  expected /= 24.0;
  CHECK((mass - expected).cwiseAbs().maxCoeff() < 1e-15);

  // P1 stiffness of the right triangle: [[1,-1/2,-1/2],[-1/2,1/2,0],[-1/2,0,1/2]]
  const Eigen::MatrixXd stiff = dense(assemble_stiffness(m, m.initial_positions()));
  Eigen::Matrix3d a;
  a << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
  CHECK((stiff - a).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("sphere area, Dirichlet energy of the identity, and kernels") {
  for (int k : {1, 2}) {
    const auto m = mesh::generate_sphere_mesh(3, k);
    Assembler asmb(m);
    const auto [mass, stiff] = asmb.mass_stiffness(m.initial_positions());
    const Vector ones = Vector::Ones(m.num_nodes());
    const double area = ones.dot(mass * ones);
    const double energy = m.initial_positions().values.dot(stiff * m.initial_positions().values);
    CAPTURE(k);
    // |grad_Gamma id|^2 = 2 on any surface, so x^T A x = 2 |Gamma_h|
    CHECK(energy == doctest::Approx(2.0 * area).epsilon(1e-12));
    CHECK(area == doctest::Approx(4.0 * M_PI).epsilon(k == 2 ? 1e-4 : 2e-2));
    CHECK((stiff * ones).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(mass.is_exactly_symmetric());
    CHECK(stiff.is_exactly_symmetric());
    CHECK(mass.diagonal().minCoeff() > 0.0);
  }
}

TEST_CASE("area converges at the geometric rate h^(2k)") {
  for (int k : {1, 2}) {
    double prev_err = 0.0, prev_h = 0.0;
    for (int level = 1; level <= 4; ++level) {
      const auto m = mesh::generate_sphere_mesh(level, k);
      const auto mass = assemble_mass(m, m.initial_positions());
      const Vector ones = Vector::Ones(m.num_nodes());
      const double err = std::abs(ones.dot(mass * ones) - 4.0 * M_PI);
      const double h = mesh::mesh_width(m, m.initial_positions());
      if (level > 1) {
        CAPTURE(k);
        CAPTURE(level);
        CHECK(std::log(prev_err / err) / std::log(prev_h / h) > 2.0 * k - 0.3);
      }
      prev_err = err;
      prev_h = h;
    }
  }
}

TEST_CASE("blockwise product equals three scalar products") {
  const auto m = mesh::generate_sphere_mesh(1, 2);
  const auto mass = assemble_mass(m, m.initial_positions());
  const int n = m.num_nodes();
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  Vector w(3 * n);
  for (auto& v : w) v = nd(rng);
  const Vector y = mass * w;
  for (int l = 0; l < 3; ++l) {
    const Vector yl = mass * Vector(w.segment(l * n, n));
    CHECK((y.segment(l * n, n) - yl).norm() < 1e-14 * yl.norm());
  }
}

TEST_CASE("normal right-hand side integrates g nu against the basis") {
  const auto m = mesh::generate_sphere_mesh(3, 2);
  Assembler asmb(m);
  const NodalVector& x = m.initial_positions();
  // Sum over nodes of component l of the rhs with g = 1 is int nu_l = 0 on a closed surface.
  const NodalVector one =
      asmb.normal_rhs(x, PointForcing([](const Vec3&, double) { return 1.0; }), 0.0);
  const int n = m.num_nodes();
  for (int l = 0; l < 3; ++l) CHECK(std::abs(one.values.segment(l * n, n).sum()) < 1e-13);
  // With g = 1 the pairing with x is int x . nu = 3 |enclosed volume| ~ 4 pi.
  CHECK(x.values.dot(one.values) == doctest::Approx(4.0 * M_PI).epsilon(1e-4));
  // g = x_1 pairs with e_1 to int x_1 nu_1 = volume = 4 pi / 3.
  const NodalVector gx =
      asmb.normal_rhs(x, PointForcing([](const Vec3& p, double) { return p.x(); }), 0.0);
  CHECK(gx.values.segment(0, n).sum() == doctest::Approx(4.0 * M_PI / 3.0).epsilon(1e-4));
}

TEST_CASE("field forcing sees u and its surface gradient") {
  const auto m = mesh::generate_sphere_mesh(3, 2);
  Assembler asmb(m);
  const NodalVector& x = m.initial_positions();
  const NodalVector u = interpolate_scalar(x, [](const Vec3& p) { return p.z(); });
  // grad_Gamma z = e_3 - z nu, so |grad z|^2 = 1 - z^2 and int |grad z|^2 = 8 pi / 3.
  const NodalVector f = asmb.scalar_rhs(
      x, [](double, const Vec3& g, const Vec3&, double) { return g.squaredNorm(); }, u, 0.0);
  CHECK(f.values.sum() == doctest::Approx(8.0 * M_PI / 3.0).epsilon(1e-4));
  const NodalVector fu = asmb.scalar_rhs(
      x, [](double uq, const Vec3&, const Vec3&, double) { return uq * uq; }, u, 0.0);
  CHECK(fu.values.sum() == doctest::Approx(4.0 * M_PI / 3.0).epsilon(1e-4));
}

TEST_CASE("weak Laplace-Beltrami identity for a spherical harmonic") {
  // -Delta x_1 = 2 x_1 on the unit sphere, so A I x_1 ~ 2 M I x_1 in the dual pairing.
  const auto m = mesh::generate_sphere_mesh(3, 2);
  Assembler asmb(m);
  const auto [mass, stiff] = asmb.mass_stiffness(m.initial_positions());
  const NodalVector u = interpolate_scalar(m.initial_positions(), [](const Vec3& p) { return p.x(); });
  const NodalVector w = interpolate_scalar(m.initial_positions(),
                                           [](const Vec3& p) { return p.x() + p.y() * p.z(); });
  const double lhs = w.values.dot(stiff * u.values);
  const double rhs = 2.0 * w.values.dot(mass * u.values);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-3));
  CHECK(rhs == doctest::Approx(8.0 * M_PI / 3.0).epsilon(1e-3));
}

TEST_CASE("norms") {
  const auto m = mesh::generate_sphere_mesh(2, 2);
  const auto [mass, stiff] = Assembler(m).mass_stiffness(m.initial_positions());
  const Vector ones = Vector::Ones(m.num_nodes());
  CHECK(norm_M(ones, mass) == doctest::Approx(std::sqrt(ones.dot(mass * ones))));
  CHECK(norm_A(ones, stiff) < 1e-6);
  const KOperator k(mass, stiff, 1.0);
  const Vector& x = m.initial_positions().values;
  const double nk = norm_K(x, k);
  CHECK(nk * nk == doctest::Approx(norm_M(x, mass) * norm_M(x, mass) +
                                   norm_A(x, stiff) * norm_A(x, stiff))
                       .epsilon(1e-12));
}

TEST_CASE("dual norm equals the supremum over test vectors") {
  // ||d||_* = sup_w (w^T M d) / ||w||_K. The maximizer is w = K^{-1} M d; random
  // perturbations never exceed it.
  const auto m = mesh::generate_sphere_mesh(1, 2);
  const auto [mass, stiff] = Assembler(m).mass_stiffness(m.initial_positions());
  const KOperator k(mass, stiff, 1.0);
  const int n3 = 3 * m.num_nodes();
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  Vector d(n3);
  for (auto& v : d) v = nd(rng);
  SolverOptions tight;
  tight.rel_tol = 1e-13;
  const double star = dual_norm_star(d, mass, k, tight);
  const Vector md = mass * d;
  const Vector wopt = solve_spd(k, md, tight);
  CHECK(md.dot(wopt) / norm_K(wopt, k) == doctest::Approx(star).epsilon(1e-10));
  double sampled = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Vector w = wopt;
    for (auto& v : w) v += 0.05 * nd(rng) * wopt.cwiseAbs().maxCoeff();
    sampled = std::max(sampled, md.dot(w) / norm_K(w, k));
  }
  CHECK(sampled <= star * (1.0 + 1e-12));
  CHECK(sampled > 0.5 * star);
  CHECK(dual_norm_star(Vector::Zero(n3), mass, k) == 0.0);
}

TEST_CASE("conjugate gradients report the recomputed residual") {
  const auto m = mesh::generate_sphere_mesh(3, 2);
  const auto [mass, stiff] = Assembler(m).mass_stiffness(m.initial_positions());
  const SparseSymMatrix s = SparseSymMatrix::combine(10.0, mass, 1.0, stiff);
  const MatrixOperator op(s, Arity::Vector3);
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  Vector b(3 * m.num_nodes());
  for (auto& v : b) v = nd(rng);
  Vector x;
  const SolveReport rep = solve_spd(op, b, x);
  CHECK(rep.residual <= 1e-10 * b.norm());
  CHECK(rep.residual == doctest::Approx((s * x - b).norm()).epsilon(1e-12));
  CHECK(rep.iterations > 0);

  // warm start from the solution converges immediately
  const SolveReport again = solve_spd(op, b, x);
  CHECK(again.iterations == 0);

  SolverOptions starved;
  starved.max_iterations = 2;
  Vector y;
  try {
    solve_spd(op, b, y, starved);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.iterations() == 2);
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("solver rejects an indefinite operator") {
  const auto m = mesh::generate_sphere_mesh(0, 1);
  const auto [mass, stiff] = Assembler(m).mass_stiffness(m.initial_positions());
  const SparseSymMatrix s = SparseSymMatrix::combine(1.0, mass, -10.0, stiff);
  const MatrixOperator op(s, Arity::Scalar);
  Vector b = Vector::LinSpaced(m.num_nodes(), -1.0, 1.0);
  CHECK_THROWS_AS(solve_spd(op, b), SolverError);
}

TEST_CASE("matrix market export") {
  const auto m = flat_triangle();
  std::ostringstream out;
  assemble_mass(m, m.initial_positions()).write_matrix_market(out);
  const std::string s = out.str();
  CHECK(s.rfind("%%MatrixMarket matrix coordinate real symmetric", 0) == 0);
  CHECK(s.find("3 3 6") != std::string::npos);
}

TEST_CASE("assembly rejects mismatched positions") {
  const auto m = mesh::generate_sphere_mesh(0, 1);
  CHECK_THROWS_AS(assemble_mass(m, NodalVector::vector3(3)), InputError);
}
