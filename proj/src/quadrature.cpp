#include "evolvefem/mesh.hpp"

#include <cmath>
#include <numbers>

namespace evolvefem::mesh {
namespace {

// Orbits of a symmetric rule in barycentric coordinates; weights normalized to sum 1.
void add_centroid(QuadratureRule& r, double w) {
  r.points.emplace_back(1.0 / 3.0, 1.0 / 3.0);
  r.weights.push_back(w);
}

void add_orbit3(QuadratureRule& r, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  // barycentric (b, a, a) and permutations; reference coords are (l1, l2)
  r.points.emplace_back(a, a);
  r.points.emplace_back(b, a);
  r.points.emplace_back(a, b);
  for (int i = 0; i < 3; ++i) r.weights.push_back(w);
}

void add_orbit6(QuadratureRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  const double l[3] = {a, b, c};
  const int perm[6][2] = {{0, 1}, {1, 0}, {0, 2}, {2, 0}, {1, 2}, {2, 1}};
  for (const auto& p : perm) {
    r.points.emplace_back(l[p[0]], l[p[1]]);
    r.weights.push_back(w);
  }
}

void scale_to_reference_area(QuadratureRule& r) {
  for (double& w : r.weights) w *= 0.5;
}

// Gauss-Legendre nodes/weights on [0,1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

QuadratureRule collapsed_rule(int degree) {
  // Duffy map (u, v) -> (u, v (1 - u)); Jacobian (1 - u) raises the u-degree by one.
  const int n = (degree + 2) / 2 + 1;
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  QuadratureRule r;
  r.degree = degree;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      r.points.emplace_back(x[i], x[j] * (1.0 - x[i]));
      r.weights.push_back(w[i] * w[j] * (1.0 - x[i]));
    }
  }
  return r;
}

}  // namespace

QuadratureRule quadrature_rule(int exactness_degree) {
  QuadratureRule r;
  const int d = exactness_degree < 1 ? 1 : exactness_degree;
  if (d == 1) {
    r.degree = 1;
    add_centroid(r, 1.0);
  } else if (d == 2) {
    r.degree = 2;
    add_orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
  } else if (d <= 4) {
    r.degree = 4;
    add_orbit3(r, 0.445948490915965, 0.223381589678011);
    add_orbit3(r, 0.091576213509771, 0.109951743655322);
  } else if (d == 5) {
    r.degree = 5;
    const double s15 = std::sqrt(15.0);
    add_centroid(r, 9.0 / 40.0);
    add_orbit3(r, (6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
    add_orbit3(r, (6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
  } else if (d == 6) {
    r.degree = 6;
    add_orbit3(r, 0.249286745170910, 0.116786275726379);
    add_orbit3(r, 0.063089014491502, 0.050844906370207);
    add_orbit6(r, 0.053145049844817, 0.310352451033784, 0.082851075618374);
  } else {
    return collapsed_rule(d);
  }
  scale_to_reference_area(r);
  return r;
}

}  // namespace evolvefem::mesh
