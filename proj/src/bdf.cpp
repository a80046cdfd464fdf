#include "evolvefem/bdf.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace evolvefem::bdf {

Rational::Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
  if (den == 0) throw InputError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

Rational operator+(Rational a, Rational b) {
  return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
}

Rational operator*(Rational a, Rational b) { return Rational(a.num * b.num, a.den * b.den); }

namespace {

std::int64_t binomial(int n, int k) {
  std::int64_t c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

void check_order(int p, int max_order) {
  if (p < 1 || p > max_order)
    throw ConfigError("BDF order " + std::to_string(p) + " outside 1.." + std::to_string(max_order));
}

std::vector<double> to_doubles(const std::vector<Rational>& r) {
  std::vector<double> out;
  out.reserve(r.size());
  for (const auto& q : r) out.push_back(q.to_double());
  return out;
}

}  // namespace

std::vector<Rational> delta_rational(int p) {
  if (p < 1) throw ConfigError("BDF order must be >= 1");
  std::vector<Rational> d(p + 1);
  for (int l = 1; l <= p; ++l) {
    // (1/l)(1 - zeta)^l = (1/l) sum_j C(l,j) (-1)^j zeta^j
    for (int j = 0; j <= l; ++j) {
      const std::int64_t sign = (j % 2 == 0) ? 1 : -1;
      d[j] = d[j] + Rational(sign * binomial(l, j), l);
    }
  }
  return d;
}

std::vector<Rational> gamma_rational(int p) {
  if (p < 1) throw ConfigError("BDF order must be >= 1");
  // 1 - (1 - zeta)^p = -sum_{j>=1} C(p,j)(-1)^j zeta^j, divided by zeta
  std::vector<Rational> g(p);
  for (int j = 1; j <= p; ++j) g[j - 1] = Rational((j % 2 == 1 ? 1 : -1) * binomial(p, j));
  return g;
}

std::vector<double> delta_coefficients(int p) {
  check_order(p, 6);
  return to_doubles(delta_rational(p));
}

std::vector<double> gamma_coefficients(int p) {
  check_order(p, 6);
  return to_doubles(gamma_rational(p));
}

std::optional<double> nevanlinna_odeh_eta(int p) {
  static constexpr double table[] = {0.0, 0.0, 0.0836, 0.2878, 0.8160};
  if (p >= 1 && p <= 5) return table[p - 1];
  return std::nullopt;
}

BdfScheme BdfScheme::make(int p) {
  BdfScheme s;
  s.order = p;
  s.delta = delta_coefficients(p);
  s.gamma = gamma_coefficients(p);
  s.eta = nevanlinna_odeh_eta(p);
  return s;
}

std::vector<std::complex<double>> delta_roots(int p) {
  const std::vector<double> d = to_doubles(delta_rational(p));
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < p; ++i) companion(i, p - 1) = -d[i] / d[p];
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const auto ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

bool zero_stability_check(int p) {
  constexpr double tol = 1e-9;
  int unit_roots = 0;
  for (const auto& z : delta_roots(p)) {
    if (std::abs(z - 1.0) <= tol) {
      ++unit_roots;
    } else if (!(std::abs(z) > 1.0 + tol)) {
      return false;
    }
  }
  return unit_roots == 1;
}

namespace {

std::complex<double> delta_at(const std::vector<double>& d, std::complex<double> z) {
  std::complex<double> s = 0.0;
  for (auto it = d.rbegin(); it != d.rend(); ++it) s = s * z + *it;
  return s;
}

}  // namespace

double multiplier_min_real_part(int p, double eta) {
  const std::vector<double> d = to_doubles(delta_rational(p));
  constexpr int kRadii = 100;
  constexpr int kAngles = 720;
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kRadii; ++i) {
    const double r = 0.01 + (0.999 - 0.01) * i / (kRadii - 1);
    for (int k = 0; k < kAngles; ++k) {
      const std::complex<double> z = std::polar(r, 2.0 * std::numbers::pi * k / kAngles);
      worst = std::min(worst, std::real(delta_at(d, z) / (1.0 - eta * z)));
    }
  }
  return worst;
}

bool multiplier_check(int p, double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) throw InputError("multiplier eta must lie in [0, 1)");
  return multiplier_min_real_part(p, eta) > 0.0;
}

namespace {

// Quadratic-form data in the oldest-first ordering W = (w_0, ..., w_p).
struct FormData {
  int p;
  Eigen::VectorXd dv;  // coefficient of w_i in sum delta_j w_{p-j}
  Eigen::VectorXd mv;  // same for mu(zeta) = 1 - eta zeta
  Eigen::VectorXd corr;  // symmetrized cross-correlation c_0..c_p
};

FormData make_form(int p, double eta) {
  const std::vector<double> d = to_doubles(delta_rational(p));
  FormData f{p, Eigen::VectorXd::Zero(p + 1), Eigen::VectorXd::Zero(p + 1),
             Eigen::VectorXd::Zero(p + 1)};
  for (int i = 0; i <= p; ++i) f.dv[i] = d[p - i];
  f.mv[p] = 1.0;
  f.mv[p - 1] += -eta;
  for (int k = 0; k <= p; ++k) {
    double s = 0.0;
    for (int i = 0; i + k <= p; ++i) s += f.dv[i] * f.mv[i + k] + f.mv[i] * f.dv[i + k];
    f.corr[k] = 0.5 * s;
  }
  return f;
}

Eigen::VectorXd autocorrelation(const Eigen::VectorXd& a) {
  const int p = static_cast<int>(a.size()) - 1;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(p + 1);
  for (int k = 0; k <= p; ++k)
    for (int i = 0; i + k <= p; ++i) c[k] += a[i] * a[i + k];
  return c;
}

// Gauss-Newton on sum_i a_i a_{i+k} = c_k.
Eigen::VectorXd polish_factor(Eigen::VectorXd a, const Eigen::VectorXd& c) {
  const int p = static_cast<int>(a.size()) - 1;
  for (int it = 0; it < 50; ++it) {
    const Eigen::VectorXd res = autocorrelation(a) - c;
    if (res.norm() <= 1e-15 * c.norm()) break;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(p + 1, p + 1);
    for (int k = 0; k <= p; ++k)
      for (int m = 0; m <= p; ++m) {
        if (m - k >= 0) jac(k, m) += a[m - k];
        if (m + k <= p) jac(k, m) += a[m + k];
      }
    a -= jac.completeOrthogonalDecomposition().solve(res);
  }
  return a;
}

// Solves Sym(dv mv^T) - a a^T = E_new(G) - E_old(G) for symmetric G in least squares.
Eigen::MatrixXd solve_g(const FormData& f, const Eigen::VectorXd& a, double& residual) {
  const int p = f.p;
  const int dim = p + 1;
  const Eigen::MatrixXd target =
      0.5 * (f.dv * f.mv.transpose() + f.mv * f.dv.transpose()) - a * a.transpose();
  std::vector<std::pair<int, int>> unknowns;
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) unknowns.emplace_back(i, j);
  const int neq = dim * (dim + 1) / 2;
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(neq, static_cast<int>(unknowns.size()));
  Eigen::VectorXd rhs(neq);
  int row = 0;
  for (int r = 0; r < dim; ++r)
    for (int s = r; s < dim; ++s, ++row) {
      rhs[row] = target(r, s);
      for (std::size_t u = 0; u < unknowns.size(); ++u) {
        const auto [i, j] = unknowns[u];
        // E_new places G at indices +1, E_old at +0
        auto hit = [&](int off) { return (r == i + off && s == j + off) || (r == j + off && s == i + off); };
        if (hit(1)) lhs(row, u) += 1.0;
        if (hit(0)) lhs(row, u) -= 1.0;
      }
    }
  const Eigen::VectorXd sol = lhs.colPivHouseholderQr().solve(rhs);
  residual = (lhs * sol - rhs).norm() / std::max(1.0, rhs.norm());
  Eigen::MatrixXd g(p, p);
  for (std::size_t u = 0; u < unknowns.size(); ++u) {
    const auto [i, j] = unknowns[u];
    g(i, j) = g(j, i) = sol[u];
  }
  return g;
}

// Divides a real polynomial (coefficients lowest first) by (z - 1).
std::vector<double> deflate_at_one(const std::vector<double>& c) {
  const int deg = static_cast<int>(c.size()) - 1;
  std::vector<double> q(deg);
  double carry = 0.0;
  for (int k = deg; k >= 1; --k) {
    carry = c[k] + carry;
    q[k - 1] = carry;
  }
  return q;
}

std::vector<Eigen::VectorXd> factor_candidates(const FormData& f) {
  const int p = f.p;
  // z^p C(z) has coefficients c_{|m-p|}, m = 0..2p; roots come in pairs (rho, 1/rho).
  // Roots at z = 1 have even multiplicity and are removed first: clustered roots from a
  // companion matrix are too inaccurate to pair reliably.
  std::vector<double> poly_c(2 * p + 1);
  for (int m = 0; m <= 2 * p; ++m) poly_c[m] = f.corr[std::abs(m - p)];
  int ones = 0;
  while (static_cast<int>(poly_c.size()) > 2) {
    double at_one = 0.0, scale = 0.0;
    for (double v : poly_c) {
      at_one += v;
      scale += std::abs(v);
    }
    if (std::abs(at_one) > 1e-10 * scale) break;
    poly_c = deflate_at_one(deflate_at_one(poly_c));
    ++ones;
  }
  const int deg = static_cast<int>(poly_c.size()) - 1;
  std::vector<std::complex<double>> roots;
  if (deg > 0) {
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
    for (int m = 0; m < deg; ++m) companion(m, deg - 1) = -poly_c[m] / poly_c[deg];
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    roots.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + deg);
  }

  std::vector<std::array<std::complex<double>, 2>> pairs;
  std::vector<char> used(deg, 0);
  std::vector<int> order(deg);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return std::abs(roots[x]) > std::abs(roots[y]); });
  for (int idx : order) {
    if (used[idx]) continue;
    used[idx] = 1;
    const std::complex<double> partner = 1.0 / roots[idx];
    int best = -1;
    for (int j = 0; j < deg; ++j)
      if (!used[j] && (best < 0 || std::abs(roots[j] - partner) < std::abs(roots[best] - partner)))
        best = j;
    used[best] = 1;
    pairs.push_back({roots[idx], roots[best]});
  }

  std::vector<Eigen::VectorXd> out;
  const int free_pairs = static_cast<int>(pairs.size());
  for (int mask = 0; mask < (1 << free_pairs); ++mask) {
    std::vector<std::complex<double>> poly{1.0};
    for (int i = 0; i < ones; ++i) {
      std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
      for (std::size_t k = 0; k < poly.size(); ++k) {
        next[k + 1] += poly[k];
        next[k] -= poly[k];
      }
      poly = std::move(next);
    }
    for (int i = 0; i < free_pairs; ++i) {
      const std::complex<double> rho = pairs[i][(mask >> i) & 1];
      std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
      for (std::size_t k = 0; k < poly.size(); ++k) {
        next[k + 1] += poly[k];
        next[k] -= rho * poly[k];
      }
      poly = std::move(next);
    }
    Eigen::VectorXd a(p + 1);
    double imag = 0.0, scale = 0.0;
    for (int k = 0; k <= p; ++k) {
      a[k] = poly[k].real();
      imag = std::max(imag, std::abs(poly[k].imag()));
      scale = std::max(scale, std::abs(poly[k]));
    }
    if (imag > 1e-3 * scale) continue;  // selection not closed under conjugation
    const double norm2 = a.squaredNorm();
    if (!(f.corr[0] > 0.0) || norm2 == 0.0) continue;
    a *= std::sqrt(f.corr[0] / norm2);
    out.push_back(polish_factor(a, f.corr));
    out.push_back(-out.back());
  }
  return out;
}

}  // namespace

GMatrixResult g_matrix_search(int p, double eta, int trials, unsigned seed) {
  if (p < 1) throw ConfigError("BDF order must be >= 1");
  const FormData f = make_form(p, eta);
  GMatrixResult result;
  result.trials = trials;

  for (const Eigen::VectorXd& a : factor_candidates(f)) {
    const Eigen::VectorXd corr_err = autocorrelation(a) - f.corr;
    if (corr_err.norm() > 1e-9 * std::max(1.0, f.corr.norm())) continue;
    double residual = 0.0;
    const Eigen::MatrixXd g = solve_g(f, a, residual);
    if (residual > 1e-9) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) continue;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    Eigen::VectorXd w(p + 1);
    for (int t = 0; t < trials; ++t) {
      for (int i = 0; i <= p; ++i) w[i] = normal(rng);
      const double lhs = f.dv.dot(w) * f.mv.dot(w);
      const double newer = w.tail(p).dot(g * w.tail(p));
      const double older = w.head(p).dot(g * w.head(p));
      worst = std::min(worst, (lhs - (newer - older)) / w.squaredNorm());
    }
    if (worst >= -1e-10) {
      result.found = true;
      result.g = g;
      result.worst_violation = worst;
      return result;
    }
    result.worst_violation = std::min(result.worst_violation, worst);
  }
  return result;
}

bool g_matrix_exists_check(int p, double eta) { return g_matrix_search(p, eta).found; }

}  // namespace evolvefem::bdf
