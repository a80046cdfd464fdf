#pragma once

#include "evolvefem/common.hpp"

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace evolvefem::bdf {

/// Exact rational with int64 parts, always normalized (den > 0, gcd 1).
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1);
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend Rational operator+(Rational a, Rational b);
  friend Rational operator*(Rational a, Rational b);
  friend bool operator==(const Rational& a, const Rational& b) = default;
};

/// delta(zeta) = sum_{l=1}^p (1/l)(1 - zeta)^l, coefficients delta_0..delta_p.
std::vector<Rational> delta_rational(int p);
/// gamma(zeta) = (1 - (1 - zeta)^p) / zeta, coefficients gamma_0..gamma_{p-1}.
std::vector<Rational> gamma_rational(int p);

/// Throws ConfigError unless 1 <= p <= 6.
std::vector<double> delta_coefficients(int p);
std::vector<double> gamma_coefficients(int p);

/// Smallest Nevanlinna-Odeh multipliers for p = 1..5; empty for p = 6.
std::optional<double> nevanlinna_odeh_eta(int p);

/// Order p, delta and gamma coefficients and the multiplier eta (when one exists).
struct BdfScheme {
  int order = 0;
  std::vector<double> delta;
  std::vector<double> gamma;
  std::optional<double> eta;

  static BdfScheme make(int p);
};

/// sum_j gamma_j history[j], with history newest first. Throws InputError unless
/// history.size() == gamma.size().
template <typename T>
T extrapolate(std::span<const T> history, std::span<const double> gamma) {
  if (history.size() != gamma.size() || history.empty())
    throw InputError("extrapolate: history length must equal the BDF order");
  T out = gamma[0] * history[0];
  for (std::size_t j = 1; j < history.size(); ++j) out += gamma[j] * history[j];
  return out;
}

/// Roots of delta(zeta) for p = 1..7 from companion-matrix eigenvalues (no range check
/// beyond p >= 1, so p = 7 is available for the negative case).
std::vector<std::complex<double>> delta_roots(int p);

/// True iff delta has a simple root at 1 (within 1e-9) and every other root satisfies
/// |zeta| > 1 + 1e-9.
bool zero_stability_check(int p);

/// Minimum of Re delta(zeta) / (1 - eta zeta) over the fixed grid
/// radii 0.01..0.999 (100 values) x 720 angles.
double multiplier_min_real_part(int p, double eta);
bool multiplier_check(int p, double eta);

/// Result of the G-matrix construction for the pair (delta, mu = 1 - eta zeta).
struct GMatrixResult {
  bool found = false;        // SPD candidate G with a consistent factorization
  Eigen::MatrixXd g;         // p x p
  double worst_violation = 0.0;  // most negative normalized slack over the random trials
  int trials = 0;
};

/// Builds a candidate G via spectral factorization of Re delta(zeta) conj(mu(zeta)) on the
/// unit circle, then checks Dahlquist's telescoping inequality on `trials` random
/// sequences (w_0..w_p).
GMatrixResult g_matrix_search(int p, double eta, int trials = 100000, unsigned seed = 12345);
bool g_matrix_exists_check(int p, double eta);

}  // namespace evolvefem::bdf
