#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace evolvefem {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vector = Eigen::VectorXd;

/// Bad user input or unsupported configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data passed to an operation violates its precondition (e.g. a point off the surface).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear solver failed to reach its tolerance (CLI exit code 3).
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// A curved element collapsed: det(J^T J) fell below the degeneracy threshold.
class DegenerateElementError : public std::runtime_error {
 public:
  DegenerateElementError(const std::string& what, int element)
      : std::runtime_error(what), element_(element) {}
  int element() const { return element_; }

 private:
  int element_;
};

/// Newton projection of a node onto a level set did not converge.
class ProjectionError : public std::runtime_error {
 public:
  ProjectionError(const std::string& what, int node) : std::runtime_error(what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

/// File could not be read or written (CLI exit code 4).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant (e.g. a negative squared norm from a bad assembly).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Real-valued forcing g(x, t) evaluated at surface points.
using PointForcing = std::function<double(const Vec3& x, double t)>;

/// Real-valued forcing f(u, grad u, x, t) evaluated at surface quadrature points.
using FieldForcing = std::function<double(double u, const Vec3& grad_u, const Vec3& x, double t)>;

}  // namespace evolvefem
