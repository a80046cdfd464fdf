#include "evolvefem/mesh.hpp"

#include <string>

namespace evolvefem::mesh {

ReferenceElement::ReferenceElement(int degree) : degree_(degree) {
  nodes_ = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  if (degree == 2) {
    nodes_.push_back(Vec2(0.5, 0.0));
    nodes_.push_back(Vec2(0.5, 0.5));
    nodes_.push_back(Vec2(0.0, 0.5));
  }
}

const ReferenceElement& ReferenceElement::get(int degree) {
  static const ReferenceElement linear(1);
  static const ReferenceElement quadratic(2);
  switch (degree) {
    case 1:
      return linear;
    case 2:
      return quadratic;
    default:
      throw ConfigError("unsupported element degree " + std::to_string(degree) +
                        " (supported: 1, 2)");
  }
}

BasisEval ReferenceElement::evaluate(const Vec2& xi) const {
  BasisEval b;
  const double s = xi.x();
  const double t = xi.y();
  const double l0 = 1.0 - s - t;
  const Vec2 g0(-1.0, -1.0), g1(1.0, 0.0), g2(0.0, 1.0);

  if (degree_ == 1) {
    b.count = 3;
    b.values = {l0, s, t};
    b.gradients[0] = g0;
    b.gradients[1] = g1;
    b.gradients[2] = g2;
    return b;
  }

  // Quadratic: vertices l_i(2 l_i - 1), edge (i,j) midpoints 4 l_i l_j.
  b.count = 6;
  b.values[0] = l0 * (2.0 * l0 - 1.0);
  b.values[1] = s * (2.0 * s - 1.0);
  b.values[2] = t * (2.0 * t - 1.0);
  b.values[3] = 4.0 * l0 * s;
  b.values[4] = 4.0 * s * t;
  b.values[5] = 4.0 * t * l0;
  b.gradients[0] = (4.0 * l0 - 1.0) * g0;
  b.gradients[1] = (4.0 * s - 1.0) * g1;
  b.gradients[2] = (4.0 * t - 1.0) * g2;
  b.gradients[3] = 4.0 * (s * g0 + l0 * g1);
  b.gradients[4] = 4.0 * (t * g1 + s * g2);
  b.gradients[5] = 4.0 * (l0 * g2 + t * g0);
  return b;
}

BasisEval reference_basis(int degree, const Vec2& xi) {
  return ReferenceElement::get(degree).evaluate(xi);
}

}  // namespace evolvefem::mesh
