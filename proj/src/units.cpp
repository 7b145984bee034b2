#include "stf/units.hpp"

#include "stf/errors.hpp"

namespace stf {

void Material::validate() const {
  if (!(effective_mass_ratio > 0.0)) throw InvalidArgument("effective_mass_ratio must be positive");
  if (!(dielectric_constant >= 1.0)) throw InvalidArgument("dielectric_constant must be >= 1");
}

std::array<Point, 4> Geometry::corners() const {
  const double lo = corner_inset * side_length;
  const double hi = side_length - lo;
  return {Point{lo, lo}, Point{hi, lo}, Point{hi, hi}, Point{lo, hi}};
}

void Geometry::validate() const {
  if (!(side_length > 0.0)) throw InvalidArgument("side_length must be positive");
  if (!(corner_inset > 0.0 && corner_inset < 0.5))
    throw InvalidArgument("corner_inset must lie in (0, 0.5) so corners are strictly inside the dot");
}

}  // namespace stf
