#pragma once

#include <vector>

namespace stf {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [lo, hi].
GaussRule gauss_legendre(int n, double lo = -1.0, double hi = 1.0);

}  // namespace stf
