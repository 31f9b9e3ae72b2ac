#include "loopsol/stencil.hpp"

#include <cmath>

namespace loopsol {

RMat spectral_diff_matrix(int n, double h) {
  // trigonometric interpolation derivative on a uniform periodic grid
  RMat d = RMat::Zero(n, n);
  const double period = n * h;
  const double w = M_PI / period;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int k = i - j;
      const double s = (k % 2 == 0) ? 1.0 : -1.0;
      if (n % 2 == 0)
        d(i, j) = w * s / std::tan(w * h * k);
      else
        d(i, j) = w * s / std::sin(w * h * k);
    }
  return d;
}

}  // namespace loopsol
