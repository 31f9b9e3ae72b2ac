#include "loopsol/matrix.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace loopsol {

RVec vec_real(const Mat& m) {
  const int mn = static_cast<int>(m.size());
  RVec v(2 * mn);
  Eigen::Map<const Eigen::VectorXcd> flat(m.data(), mn);
  v.head(mn) = flat.real();
  v.tail(mn) = flat.imag();
  return v;
}

Mat unvec_real(const RVec& v, int rows, int cols) {
  const int mn = rows * cols;
  Mat m(rows, cols);
  Eigen::Map<Eigen::VectorXcd> flat(m.data(), mn);
  flat.real() = v.head(mn);
  flat.imag() = v.tail(mn);
  return m;
}

Mat matexp(const Mat& m) { return m.exp(); }

Mat random_mat(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = Cplx(dist(rng), dist(rng));
  return m;
}

Mat random_span(const std::vector<Mat>& gens, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Mat m = Mat::Zero(gens.front().rows(), gens.front().cols());
  for (const Mat& g : gens) m += dist(rng) * g;
  return m;
}

Mat unit_entry(int n, int i, int j, Cplx v) {
  Mat m = Mat::Zero(n, n);
  m(i, j) = v;
  return m;
}

}  // namespace loopsol
