#ifndef LOOPSOL_MATRIX_HPP
#define LOOPSOL_MATRIX_HPP

#include <Eigen/Dense>
#include <complex>
#include <random>

namespace loopsol {

using Cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline Mat comm(const Mat& a, const Mat& b) { return a * b - b * a; }

inline double fnorm(const Mat& m) { return m.norm(); }

/// Real vectorization [Re; Im], column-major. Complex m x m matrices are
/// treated as a real vector space of dimension 2 m^2 throughout.
RVec vec_real(const Mat& m);
Mat unvec_real(const RVec& v, int rows, int cols);

/// Frobenius inner product Re tr(X Y^*).
inline double frobenius_ip(const Mat& x, const Mat& y) {
  return (x.array() * y.array().conjugate()).sum().real();
}

Mat matexp(const Mat& m);

/// Random matrix with i.i.d. entries uniform in the complex unit square.
Mat random_mat(int rows, int cols, std::mt19937_64& rng);

/// Random real linear combination of the given generators, coefficients in [-1,1].
Mat random_span(const std::vector<Mat>& gens, std::mt19937_64& rng);

/// Elementary matrix with a single unit entry.
Mat unit_entry(int n, int i, int j, Cplx v = 1.0);

}  // namespace loopsol

#endif
