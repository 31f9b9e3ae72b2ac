#ifndef LOOPSOL_SUBSPACE_HPP
#define LOOPSOL_SUBSPACE_HPP

#include <vector>

#include "loopsol/matrix.hpp"

namespace loopsol {

/// A real-linear subspace of complex m1 x m2 matrices, stored as an
/// orthonormal basis with respect to Re tr(X Y^*). Membership is always the
/// residual test ||X - proj(X)||.
class Subspace {
 public:
  Subspace() = default;

  /// Orthonormalize a spanning set (SVD, singular values below tol dropped).
  static Subspace span(const std::vector<Mat>& gens, double tol = 1e-10);

  /// Intersection of two subspaces of the same matrix shape.
  static Subspace intersect(const Subspace& a, const Subspace& b,
                            double tol = 1e-8);

  int dim() const { return static_cast<int>(basis_.size()); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::vector<Mat>& basis() const { return basis_; }

  Mat project(const Mat& x) const;
  double residual(const Mat& x) const;
  bool contains(const Mat& x, double tol = 1e-10) const {
    return residual(x) < tol;
  }

  /// Coordinates of proj(x) in the orthonormal basis.
  RVec coords(const Mat& x) const;
  Mat from_coords(const RVec& c) const;

  /// Orthogonal complement of this subspace inside `ambient`.
  Subspace complement_within(const Subspace& ambient, double tol = 1e-10) const;

  /// Concatenated span (no orthogonality requirement between the summands).
  Subspace sum_with(const Subspace& other) const;

  const RMat& basis_matrix() const { return bmat_; }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<Mat> basis_;
  RMat bmat_;  // (2 rows cols) x dim, orthonormal columns
};

/// Pseudo-inverse of ad(a) = [a, .] restricted to a domain subspace.
/// kernel() is the centralizer of `a` inside the domain.
class AdInverse {
 public:
  AdInverse() = default;
  AdInverse(const Mat& a, const Subspace& domain, double rank_tol = 1e-9);

  /// Minimum-norm x in domain with [a, x] ~ y. `consistency` (optional out)
  /// receives ||[a,x] - y||.
  Mat apply(const Mat& y, double* consistency = nullptr) const;

  const Subspace& kernel() const { return kernel_; }
  const Subspace& domain() const { return domain_; }
  int rank() const { return rank_; }

 private:
  Subspace domain_;
  Subspace kernel_;
  int rank_ = 0;
  Eigen::JacobiSVD<RMat> svd_;
  Mat a_;
};

}  // namespace loopsol

#endif
