#include "loopsol/subspace.hpp"

#include "loopsol/errors.hpp"

namespace loopsol {

Subspace Subspace::span(const std::vector<Mat>& gens, double tol) {
  Subspace s;
  if (gens.empty()) return s;
  s.rows_ = static_cast<int>(gens.front().rows());
  s.cols_ = static_cast<int>(gens.front().cols());
  const int vdim = 2 * s.rows_ * s.cols_;
  RMat g(vdim, static_cast<int>(gens.size()));
  for (size_t k = 0; k < gens.size(); ++k) {
    if (gens[k].rows() != s.rows_ || gens[k].cols() != s.cols_)
      throw StructuralError("Subspace::span: generator shape mismatch");
    g.col(static_cast<int>(k)) = vec_real(gens[k]);
  }
  Eigen::JacobiSVD<RMat> svd(g, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cut = (sv.size() ? sv(0) : 0.0) * tol;
  int d = 0;
  while (d < sv.size() && sv(d) > cut && sv(d) > tol) ++d;
  s.bmat_ = svd.matrixU().leftCols(d);
  s.basis_.reserve(d);
  for (int k = 0; k < d; ++k)
    s.basis_.push_back(unvec_real(s.bmat_.col(k), s.rows_, s.cols_));
  return s;
}

Subspace Subspace::intersect(const Subspace& a, const Subspace& b, double tol) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
    throw StructuralError("Subspace::intersect: shape mismatch");
  if (a.dim() == 0 || b.dim() == 0) return Subspace();
  const int vdim = 2 * a.rows_ * a.cols_;
  // x in both spans  <=>  (I - Pa) x = 0 and (I - Pb) x = 0.
  RMat stack(2 * vdim, vdim);
  RMat pa = a.bmat_ * a.bmat_.transpose();
  RMat pb = b.bmat_ * b.bmat_.transpose();
  stack.topRows(vdim) = RMat::Identity(vdim, vdim) - pa;
  stack.bottomRows(vdim) = RMat::Identity(vdim, vdim) - pb;
  Eigen::JacobiSVD<RMat> svd(stack, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  std::vector<Mat> gens;
  for (int k = 0; k < sv.size(); ++k)
    if (sv(k) < tol)
      gens.push_back(unvec_real(svd.matrixV().col(k), a.rows_, a.cols_));
  // also catch trailing null directions not covered by singular values
  for (int k = sv.size(); k < svd.matrixV().cols(); ++k)
    gens.push_back(unvec_real(svd.matrixV().col(k), a.rows_, a.cols_));
  if (gens.empty()) {
    Subspace s;
    s.rows_ = a.rows_;
    s.cols_ = a.cols_;
    return s;
  }
  return span(gens);
}

Mat Subspace::project(const Mat& x) const {
  if (dim() == 0) return Mat::Zero(x.rows(), x.cols());
  RVec c = bmat_.transpose() * vec_real(x);
  return unvec_real(bmat_ * c, rows_, cols_);
}

double Subspace::residual(const Mat& x) const { return (x - project(x)).norm(); }

RVec Subspace::coords(const Mat& x) const {
  if (dim() == 0) return RVec();
  return bmat_.transpose() * vec_real(x);
}

Mat Subspace::from_coords(const RVec& c) const {
  if (dim() == 0) return Mat::Zero(rows_, cols_);
  return unvec_real(bmat_ * c, rows_, cols_);
}

Subspace Subspace::complement_within(const Subspace& ambient, double tol) const {
  std::vector<Mat> gens;
  for (const Mat& g : ambient.basis()) {
    Mat r = g - project(g);
    if (r.norm() > tol) gens.push_back(r);
  }
  if (gens.empty()) {
    Subspace s;
    s.rows_ = ambient.rows_;
    s.cols_ = ambient.cols_;
    return s;
  }
  return span(gens);
}

Subspace Subspace::sum_with(const Subspace& other) const {
  std::vector<Mat> gens = basis_;
  gens.insert(gens.end(), other.basis_.begin(), other.basis_.end());
  return span(gens);
}

AdInverse::AdInverse(const Mat& a, const Subspace& domain, double rank_tol)
    : domain_(domain), a_(a) {
  const int d = domain.dim();
  const int vdim = 2 * static_cast<int>(a.rows() * a.cols());
  RMat m(vdim, d);
  for (int k = 0; k < d; ++k)
    m.col(k) = vec_real(comm(a, domain.basis()[k]));
  svd_ = Eigen::JacobiSVD<RMat>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd_.singularValues();
  const double cut = (sv.size() ? sv(0) : 0.0) * rank_tol;
  rank_ = 0;
  std::vector<Mat> ker;
  for (int k = 0; k < sv.size(); ++k) {
    if (sv(k) > cut)
      ++rank_;
    else
      ker.push_back(domain.from_coords(svd_.matrixV().col(k)));
  }
  for (int k = sv.size(); k < d; ++k)
    ker.push_back(domain.from_coords(svd_.matrixV().col(k)));
  kernel_ = ker.empty() ? Subspace() : Subspace::span(ker);
  svd_.setThreshold(rank_tol);
}

Mat AdInverse::apply(const Mat& y, double* consistency) const {
  RVec c = svd_.solve(vec_real(y));
  Mat x = domain_.from_coords(c);
  if (consistency) *consistency = (comm(a_, x) - y).norm();
  return x;
}

}  // namespace loopsol
