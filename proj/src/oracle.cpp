#include "loopsol/oracle.hpp"

#include "loopsol/errors.hpp"

namespace loopsol {

namespace {

/// Coefficient space of the family's big loop algebra at a given degree.
Subspace level_space(const Splitting& s, int degree) {
  switch (s.family) {
    case Family::Standard:
      return s.cartan.ambient;
    case Family::U:
    case Family::TwistedU:
      return s.cartan.ambient;
    case Family::UK:
      return (degree % 2 == 0) ? *s.K : *s.P;
    case Family::TwistedUK:
      return (((degree % 2) + 2) % 2 == 0) ? s.nested->K1 : s.nested->P1;
  }
  return s.cartan.ambient;
}

}  // namespace

BandSplitOracle::BandSplitOracle(const Splitting& s, int lo, int hi)
    : s_(&s), lo_(lo), hi_(hi) {
  const int m = s.alg->size;
  const int vdim = 2 * m * m;
  const int ndeg = hi - lo + 1;
  const int D = ndeg * vdim;

  // full space: per-degree level-space basis
  std::vector<RVec> full_cols;
  for (int d = lo; d <= hi; ++d) {
    Subspace lvl = level_space(s, d);
    for (const Mat& b : lvl.basis()) {
      LoopElement e = LoopElement::monomial(s.alg, d, b);
      full_cols.push_back(vectorize(e));
      basis_full_.push_back(std::move(e));
    }
  }

  auto nullspace_basis = [&](const std::vector<LoopElement>& ambient,
                             const std::function<RVec(const LoopElement&)>&
                                 constraint) {
    if (ambient.empty()) return std::vector<LoopElement>{};
    const int na = static_cast<int>(ambient.size());
    RVec c0 = constraint(ambient[0]);
    RMat C(c0.size(), na);
    C.col(0) = c0;
    for (int k = 1; k < na; ++k) C.col(k) = constraint(ambient[k]);
    Eigen::JacobiSVD<RMat> svd(C, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cut = (sv.size() ? sv(0) : 0.0) * 1e-10 + 1e-12;
    std::vector<LoopElement> out;
    for (int k = 0; k < svd.matrixV().cols(); ++k) {
      if (k < sv.size() && sv(k) > cut) continue;
      LoopElement e = LoopElement::zero(s.alg);
      for (int a = 0; a < na; ++a) {
        LoopElement t = ambient[a];
        t *= Cplx(svd.matrixV()(a, k), 0.0);
        e += t;
      }
      e.trim(1e-14);
      out.push_back(std::move(e));
    }
    return out;
  };

  if (!s.twisted()) {
    for (const LoopElement& e : basis_full_) {
      if (e.empty()) continue;
      if (e.lo() >= 0)
        basis_plus_.push_back(e);
      else
        basis_minus_.push_back(e);
    }
  } else {
    const InvolutionSpec& mir = *s.mirror();
    // L+: mirror-fixed inside the band
    basis_plus_ = nullspace_basis(basis_full_, [&](const LoopElement& e) {
      LoopElement r = loop_apply(mir, e) - e;
      RVec v = vectorize(r);
      if (s.family == Family::TwistedUK) {
        Mat at1 = Mat::Zero(m, m);
        for (const auto& [d, c] : e.coeffs()) at1 += c;
        Mat defect = at1 - s.nested->K2p.project(at1);
        RVec w(v.size() + 2 * m * m);
        w.head(v.size()) = v;
        w.tail(2 * m * m) = vec_real(defect);
        return w;
      }
      return v;
    });
    // L-: non-positive degrees with the boundary-value membership at 0
    std::vector<LoopElement> lower;
    for (const LoopElement& e : basis_full_)
      if (!e.empty() && e.hi() <= 0) lower.push_back(e);
    basis_minus_ = nullspace_basis(lower, [&](const LoopElement& e) {
      Mat c0 = e.coeff(0);
      Mat defect;
      if (s.family == Family::TwistedU)
        defect = c0 - s.B->project(c0);
      else
        defect = c0 - s.nested->K1p.project(c0);
      return vec_real(defect);
    });
  }

  if (dim_plus() + dim_minus() != dim_full())
    throw ConfigError("band oracle: L+ and L- dimensions do not sum to dim L (" +
                      std::to_string(dim_plus()) + "+" +
                      std::to_string(dim_minus()) + " vs " +
                      std::to_string(dim_full()) + ")");

  stacked_ = RMat(D, dim_full());
  int col = 0;
  for (const LoopElement& e : basis_plus_) stacked_.col(col++) = vectorize(e);
  for (const LoopElement& e : basis_minus_) stacked_.col(col++) = vectorize(e);
  qr_ = Eigen::ColPivHouseholderQR<RMat>(stacked_);
}

RVec BandSplitOracle::vectorize(const LoopElement& xi) const {
  const int m = s_->alg->size;
  const int vdim = 2 * m * m;
  RVec v = RVec::Zero((hi_ - lo_ + 1) * vdim);
  for (const auto& [d, c] : xi.coeffs()) {
    if (d < lo_ || d > hi_)
      throw DomainError("band oracle: element leaves the configured band");
    v.segment((d - lo_) * vdim, vdim) = vec_real(c);
  }
  return v;
}

LoopElement BandSplitOracle::devectorize(const RVec& v) const {
  const int m = s_->alg->size;
  const int vdim = 2 * m * m;
  LoopElement e = LoopElement::zero(s_->alg);
  for (int d = lo_; d <= hi_; ++d) {
    Mat c = unvec_real(v.segment((d - lo_) * vdim, vdim), m, m);
    if (c.norm() > 1e-14) e.set_coeff(d, c);
  }
  return e;
}

LoopElement BandSplitOracle::from_basis(const std::vector<LoopElement>& basis,
                                        const RVec& coef) const {
  LoopElement e = LoopElement::zero(s_->alg);
  for (size_t k = 0; k < basis.size(); ++k) {
    LoopElement t = basis[k];
    t *= Cplx(coef(static_cast<int>(k)), 0.0);
    e += t;
  }
  e.trim(1e-16);
  return e;
}

std::pair<LoopElement, LoopElement> BandSplitOracle::decompose(
    const LoopElement& xi) const {
  RVec c = qr_.solve(vectorize(xi));
  LoopElement plus = from_basis(basis_plus_, c.head(dim_plus()));
  LoopElement minus =
      from_basis(basis_minus_, c.segment(dim_plus(), dim_minus()));
  return {plus, minus};
}

LoopElement BandSplitOracle::random_member(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  LoopElement e = LoopElement::zero(s_->alg);
  for (const LoopElement& b : basis_full_) {
    LoopElement t = b;
    t *= Cplx(dist(rng), 0.0);
    e += t;
  }
  e.trim(1e-16);
  return e;
}

LoopElement BandSplitOracle::random_plus(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  LoopElement e = LoopElement::zero(s_->alg);
  for (const LoopElement& b : basis_plus_) {
    LoopElement t = b;
    t *= Cplx(dist(rng), 0.0);
    e += t;
  }
  e.trim(1e-16);
  return e;
}

LoopElement BandSplitOracle::random_minus(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  LoopElement e = LoopElement::zero(s_->alg);
  for (const LoopElement& b : basis_minus_) {
    LoopElement t = b;
    t *= Cplx(dist(rng), 0.0);
    e += t;
  }
  e.trim(1e-16);
  return e;
}

}  // namespace loopsol
