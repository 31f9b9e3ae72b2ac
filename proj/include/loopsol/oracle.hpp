#ifndef LOOPSOL_ORACLE_HPP
#define LOOPSOL_ORACLE_HPP

#include "loopsol/loop.hpp"

namespace loopsol {

/// Independent dense route to the splitting projections: orthonormal bases of
/// L+ and L- restricted to a finite band, built from the defining linear
/// conditions by null-space computation, and a least-squares decomposition
/// against them. Shares no code with Splitting::project_split.
class BandSplitOracle {
 public:
  BandSplitOracle(const Splitting& s, int lo, int hi);

  /// Decompose xi by the dense solve; returns (plus, minus).
  std::pair<LoopElement, LoopElement> decompose(const LoopElement& xi) const;

  /// Random element of the band-restricted loop algebra L.
  LoopElement random_member(std::mt19937_64& rng) const;
  /// Random element of the band-restricted L+ / L-.
  LoopElement random_plus(std::mt19937_64& rng) const;
  LoopElement random_minus(std::mt19937_64& rng) const;

  int dim_full() const { return static_cast<int>(basis_full_.size()); }
  int dim_plus() const { return static_cast<int>(basis_plus_.size()); }
  int dim_minus() const { return static_cast<int>(basis_minus_.size()); }

 private:
  RVec vectorize(const LoopElement& xi) const;
  LoopElement devectorize(const RVec& v) const;
  LoopElement from_basis(const std::vector<LoopElement>& basis,
                         const RVec& coef) const;

  const Splitting* s_;
  int lo_, hi_;
  std::vector<LoopElement> basis_full_, basis_plus_, basis_minus_;
  RMat stacked_;  // [B+ B-] as real vectors
  Eigen::ColPivHouseholderQR<RMat> qr_;
};

}  // namespace loopsol

#endif
