#ifndef LOOPSOL_FACTORIZATION_HPP
#define LOOPSOL_FACTORIZATION_HPP

#include <cstdint>
#include <functional>

#include "loopsol/hierarchy.hpp"

namespace loopsol {

/// Rational map lambda -> value_at_inf + sum_p R_p / (lambda - p) into the
/// loop group, with minimal-rank residues and symmetry-closed pole sets.
struct RationalLoop {
  AlgebraPtr alg;
  std::vector<Cplx> poles;
  std::vector<Mat> residues;
  Mat value_at_inf;
  std::vector<std::string> symmetry_tags;

  Mat eval(Cplx lambda) const;
  Mat eval_inverse(Cplx lambda) const;
  /// Expansion in non-positive powers of lambda down to -depth (valid as a
  /// formal minus-loop band).
  LoopElement to_band(int depth) const;

  std::string to_json() const;
  static RationalLoop from_json(const std::string& text, AlgebraPtr alg);
};

/// Group reality/twist residual of a rational loop at the given samples.
double rational_symmetry_residual(const Splitting& s, const RationalLoop& f,
                                  const std::vector<Cplx>& samples);

/// One-pole simple element for the unitary reality condition:
/// f = I + (pole - conj pole)/(lambda - pole) * proj(direction).
/// Twisted o(n,n) family: pole orbit {p, -p, 1/p, -1/p} with residues solved
/// for the group and symmetry conditions (seeded by `seed`).
RationalLoop simple_element(const Splitting& s, Cplx pole, const CVec& direction,
                            uint64_t seed = 7);

/// True when the pole set consists of a single symmetry orbit.
bool is_simple_probe(const Splitting& s, const RationalLoop& f);

/// Attempt to recover a left factor of a two-orbit product (unitary family);
/// returns the factors when f splits, empty otherwise.
std::optional<std::pair<RationalLoop, RationalLoop>> try_split_product(
    const Splitting& s, const RationalLoop& f);

struct FactorizeOptions {
  int depth = 12;        // minus-band depth
  int depth_cap = 32;
  double tol = 1e-8;     // reconstruction target
  bool escalate = true;  // grow depth until the residual stalls below tol
  /// Twisted families factor on the circle |lambda| = scale so that pole
  /// orbits {p, 1/p} sit inside it; bands are held in mu = lambda/scale
  /// coordinates. 0 picks the scale from the input automatically.
  double twist_scale = 0.0;
  bool input_scaled = false;  // twisted G already given in mu coordinates
};

struct NodeFactorization {
  LoopElement plus;   // twisted factors are reported in mu coordinates
  LoopElement minus;
  double residual = 0.0;
  int depth = 0;
  double scale = 1.0;
  bool ok = false;
};

/// Coefficient rescaling c_k -> c_k rho^k (lambda = rho mu substitution).
LoopElement scale_band(const LoopElement& x, double rho);

/// Birkhoff factorization of a single band G ~ plus * minus for the family's
/// splitting, by imposing the product identity degree by degree on the
/// truncated Laurent system.
NodeFactorization birkhoff_factorize_node(const Splitting& s,
                                          const LoopElement& G,
                                          FactorizeOptions opt = {});

struct FactorizationResult {
  GridField<LoopElement> plus;
  GridField<LoopElement> minus;
  GridField<uint8_t> ok;
  double max_residual = 0.0;
  int depth_used = 0;
  int failures = 0;
};

FactorizationResult birkhoff_factorize(const Splitting& s,
                                       const GridField<LoopElement>& G,
                                       FactorizeOptions opt = {});

/// Re-solves with a perturbed deeper system and reports the factor deviation
/// (local uniqueness probe).
double factorization_uniqueness_probe(const Splitting& s, const LoopElement& G,
                                      FactorizeOptions opt = {});

/// Node-indexed frame evaluator: value(i, j, lambda).
struct FrameView {
  std::vector<Axis> axes;
  std::function<Mat(int, int, Cplx)> eval;
};

FrameView vacuum_frame_view(const HierarchyInstance& h, int i, int j,
                            std::vector<Axis> axes);

struct InverseScattering {
  std::vector<LoopField> components;  // pi_+(M J_{1,i} M^{-1}) per coordinate
  GridField<LoopElement> E_band;
  GridField<LoopElement> M_band;
  GridField<uint8_t> ok;
  double max_residual = 0.0;
  int failures = 0;
};

/// Local solution P_f from f by factorizing f V(x) = E(x) M(x); V is the
/// vacuum frame of the degree (i, j) flow (untwisted) or of the first order
/// system (twisted, one coordinate per Cartan direction).
InverseScattering formal_inverse_scattering(const HierarchyInstance& h,
                                            const RationalLoop& f,
                                            const std::vector<Axis>& axes,
                                            int flow_i = 1, int flow_j = 2,
                                            FactorizeOptions opt = {});

struct SU2Dressing {
  RationalLoop f;
  GridField<Mat> pitilde;   // dressed Hermitian projections
  LoopField Ptilde;         // a1 lambda + utilde per node
  FrameView Etilde;
  double pointwise_residual = 0.0;  // || f E - Etilde ftilde || at samples
};

/// Closed-form dressing of a frame by a one-pole simple element (unitary
/// rank-one family): pitilde = proj(E(conj pole)^{-1} im pi),
/// utilde = u + (pole - conj pole)[pitilde, a1].
SU2Dressing dress_su2(const HierarchyInstance& h, const RationalLoop& f,
                      const FrameView& E, const LoopField& base_P);

/// The dressed simple element at a node.
RationalLoop dressed_simple_element(const SU2Dressing& d, int i, int j);

}  // namespace loopsol

#endif
