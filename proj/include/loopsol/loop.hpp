#ifndef LOOPSOL_LOOP_HPP
#define LOOPSOL_LOOP_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loopsol/algebra.hpp"

namespace loopsol {

/// Hard cap on Laurent band width; exceeding it is a ResourceError, never a
/// silent truncation.
inline constexpr int kMaxBandWidth = 64;

/// A finite Laurent band  xi(lambda) = sum_{lo <= j <= hi} xi_j lambda^j
/// with matrix coefficients tagged by their ambient algebra.
class LoopElement {
 public:
  LoopElement() = default;
  explicit LoopElement(AlgebraPtr alg) : alg_(std::move(alg)) {}

  static LoopElement zero(AlgebraPtr alg) { return LoopElement(std::move(alg)); }
  static LoopElement monomial(AlgebraPtr alg, int degree, const Mat& coeff);

  const AlgebraPtr& algebra() const { return alg_; }
  bool empty() const { return coeffs_.empty(); }
  int lo() const;
  int hi() const;
  int width() const { return empty() ? 0 : hi() - lo() + 1; }

  Mat coeff(int degree) const;  // zero matrix outside the band
  bool has(int degree) const { return coeffs_.count(degree) > 0; }
  void set_coeff(int degree, const Mat& m);
  void add_coeff(int degree, const Mat& m);
  const std::map<int, Mat>& coeffs() const { return coeffs_; }

  /// Drop coefficients with norm below tol; keeps the band tight.
  void trim(double tol = 0.0);

  Mat eval(Cplx lambda) const;  // DomainError at lambda=0 with negative degrees
  double norm() const;          // l2 over coefficient Frobenius norms

  LoopElement& operator+=(const LoopElement& o);
  LoopElement& operator-=(const LoopElement& o);
  LoopElement& operator*=(Cplx s);
  friend LoopElement operator+(LoopElement a, const LoopElement& b) { return a += b; }
  friend LoopElement operator-(LoopElement a, const LoopElement& b) { return a -= b; }
  friend LoopElement operator*(Cplx s, LoopElement a) { return a *= s; }

  /// Restriction to degrees in [dlo, dhi].
  LoopElement band(int dlo, int dhi) const;

  std::string to_json() const;
  static LoopElement from_json(const std::string& text, AlgebraPtr alg);

 private:
  void check_same(const LoopElement& o) const;
  AlgebraPtr alg_;
  std::map<int, Mat> coeffs_;
};

/// Degree-wise convolution of matrix brackets.
LoopElement loop_bracket(const LoopElement& a, const LoopElement& b);
/// Group-level band product (degree-wise convolution of matrix products).
/// The optional window restricts which output degrees are formed at all,
/// keeping intermediate bands inside the width cap.
LoopElement loop_mul(const LoopElement& a, const LoopElement& b,
                     int window_lo = -(1 << 28), int window_hi = (1 << 28));
/// Coefficient-wise involution including its lambda action: for example a
/// tau with Conj action sends sum xi_j lambda^j to sum tau(xi_j) lambda^j,
/// an Invert action to sum sigma(xi_j) lambda^{-j}.
LoopElement loop_apply(const InvolutionSpec& s, const LoopElement& x);
/// exp of a band whose coefficients all commute (vacuum exponentials).
LoopElement loop_exp_commuting(const LoopElement& x, int max_abs_degree,
                               double tol = 1e-16);
/// Band inverse of a group-like element: w_0 invertible, solves w m = 1
/// degree by degree down to depth.
LoopElement loop_inverse_band(const LoopElement& w, int depth);

enum class Family { Standard, U, UK, TwistedU, TwistedUK };
std::string family_name(Family f);
Family family_from_name(const std::string& s);

enum class Part { Full, Plus, Minus };

/// One of the five loop-algebra splittings L = L+ (+) L-. Holds the algebra,
/// the Cartan data seeding the vacuum sequence, and whatever finite
/// decomposition handles the family's projections need.
struct Splitting {
  Family family = Family::Standard;
  AlgebraPtr alg;
  CartanData cartan;

  std::optional<Subspace> K;   // U/K families: fixed space of sigma; twisted-U: so(n)
  std::optional<Subspace> P;   // -1 eigenspace of sigma
  std::optional<Subspace> B;   // twisted-U Borel subspace
  std::optional<NestedDecomposition> nested;  // twisted-U/K

  std::string tau_symbol;     // reality involution, empty for Standard
  std::string sigma_symbol;   // parity involution (UK: "sigma", TwUK: "sigma1")
  std::string mirror_symbol;  // lambda -> 1/lambda involution (twisted families)

  /// Annulus radius of the boundary circles; recorded for documentation only,
  /// finite bands never consume it.
  double annulus_eps = 1.0;

  /// Aggregated 2-norm residual of the membership conditions for xi in L,
  /// L+ or L-.
  double membership(const LoopElement& xi, Part part = Part::Full) const;

  /// xi -> (xi_plus, xi_minus); exact coefficient-wise reconstruction.
  /// DomainError if xi fails Full membership at `gate_tol`.
  std::pair<LoopElement, LoopElement> project_split(
      const LoopElement& xi, double gate_tol = 1e-10) const;

  /// Plus/minus projections without the membership gate (internal paths).
  LoopElement project_plus_raw(const LoopElement& xi) const;

  /// J_{i,j}; i is a 1-based Cartan basis index.
  LoopElement vacuum_generator(int i, int j) const;

  const InvolutionSpec* tau() const;
  const InvolutionSpec* sigma() const;
  const InvolutionSpec* mirror() const;
  bool twisted() const {
    return family == Family::TwistedU || family == Family::TwistedUK;
  }
};

struct VacuumGenerator {
  int i = 1;
  int j = 1;
  LoopElement value;
};

VacuumGenerator vacuum_generator(const Splitting& s, int i, int j);

// Family factories (see families.cpp). n is the algebra parameter:
// sl(n,C)/su(n)/sl(n,R) matrices are n x n, o(n,n) matrices 2n x 2n.
Splitting make_standard_splitting(int n = 2);
Splitting make_u_splitting_su(int n = 2);
Splitting make_uk_splitting_su_so(int n = 2);
Splitting make_twisted_u_splitting_sl(int n = 3);
Splitting make_twisted_uk_splitting_onn(int n = 2);
Splitting make_splitting(Family f, int n);

}  // namespace loopsol

#endif
