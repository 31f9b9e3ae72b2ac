#ifndef LOOPSOL_ALGEBRA_HPP
#define LOOPSOL_ALGEBRA_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "loopsol/matrix.hpp"
#include "loopsol/subspace.hpp"

namespace loopsol {

enum class MatOp { None, Transpose, Conj, ConjTranspose };

/// How an involution acts on the loop parameter.
enum class LambdaAction { Fix, Conj, Negate, Invert };

/// An involution X -> sign * C op(X) C^{-1}. The lambda action records how the
/// induced loop-algebra involution moves the spectral parameter.
struct InvolutionSpec {
  std::string symbol;  // "tau", "sigma", "sigma1", "sigma2"
  Mat C;
  MatOp op = MatOp::None;
  double sign = 1.0;
  LambdaAction lambda_action = LambdaAction::Fix;

  Mat apply(const Mat& x) const;
  bool conjugate_linear() const {
    return op == MatOp::Conj || op == MatOp::ConjTranspose;
  }
};

/// Closed-form Iwasawa data for a split real form: U = K + B with K the
/// antisymmetric part and B upper triangular. Registered only where needed.
struct IwasawaData {
  Subspace K;
  Subspace B;
  /// X -> (k, b) with k = L - L^T (L the strict lower part), b = X - k.
  static std::pair<Mat, Mat> split(const Mat& x);
};

struct AlgebraDescriptor {
  std::string name;  // "sl(n,C)", "gl(n,C)", "o(n,n,C)"
  int size = 0;      // matrix size (2n for o(n,n,C))
  int rank = 0;      // rank of the real form in play
  std::vector<InvolutionSpec> involutions;
  std::optional<IwasawaData> iwasawa;

  /// Residual of the defining identity (0 for gl; tracelessness for sl;
  /// ||X^T I_{n,n} + I_{n,n} X|| for o(n,n,C)).
  double identity_residual(const Mat& x) const;

  bool has_involution(const std::string& sym) const;
  const InvolutionSpec& involution(const std::string& sym) const;

  /// Real basis of the complex algebra (generators and i * generators).
  std::vector<Mat> complex_basis() const;

  /// For o(n,n,C): the half size n; otherwise size.
  int half() const { return name == "o(n,n,C)" ? size / 2 : size; }
};

using AlgebraPtr = std::shared_ptr<const AlgebraDescriptor>;

/// Lie bracket with a shape guard against the descriptor.
Mat bracket(const AlgebraDescriptor& alg, const Mat& x, const Mat& y);

/// Involution application; the spec must be registered on the algebra.
Mat apply_involution(const AlgebraDescriptor& alg, const InvolutionSpec& spec,
                     const Mat& x);

/// (fixed part, anti part) eigenspace split of an involution.
std::pair<Mat, Mat> eigenspace_split(const InvolutionSpec& spec, const Mat& x);

/// Iwasawa projection X = k + b; UnsupportedError without registered data.
std::pair<Mat, Mat> iwasawa_project(const AlgebraDescriptor& alg, const Mat& x);

/// Basis of a maximal abelian subspace together with the ambient subspace in
/// which regularity of the distinguished element is measured.
struct CartanData {
  std::vector<Mat> basis;
  Subspace ambient;
  Subspace A;
  Subspace Aperp;  // ambient orthogonal complement of A
  int regular_index = 0;

  static CartanData make(std::vector<Mat> basis, Subspace ambient,
                         int regular_index = 0);

  const Mat& regular() const { return basis[regular_index]; }
  int n() const { return static_cast<int>(basis.size()); }

  /// Pairwise commutation and the ad-rank regularity test; ConfigError on
  /// failure. Returns the measured rank defect of ad(a_reg) on ambient.
  void verify(double rank_tol = 1e-9) const;
};

/// Eigenspace scaffolding for the doubly twisted families:
/// U = K1 + P1 = K2 + P2, K1 cap K2 = S1 + S2, K1' = S2 + Q1, K2' = S1 + Q2.
struct NestedDecomposition {
  Subspace U;
  Subspace K1, P1, K2, P2;
  Subspace S1, S2, Q1, Q2, K1p, K2p;

  /// Derives Q1 = K1 cap P2, Q2 = K2 cap P1, S2 = K1p cap K2, K2p = S1 + Q2
  /// from (U, K1, P1, K2, P2, S1, K1p) and validates the projector identities.
  static NestedDecomposition build(const Subspace& u, const Subspace& k1,
                                   const Subspace& p1, const Subspace& k2,
                                   const Subspace& p2, const Subspace& s1,
                                   const Subspace& k1p, double tol = 1e-10);

  void validate(double tol = 1e-10) const;
};

struct NestedComponents {
  Mat s1, s2, q1, q2, p_rem;
};

/// Componentwise orthogonal projection of X onto S1, S2, Q1, Q2 with the
/// remainder carrying the rest of X.
NestedComponents nested_project(const NestedDecomposition& d, const Mat& x);

/// Load an algebra (name, n, involution conjugation matrices) from JSON text.
AlgebraPtr algebra_from_json(const std::string& json_text);
std::string algebra_to_json(const AlgebraDescriptor& alg);

}  // namespace loopsol

#endif
