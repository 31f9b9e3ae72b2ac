#ifndef LOOPSOL_CONNECTION_HPP
#define LOOPSOL_CONNECTION_HPP

#include <map>

#include "loopsol/grid.hpp"
#include "loopsol/stencil.hpp"

namespace loopsol {

/// Loop-valued connection 1-form on a grid: one component per coordinate,
/// all sharing the grid. Evaluations at fixed lambda are cached.
struct ConnectionForm {
  std::vector<std::string> names;
  std::vector<LoopField> comps;

  int ncomps() const { return static_cast<int>(comps.size()); }
  const std::vector<Axis>& axes() const { return comps.front().axes(); }

  const MatField& component_at(int k, Cplx lambda) const;

  /// Residual of tau(theta(conj lambda)) = theta(lambda) at the samples.
  double reality_residual(const InvolutionSpec& tau,
                          const std::vector<Cplx>& lambdas) const;

 private:
  mutable std::map<std::tuple<int, double, double>, MatField> cache_;
};

/// dtheta + theta ^ theta sampled at lambda for the ordered axis pair (ai, aj):
/// F_ij = d_i theta_j - d_j theta_i + [theta_i, theta_j]. DomainError at
/// lambda = 0 when negative degrees are present (pole).
MatField curvature(const ConnectionForm& theta, int ai, int aj, Cplx lambda,
                   DiffMethod diff = DiffMethod::FD4);

double curvature_sup(const ConnectionForm& theta,
                     const std::vector<Cplx>& lambdas,
                     DiffMethod diff = DiffMethod::FD4);

/// Connection E^{-1} dE of a frame grid (single lambda evaluation).
std::vector<MatField> log_derivative(const MatField& E,
                                     DiffMethod diff = DiffMethod::FD4);

/// theta = sum_i (a_i lambda + [a_i, v]) dx_i for v into Aperp (cap P for the
/// symmetric-space case). Flat for all lambda iff v solves the first order
/// system [a_i, v_xj] - [a_j, v_xi] = [[a_i, v], [a_j, v]].
ConnectionForm assemble_uk_lax(const Splitting& s, const MatField& v);

/// Componentwise residual of that first order system for the axis pair (0,1).
MatField uk_system_residual(const Splitting& s, const MatField& v,
                            DiffMethod diff = DiffMethod::FD4);

/// theta = sum_i ((g a_i g^-1) lambda + v_i + sigma(g a_i g^-1) lambda^-1) dx_i
/// with g into the Borel subgroup and v_i into K.
ConnectionForm assemble_twisted_u_lax(const Splitting& s, const MatField& g,
                                      const std::vector<MatField>& v);

struct TwistedUKLax {
  ConnectionForm theta;
  double compatibility_residual;  // g^-1 dg = sum pi_K1'([a_i, xi]) dx_i
  double gauge_identity_residual; // conjugating by g^-1 reproduces the
                                  // D lambda + (v + g^-1 dg) + ... form
};

/// theta = sum_i (g a_i g^-1 lambda + pi_S1([a_i, xi]) + sigma2(g a_i g^-1)
/// lambda^-1) dx_i for g into K1' and xi into Aperp cap P1. Requires the
/// maximal rank hypothesis (dim A = rank U).
TwistedUKLax assemble_twisted_uk_lax(const Splitting& s, const MatField& g,
                                     const MatField& xi,
                                     DiffMethod diff = DiffMethod::FD4);

/// First and second fundamental form data of an n-dimensional constant
/// curvature -1 submanifold of R^{2n-1}: A orthogonal, F zero-diagonal,
/// sampled over a 2-coordinate slice (axes slice_axes of x_1..x_n).
struct GSGEData {
  int n = 2;
  std::pair<int, int> slice_axes = {0, 1};
  MatField A;
  MatField F;

  double orthogonality_residual() const;  // sup ||A^T A - I||
  double diagonal_residual() const;       // sup |F_ii|
};

struct GSGELax {
  ConnectionForm omega;
  /// Coefficient-wise equality of the block assembly with the three-term
  /// conjugated sum; exact by construction, measured anyway.
  double identity_residual = 0.0;
  bool identity_holds = false;
};

/// The block Lax form
///   Omega_lambda = [[dF - F^T d, (l/2) d A^T + (1/2l) d A^T J],
///                   [(l/2) A d + (1/2l) J A d, 0]]
/// cross-checked against g a_i g^-1 lambda + pi_S1([a_i,xi]) + sigma2(...) / lambda
/// with g = diag(I, A), xi = offdiag(2 F^T; 2 F).
GSGELax assemble_gsge_lax(const Splitting& s, const GSGEData& d);

/// (Gauss residual, Codazzi residual) of
///   dw + w ^ w = -(1/2) d A^T e11 A d,  A^-1 dA = d F^T - F d,  w = d F - F^T d
/// on the 2-coordinate slice.
std::pair<MatField, MatField> gsge_residual(const GSGEData& d,
                                            DiffMethod diff = DiffMethod::FD4);

/// f_ij = (a_1i)_xj / a_1j from a metric row a_1 (row-vector field, entries
/// bounded away from zero). SingularityError names the offending node.
MatField build_F_from_metric(const MatField& a_row, int n,
                             std::pair<int, int> slice_axes = {0, 1},
                             DiffMethod diff = DiffMethod::FD4);

/// Read (A, F) off twisted o(n,n) connection components theta_i (one per
/// coordinate, bands [-1,1]).
GSGEData gsge_from_connection(const Splitting& s,
                              const std::vector<LoopField>& comps);

}  // namespace loopsol

#endif
