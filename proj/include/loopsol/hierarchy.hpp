#ifndef LOOPSOL_HIERARCHY_HPP
#define LOOPSOL_HIERARCHY_HPP

#include <optional>

#include "loopsol/connection.hpp"
#include "loopsol/grid.hpp"
#include "loopsol/stencil.hpp"

namespace loopsol {

/// A splitting together with its degree-one seed J_1 and phase space data.
struct HierarchyInstance {
  Splitting split;
  LoopElement J1;

  static HierarchyInstance make(Splitting s);

  const AlgebraPtr& algebra() const { return split.alg; }

  /// Structure residual of a grid of loop elements against the family's
  /// phase space Y (band shape and coefficient constraints).
  double y_residual(const LoopField& P) const;

  /// Y element from scalar data for the rank-one su(2) families:
  /// P = a1 lambda + offdiag(q, -conj q).
  LoopField su2_state(const std::vector<Cplx>& q, const Axis& ax,
                      Boundary b = Boundary::Decaying) const;
};

struct ComputeQOptions {
  int depth = -1;  // extra coefficients below the lowest degree pi_+ consumes
  DiffMethod diff = DiffMethod::FD4;
  /// Twisted families: gauge grid b (or g) with P_1 = b a b^{-1}; recovered
  /// from the leading coefficient when absent (o(n,n) only).
  std::optional<MatField> gauge;
  bool check_regularity = true;
};

struct QField {
  LoopField Q;
  double commutator_residual = 0.0;   // sup over degrees above the floor
  double descent_consistency = 0.0;   // ad-inverse defects during descent
  bool boundary_warning = false;      // non-exact integrand on periodic grids
  int floor_degree = 0;
};

/// Q_{i,j}(P): [d_x + P, Q] = 0 band by band, Q conjugate to J_{i,j},
/// Q(J_1) = J_{i,j}. Twisted families run the recursion in the gauged frame
/// and conjugate back.
QField compute_Q(const HierarchyInstance& h, const LoopField& P, int i, int j,
                 ComputeQOptions opt = {});

struct FlowDetail {
  LoopField value;
  double tangency_residual = 0.0;
  QField q;
};

/// [d_x + P, pi_+(Q_{i,j}(P))] restricted to the band structure of P.
FlowDetail flow_rhs_detail(const HierarchyInstance& h, int i, int j,
                           const LoopField& P, ComputeQOptions opt = {});
LoopField flow_rhs(const HierarchyInstance& h, int i, int j, const LoopField& P,
                   DiffMethod diff = DiffMethod::FD4);

struct EvolveOptions {
  double snapshot_dt = 0.0;  // <= 0: keep only first and last states
  DiffMethod diff = DiffMethod::FD4;
  double blowup_factor = 1e6;
  bool track_invariants = true;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<LoopField> states;
  /// A-components of the degree-0 coefficient of Q, integrated over the grid,
  /// one row per snapshot.
  std::vector<RVec> invariants;
  double invariant_drift = 0.0;
  double max_y_residual = 0.0;
};

/// Classical RK4 method-of-lines integration of the (i,j) flow.
Trajectory evolve(const HierarchyInstance& h, int i, int j, LoopField P0,
                  double T, double dt, EvolveOptions opt = {});

/// Vacuum frame V(x, t)(lambda) = exp(x J_1 + t J_j) evaluated at lambda.
Mat vacuum_frame_value(const HierarchyInstance& h, int i, int j, double x,
                       double t, Cplx lambda);

struct FrameOptions {
  double flatness_tol = 1e-6;
  std::vector<Cplx> flatness_probes = {Cplx(0.5, 0), Cplx(1.0, 0), Cplx(2.0, 0)};
  std::pair<int, int> base = {0, 0};
  DiffMethod diff = DiffMethod::FD4;
};

/// Parallel transport solution of E^{-1} dE = theta with E(base) = I.
/// Lazily integrated per lambda and cached.
class Frame {
 public:
  Frame() = default;
  Frame(ConnectionForm theta, FrameOptions opt);

  const ConnectionForm& theta() const { return theta_; }
  const MatField& at(Cplx lambda) const;
  Mat value(int i, int j, Cplx lambda) const;
  /// x-then-t versus t-then-x integration disagreement.
  double path_defect(Cplx lambda) const;
  double log_derivative_residual(Cplx lambda) const;

 private:
  MatField integrate(Cplx lambda, bool axis0_first) const;
  ConnectionForm theta_;
  FrameOptions opt_;
  mutable std::map<std::pair<double, double>, MatField> cache_;
};

/// Validates flatness (FlatnessError carrying the curvature norm) and builds
/// the frame of theta.
Frame make_frame(ConnectionForm theta, FrameOptions opt = {});

}  // namespace loopsol

#endif
