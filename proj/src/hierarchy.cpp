#include "loopsol/hierarchy.hpp"

#include <algorithm>

#include "loopsol/errors.hpp"

namespace loopsol {

namespace {

Subspace full_space(const Splitting& s) {
  switch (s.family) {
    case Family::Standard:
    case Family::U:
    case Family::TwistedU:
      return s.cartan.ambient;
    case Family::UK:
      return s.K->sum_with(*s.P);
    case Family::TwistedUK:
      return s.nested->U;
  }
  return s.cartan.ambient;
}

double eig_multiset_distance(const Mat& a, const Mat& b) {
  Eigen::ComplexEigenSolver<Mat> ea(a, false), eb(b, false);
  std::vector<Cplx> va, vb;
  for (int k = 0; k < a.rows(); ++k) {
    va.push_back(ea.eigenvalues()(k));
    vb.push_back(eb.eigenvalues()(k));
  }
  // greedy matching is adequate at the tolerances in play
  double worst = 0.0;
  for (const Cplx& x : va) {
    double best = 1e300;
    size_t bi = 0;
    for (size_t k = 0; k < vb.size(); ++k) {
      double d = std::abs(x - vb[k]);
      if (d < best) {
        best = d;
        bi = k;
      }
    }
    vb.erase(vb.begin() + static_cast<long>(bi));
    worst = std::max(worst, best);
  }
  return worst;
}

/// Upper-triangular unit-diagonal gauge with b a b^{-1} = p for diagonal a
/// with distinct entries (twisted-U leading coefficient).
Mat recover_borel_gauge(const Mat& p, const Mat& a) {
  const int n = static_cast<int>(p.rows());
  Mat b = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    // column k solves (p - a_kk) v = 0 within the flag v_i = 0 for i > k
    Mat m = p - a(k, k) * Mat::Identity(n, n);
    b(k, k) = 1.0;
    if (k > 0) {
      Mat top = m.topLeftCorner(k, k);
      CVec rhs = -m.block(0, k, k, 1);
      b.block(0, k, k, 1) = top.fullPivLu().solve(rhs);
    }
  }
  return b;
}

/// K1'-group gauge diag(I, A) with g a_dir g^{-1} = p for the o(n,n) family.
Mat recover_onn_gauge(const Mat& p, const std::vector<Mat>& cartan_basis) {
  const int m = static_cast<int>(p.rows());
  const int n = m / 2;
  Mat ll = p.bottomLeftCorner(n, n);  // (1/2) A D
  Mat gram = 4.0 * (ll.adjoint() * ll);
  Mat D = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    double d2 = gram(k, k).real();
    if (d2 <= 1e-14)
      throw DomainError("cannot recover gauge: direction has a vanishing entry");
    D(k, k) = std::sqrt(d2);
  }
  Mat A = 2.0 * ll * D.inverse();
  Mat g = Mat::Identity(m, m);
  g.bottomRightCorner(n, n) = A;
  (void)cartan_basis;
  return g;
}

struct DescentSetup {
  MatField vtil;              // lambda^0 coefficient in the gauged frame
  std::optional<MatField> wtil;  // lambda^-1 coefficient (twisted)
  std::optional<MatField> gauge;
  Mat a_dir;                  // leading constant coefficient in the gauge
  AdInverse ad_full;          // untwisted / twisted-U levels
  std::optional<AdInverse> ad_k1;  // twisted-UK even levels
  Subspace kernel_odd;        // integration-constant space on generic levels
};

}  // namespace

HierarchyInstance HierarchyInstance::make(Splitting s) {
  HierarchyInstance h;
  h.J1 = s.vacuum_generator(1, 1);
  h.split = std::move(s);
  return h;
}

LoopField HierarchyInstance::su2_state(const std::vector<Cplx>& q,
                                       const Axis& ax, Boundary b) const {
  if (split.alg->size != 2)
    throw StructuralError("su2_state requires a rank-one 2x2 family");
  if (static_cast<int>(q.size()) != ax.count)
    throw StructuralError("su2_state: sample count mismatch");
  LoopField P({ax}, b, LoopElement::zero(split.alg));
  const Mat a1 = split.cartan.regular();
  for (int k = 0; k < ax.count; ++k) {
    Mat u = Mat::Zero(2, 2);
    u(0, 1) = q[static_cast<size_t>(k)];
    u(1, 0) = -std::conj(q[static_cast<size_t>(k)]);
    LoopElement p(split.alg);
    p.set_coeff(1, a1);
    p.set_coeff(0, u);
    P.at(k) = p;
  }
  return P;
}

double HierarchyInstance::y_residual(const LoopField& P) const {
  double worst = 0.0;
  const Mat a1 = split.cartan.regular();
  for (int k = 0; k < P.size(); ++k) {
    const LoopElement& p = P.flat(k);
    double r2 = 0.0;
    auto add = [&](double r) { r2 += r * r; };
    switch (split.family) {
      case Family::Standard:
      case Family::U:
      case Family::UK: {
        add((p.coeff(1) - a1).norm());
        Mat u = p.coeff(0);
        add(split.cartan.Aperp.residual(u));
        if (split.family == Family::UK) add(split.K->residual(u));
        for (const auto& [d, c] : p.coeffs())
          if (d < 0 || d > 1) add(c.norm());
        break;
      }
      case Family::TwistedU:
      case Family::TwistedUK: {
        Mat p1 = p.coeff(1);
        add(eig_multiset_distance(p1, a1));
        const InvolutionSpec* m = split.mirror();
        add((p.coeff(-1) - m->apply(p1)).norm());
        Mat v = p.coeff(0);
        if (split.family == Family::TwistedU)
          add(split.K->residual(v));
        else
          add(split.nested->S1.residual(v));
        for (const auto& [d, c] : p.coeffs())
          if (d < -1 || d > 1) add(c.norm());
        break;
      }
    }
    worst = std::max(worst, std::sqrt(r2));
  }
  return worst;
}

namespace {

DescentSetup prepare_descent(const HierarchyInstance& h, const LoopField& P,
                             const ComputeQOptions& opt) {
  const Splitting& s = h.split;
  DescentSetup d;
  const auto& axes = P.axes();
  const Boundary bnd = P.boundary();
  MatField v(axes, bnd, Mat::Zero(s.alg->size, s.alg->size));
  for (int k = 0; k < P.size(); ++k) v.flat(k) = P.flat(k).coeff(0);

  if (!s.twisted()) {
    d.vtil = v;
    d.a_dir = s.cartan.regular();
    Subspace space = full_space(s);
    d.ad_full = AdInverse(d.a_dir, space);
    d.kernel_odd = d.ad_full.kernel();
    return d;
  }

  // twisted: work in the b^{-1} gauged frame where the connection reads
  //   a lambda + (b^{-1} v b + b^{-1} b_x) + b^{-1} p_{-1} b lambda^{-1}
  MatField g = opt.gauge ? *opt.gauge
                         : MatField(axes, bnd, Mat::Identity(s.alg->size, s.alg->size));
  if (!opt.gauge) {
    for (int k = 0; k < P.size(); ++k) {
      const Mat p1 = P.flat(k).coeff(1);
      g.flat(k) = (s.family == Family::TwistedU)
                      ? recover_borel_gauge(p1, s.cartan.regular())
                      : recover_onn_gauge(p1, s.cartan.basis);
    }
  }
  // direction in A seen in the gauged frame
  d.a_dir = g.flat(0).inverse() * P.flat(0).coeff(1) * g.flat(0);
  d.a_dir = s.cartan.A.project(d.a_dir);
  MatField gx = d_x(g, opt.diff);
  d.vtil = v;
  MatField wt = v;
  for (int k = 0; k < P.size(); ++k) {
    Mat gi = g.flat(k).inverse();
    d.vtil.flat(k) = gi * v.flat(k) * g.flat(k) + gi * gx.flat(k);
    wt.flat(k) = gi * P.flat(k).coeff(-1) * g.flat(k);
  }
  d.wtil = wt;
  d.gauge = g;

  if (s.family == Family::TwistedU) {
    d.ad_full = AdInverse(d.a_dir, full_space(s));
    d.kernel_odd = d.ad_full.kernel();
  } else {
    d.ad_full = AdInverse(d.a_dir, s.nested->P1);  // odd degrees
    d.ad_k1 = AdInverse(d.a_dir, s.nested->K1);    // even degrees
    d.kernel_odd = d.ad_full.kernel();
  }
  return d;
}

}  // namespace

QField compute_Q(const HierarchyInstance& h, const LoopField& P, int i, int j,
                 ComputeQOptions opt) {
  const Splitting& s = h.split;
  if (P.dims() != 1) throw ConfigError("compute_Q expects a 1-D grid");
  if (i < 1 || i > s.cartan.n()) throw DomainError("flow index out of range");
  if (j < 1) throw DomainError("flow degree must be positive");
  if ((s.family == Family::UK || s.family == Family::TwistedUK) && j % 2 == 0)
    throw DomainError("flow degree must be odd for this family");
  const int depth = opt.depth >= 0 ? opt.depth : (s.twisted() ? 8 : 2);
  const int floor = (s.twisted() ? -j : 0) - depth;
  const int msize = s.alg->size;
  const auto& axes = P.axes();
  const Boundary bnd = P.boundary();
  const int N = P.size();

  DescentSetup ds = prepare_descent(h, P, opt);

  if (opt.check_regularity) {
    AdInverse& ad = ds.ad_full;
    const int expect = ad.domain().dim() - ad.kernel().dim();
    if (ad.rank() != expect || ad.kernel().dim() == 0 ||
        ad.kernel().dim() > s.cartan.n())
      throw DomainError("leading coefficient is not regular (ad-rank drop)");
  }

  const Mat a_i = s.cartan.basis[static_cast<size_t>(i - 1)];
  auto vacuum_coeff = [&](int d) -> Mat {
    if (d == j) return a_i;
    if (s.twisted() && d == -j) return s.mirror()->apply(a_i);
    return Mat::Zero(msize, msize);
  };

  QField out;
  out.floor_degree = floor;
  std::map<int, MatField> qc;
  const MatField zero_field(axes, bnd, Mat::Zero(msize, msize));

  // top level: [a, Q_j] = 0, Q_j = a_i by the vacuum normalization
  qc[j] = MatField(axes, bnd, a_i);
  double consistency = 0.0;
  bool warn = false;

  for (int k = j; k > floor; --k) {
    const MatField& qk = qc[k];
    const MatField& qk1 = qc.count(k + 1) ? qc[k + 1] : zero_field;
    MatField dq = d_x(qk, opt.diff);
    // level space of the unknown Q_{k-1}
    const bool even_level = ((k - 1) % 2 + 2) % 2 == 0;
    const AdInverse& ad =
        (s.family == Family::TwistedUK && even_level) ? *ds.ad_k1 : ds.ad_full;
    MatField qnew = zero_field;
    for (int t = 0; t < N; ++t) {
      Mat r = -dq.flat(t) - comm(ds.vtil.flat(t), qk.flat(t));
      if (ds.wtil) r -= comm(ds.wtil->flat(t), qk1.flat(t));
      double c = 0.0;
      qnew.flat(t) = ad.apply(r, &c);
      consistency = std::max(consistency, c);
    }
    // integration constants along the centralizer, anchored at the vacuum
    const Subspace& ker = ad.kernel();
    if (ker.dim() > 0) {
      MatField integrand = zero_field;
      for (int t = 0; t < N; ++t) {
        Mat w = comm(ds.vtil.flat(t), qnew.flat(t));
        if (ds.wtil) w += comm(ds.wtil->flat(t), qk.flat(t));
        integrand.flat(t) = -ker.project(w);
      }
      double mean_defect = 0.0;
      Mat anchor = ker.project(vacuum_coeff(k - 1));
      MatField prim =
          (bnd == Boundary::Periodic)
              ? cumint_x(integrand, anchor, &mean_defect)
              : cumint_x(integrand, anchor, nullptr);
      if (bnd == Boundary::Periodic &&
          mean_defect > 1e-8 * std::max(1.0, integrand.norm()))
        warn = true;
      for (int t = 0; t < N; ++t) qnew.flat(t) += prim.flat(t);
    }
    qc[k - 1] = std::move(qnew);
  }

  // assemble, conjugating back when gauged
  out.Q = LoopField(axes, bnd, LoopElement::zero(s.alg));
  for (int t = 0; t < N; ++t) {
    LoopElement q(s.alg);
    for (const auto& [d, f] : qc) {
      Mat c = f.flat(t);
      if (ds.gauge) c = ds.gauge->flat(t) * c * ds.gauge->flat(t).inverse();
      if (c.norm() > 0.0) q.set_coeff(d, c);
    }
    out.Q.at(t) = q;
  }
  out.descent_consistency = consistency;
  out.boundary_warning = warn;

  // residual of [d_x + P, Q] above the truncation floor
  LoopField dQ = d_x(out.Q, opt.diff);
  double res = 0.0;
  for (int t = 0; t < N; ++t) {
    LoopElement r = dQ.at(t) + loop_bracket(P.flat(t), out.Q.at(t));
    for (const auto& [d, c] : r.coeffs())
      if (d > floor + 1) res = std::max(res, c.norm());
  }
  out.commutator_residual = res;
  return out;
}

namespace {

std::vector<int> moving_degrees(Family f) {
  if (f == Family::TwistedU || f == Family::TwistedUK) return {-1, 0, 1};
  return {0};
}

}  // namespace

FlowDetail flow_rhs_detail(const HierarchyInstance& h, int i, int j,
                           const LoopField& P, ComputeQOptions opt) {
  FlowDetail out;
  out.q = compute_Q(h, P, i, j, opt);
  const Splitting& s = h.split;
  LoopField piQ = out.q.Q;
  for (int t = 0; t < P.size(); ++t) piQ.at(t) = s.project_plus_raw(out.q.Q.at(t));
  LoopField dpiQ = d_x(piQ, opt.diff);
  LoopField rhs = P;
  const std::vector<int> keep = moving_degrees(s.family);
  double dropped = 0.0, kept = 0.0;
  for (int t = 0; t < P.size(); ++t) {
    LoopElement full = dpiQ.at(t) + loop_bracket(P.flat(t), piQ.at(t));
    LoopElement v(s.alg);
    for (const auto& [d, c] : full.coeffs()) {
      if (std::find(keep.begin(), keep.end(), d) != keep.end()) {
        v.set_coeff(d, c);
        kept += c.squaredNorm();
      } else {
        dropped += c.squaredNorm();
      }
    }
    rhs.at(t) = v;
  }
  out.tangency_residual = std::sqrt(dropped) / std::max(1.0, std::sqrt(kept));
  out.value = rhs;
  return out;
}

LoopField flow_rhs(const HierarchyInstance& h, int i, int j, const LoopField& P,
                   DiffMethod diff) {
  ComputeQOptions opt;
  opt.diff = diff;
  return flow_rhs_detail(h, i, j, P, opt).value;
}

Trajectory evolve(const HierarchyInstance& h, int i, int j, LoopField P0,
                  double T, double dt, EvolveOptions opt) {
  if (dt <= 0.0) throw DomainError("evolve: dt must be positive");
  const int steps = static_cast<int>(std::ceil(T / dt - 1e-12));
  const double norm0 = P0.norm();
  ComputeQOptions qopt;
  qopt.diff = opt.diff;
  qopt.check_regularity = false;  // checked once up front
  {
    ComputeQOptions first = qopt;
    first.check_regularity = true;
    (void)compute_Q(h, P0, i, j, first);
  }

  Trajectory tr;
  auto invariants_of = [&](const LoopField& P) -> RVec {
    QField q = compute_Q(h, P, i, j, qopt);
    const Subspace& A = h.split.cartan.A;
    RVec acc = RVec::Zero(A.dim());
    for (int t = 0; t < P.size(); ++t)
      acc += A.coords(q.Q.at(t).coeff(0));
    return acc * P.axis(0).step;
  };
  auto snapshot = [&](double t, const LoopField& P) {
    tr.times.push_back(t);
    tr.states.push_back(P);
    if (opt.track_invariants) tr.invariants.push_back(invariants_of(P));
    tr.max_y_residual = std::max(tr.max_y_residual, h.y_residual(P));
  };

  snapshot(0.0, P0);
  LoopField P = P0;
  double next_snap = opt.snapshot_dt > 0 ? opt.snapshot_dt : 2 * T + 1.0;
  for (int n = 0; n < steps; ++n) {
    auto rhs = [&](const LoopField& state) {
      return flow_rhs_detail(h, i, j, state, qopt).value;
    };
    LoopField k1 = rhs(P);
    LoopField s2 = P;
    {
      LoopField tmp = k1;
      tmp.scale(Cplx(dt / 2, 0));
      s2 += tmp;
    }
    LoopField k2 = rhs(s2);
    LoopField s3 = P;
    {
      LoopField tmp = k2;
      tmp.scale(Cplx(dt / 2, 0));
      s3 += tmp;
    }
    LoopField k3 = rhs(s3);
    LoopField s4 = P;
    {
      LoopField tmp = k3;
      tmp.scale(Cplx(dt, 0));
      s4 += tmp;
    }
    LoopField k4 = rhs(s4);
    k2.scale(Cplx(2, 0));
    k3.scale(Cplx(2, 0));
    k1 += k2;
    k1 += k3;
    k1 += k4;
    k1.scale(Cplx(dt / 6.0, 0));
    P += k1;
    const double t = dt * (n + 1);
    if (P.norm() > opt.blowup_factor * std::max(norm0, 1e-30))
      throw IntegrationError("evolve: state norm exceeded blow-up guard",
                             dt * n);
    if (t + 1e-12 >= next_snap || n == steps - 1) {
      snapshot(t, P);
      while (next_snap <= t + 1e-12) next_snap += opt.snapshot_dt;
    }
  }
  if (opt.track_invariants && !tr.invariants.empty()) {
    double drift = 0.0;
    const RVec& base = tr.invariants.front();
    for (const RVec& v : tr.invariants)
      drift = std::max(drift, (v - base).norm() / std::max(1.0, base.norm()));
    tr.invariant_drift = drift;
  }
  return tr;
}

Mat vacuum_frame_value(const HierarchyInstance& h, int i, int j, double x,
                       double t, Cplx lambda) {
  LoopElement arg = h.J1;
  arg *= Cplx(x, 0.0);
  LoopElement jj = h.split.vacuum_generator(i, j);
  jj *= Cplx(t, 0.0);
  arg += jj;
  return matexp(arg.eval(lambda));
}

namespace {

// midpoint values between nodes k and k+1 (cubic, 4th order)
Mat midpoint(const std::vector<Mat>& row, int k) {
  const int n = static_cast<int>(row.size());
  if (k >= 1 && k + 2 < n)
    return (-row[k - 1] + 9.0 * row[k] + 9.0 * row[k + 1] - row[k + 2]) / 16.0;
  if (k == 0)
    return (5.0 * row[0] + 15.0 * row[1] - 5.0 * row[2] + row[3]) / 16.0;
  return (5.0 * row[n - 1] + 15.0 * row[n - 2] - 5.0 * row[n - 3] +
          row[n - 4]) /
         16.0;
}

// one RK4 step of E' = E A along a sampled coefficient row
Mat transport_step(const Mat& e, const Mat& a0, const Mat& ah, const Mat& a1,
                   double h) {
  Mat k1 = e * a0;
  Mat k2 = (e + 0.5 * h * k1) * ah;
  Mat k3 = (e + 0.5 * h * k2) * ah;
  Mat k4 = (e + h * k3) * a1;
  return e + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// integrate E' = E A from index i0 across the whole axis, E(i0) given
void transport_line(std::vector<Mat>& e, const std::vector<Mat>& a, int i0,
                    double h) {
  const int n = static_cast<int>(a.size());
  for (int k = i0; k + 1 < n; ++k)
    e[k + 1] = transport_step(e[k], a[k], midpoint(a, k), a[k + 1], h);
  for (int k = i0; k > 0; --k)
    e[k - 1] = transport_step(e[k], a[k], midpoint(a, k - 1), a[k - 1], -h);
}

}  // namespace

Frame::Frame(ConnectionForm theta, FrameOptions opt)
    : theta_(std::move(theta)), opt_(opt) {}

MatField Frame::integrate(Cplx lambda, bool axis0_first) const {
  const auto& axes = theta_.axes();
  const int msize = static_cast<int>(theta_.comps.front().flat(0).algebra()->size);
  if (axes.size() == 1) {
    const MatField& a = theta_.component_at(0, lambda);
    MatField e(axes, a.boundary(), Mat::Identity(msize, msize));
    std::vector<Mat> row(a.size()), erow(a.size(), Mat::Identity(msize, msize));
    for (int k = 0; k < a.size(); ++k) row[k] = a.flat(k);
    transport_line(erow, row, opt_.base.first, axes[0].step);
    for (int k = 0; k < a.size(); ++k) e.flat(k) = erow[k];
    return e;
  }
  const MatField& ax0 = theta_.component_at(0, lambda);
  const MatField& ax1 = theta_.component_at(1, lambda);
  const int n0 = axes[0].count, n1 = axes[1].count;
  MatField e(axes, ax0.boundary(), Mat::Identity(msize, msize));
  auto line0 = [&](int jfix, std::vector<Mat>& erow) {
    std::vector<Mat> row(n0);
    for (int k = 0; k < n0; ++k) row[k] = ax0.at(k, jfix);
    transport_line(erow, row, opt_.base.first, axes[0].step);
  };
  auto line1 = [&](int ifix, std::vector<Mat>& erow) {
    std::vector<Mat> row(n1);
    for (int k = 0; k < n1; ++k) row[k] = ax1.at(ifix, k);
    transport_line(erow, row, opt_.base.second, axes[1].step);
  };
  if (axis0_first) {
    std::vector<Mat> base_row(n0, Mat::Identity(msize, msize));
    line0(opt_.base.second, base_row);
    for (int i = 0; i < n0; ++i) {
      std::vector<Mat> col(n1, base_row[i]);
      line1(i, col);
      for (int j = 0; j < n1; ++j) e.at(i, j) = col[j];
    }
  } else {
    std::vector<Mat> base_col(n1, Mat::Identity(msize, msize));
    line1(opt_.base.first, base_col);
    for (int j = 0; j < n1; ++j) {
      std::vector<Mat> row(n0, base_col[j]);
      // transport_line wants E at the base index of axis 0
      line0(j, row);
      for (int i = 0; i < n0; ++i) e.at(i, j) = row[i];
    }
  }
  return e;
}

const MatField& Frame::at(Cplx lambda) const {
  auto key = std::make_pair(lambda.real(), lambda.imag());
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(key, integrate(lambda, true)).first->second;
}

Mat Frame::value(int i, int j, Cplx lambda) const {
  const MatField& e = at(lambda);
  return e.dims() == 1 ? e.at(i) : e.at(i, j);
}

double Frame::path_defect(Cplx lambda) const {
  if (theta_.axes().size() == 1) return 0.0;
  MatField a = integrate(lambda, true);
  MatField b = integrate(lambda, false);
  a -= b;
  return a.sup_norm();
}

double Frame::log_derivative_residual(Cplx lambda) const {
  const MatField& e = at(lambda);
  std::vector<MatField> ld = log_derivative(e, opt_.diff);
  double worst = 0.0;
  for (int c = 0; c < theta_.ncomps(); ++c) {
    const MatField& th = theta_.component_at(c, lambda);
    MatField diff = ld[static_cast<size_t>(c)];
    diff -= th;
    worst = std::max(worst, diff.sup_norm());
  }
  return worst;
}

Frame make_frame(ConnectionForm theta, FrameOptions opt) {
  if (theta.axes().size() >= 2) {
    double curv = curvature_sup(theta, opt.flatness_probes, opt.diff);
    if (curv > opt.flatness_tol)
      throw FlatnessError("frame: connection is not flat to tolerance", curv);
  }
  return Frame(std::move(theta), opt);
}

}  // namespace loopsol
