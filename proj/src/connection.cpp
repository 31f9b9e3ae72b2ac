#include "loopsol/connection.hpp"

#include "loopsol/errors.hpp"

namespace loopsol {

const MatField& ConnectionForm::component_at(int k, Cplx lambda) const {
  auto key = std::make_tuple(k, lambda.real(), lambda.imag());
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const LoopField& comp = comps.at(static_cast<size_t>(k));
  MatField out(comp.axes(), comp.boundary(),
               Mat::Zero(comp.flat(0).algebra()->size,
                         comp.flat(0).algebra()->size));
  for (int t = 0; t < comp.size(); ++t) out.flat(t) = comp.flat(t).eval(lambda);
  return cache_.emplace(key, std::move(out)).first->second;
}

double ConnectionForm::reality_residual(const InvolutionSpec& tau,
                                        const std::vector<Cplx>& lambdas) const {
  double worst = 0.0;
  for (const Cplx& l : lambdas)
    for (int c = 0; c < ncomps(); ++c) {
      const MatField& at_l = component_at(c, l);
      const MatField& at_lc = component_at(c, std::conj(l));
      for (int t = 0; t < at_l.size(); ++t)
        worst = std::max(worst,
                         (tau.apply(at_lc.flat(t)) - at_l.flat(t)).norm());
    }
  return worst;
}

MatField curvature(const ConnectionForm& theta, int ai, int aj, Cplx lambda,
                   DiffMethod diff) {
  if (lambda == Cplx(0.0, 0.0))
    for (const LoopField& c : theta.comps)
      for (int t = 0; t < c.size(); ++t)
        if (!c.flat(t).empty() && c.flat(t).lo() < 0)
          throw DomainError("curvature at lambda = 0: Laurent pole");
  const MatField& ti = theta.component_at(ai, lambda);
  const MatField& tj = theta.component_at(aj, lambda);
  MatField di_tj = (ai == 0) ? d_axis(tj, 0) : d_axis(tj, 1);
  MatField dj_ti = (aj == 0) ? d_axis(ti, 0) : d_axis(ti, 1);
  (void)diff;
  MatField f = di_tj;
  for (int t = 0; t < f.size(); ++t)
    f.flat(t) = di_tj.flat(t) - dj_ti.flat(t) + comm(ti.flat(t), tj.flat(t));
  return f;
}

double curvature_sup(const ConnectionForm& theta,
                     const std::vector<Cplx>& lambdas, DiffMethod diff) {
  double worst = 0.0;
  const int na = static_cast<int>(theta.axes().size());
  for (const Cplx& l : lambdas)
    for (int i = 0; i < na; ++i)
      for (int j = i + 1; j < na; ++j)
        worst = std::max(worst, curvature(theta, i, j, l, diff).sup_norm());
  return worst;
}

std::vector<MatField> log_derivative(const MatField& E, DiffMethod diff) {
  std::vector<MatField> out;
  for (int ax = 0; ax < E.dims(); ++ax) {
    MatField de = (ax == 0) ? ((E.dims() == 1) ? d_x(E, diff) : d_axis(E, 0))
                            : d_axis(E, 1);
    MatField ld = de;
    for (int t = 0; t < E.size(); ++t)
      ld.flat(t) = E.flat(t).inverse() * de.flat(t);
    out.push_back(std::move(ld));
  }
  return out;
}

ConnectionForm assemble_uk_lax(const Splitting& s, const MatField& v) {
  const Subspace& constraint =
      (s.family == Family::UK || s.family == Family::TwistedUK)
          ? Subspace::intersect(s.cartan.Aperp, *s.P)
          : s.cartan.Aperp;
  for (int t = 0; t < v.size(); ++t)
    if (constraint.residual(v.flat(t)) > 1e-10)
      throw DomainError("assemble_uk_lax: v leaves Aperp (cap P)");
  ConnectionForm theta;
  const int na = static_cast<int>(v.axes().size());
  for (int k = 0; k < na; ++k) {
    const Mat& ak = s.cartan.basis.at(static_cast<size_t>(k));
    LoopField comp(v.axes(), v.boundary(), LoopElement::zero(s.alg));
    for (int t = 0; t < v.size(); ++t) {
      LoopElement e(s.alg);
      e.set_coeff(1, ak);
      e.set_coeff(0, comm(ak, v.flat(t)));
      comp.flat(t) = e;
    }
    theta.names.push_back("x" + std::to_string(k + 1));
    theta.comps.push_back(std::move(comp));
  }
  return theta;
}

MatField uk_system_residual(const Splitting& s, const MatField& v,
                            DiffMethod diff) {
  if (v.dims() != 2) throw ConfigError("uk_system_residual expects a 2-D grid");
  (void)diff;
  const Mat& a0 = s.cartan.basis[0];
  const Mat& a1 = s.cartan.basis[1];
  MatField v0 = d_axis(v, 0);
  MatField v1 = d_axis(v, 1);
  MatField r = v;
  for (int t = 0; t < v.size(); ++t) {
    Mat lhs = comm(a0, v1.flat(t)) - comm(a1, v0.flat(t));
    Mat rhs = comm(comm(a0, v.flat(t)), comm(a1, v.flat(t)));
    r.flat(t) = lhs - rhs;
  }
  return r;
}

ConnectionForm assemble_twisted_u_lax(const Splitting& s, const MatField& g,
                                      const std::vector<MatField>& v) {
  if (s.family != Family::TwistedU)
    throw StructuralError("assemble_twisted_u_lax needs the twisted-U family");
  const int n = s.alg->size;
  for (int t = 0; t < g.size(); ++t) {
    const Mat& gt = g.flat(t);
    double low = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) low += std::norm(gt(i, j));
    if (std::sqrt(low) > 1e-10 || std::abs(gt.determinant() - Cplx(1, 0)) > 1e-8)
      throw DomainError("assemble_twisted_u_lax: g is not in the Borel group");
  }
  const InvolutionSpec& sig = *s.sigma();
  ConnectionForm theta;
  for (size_t k = 0; k < v.size(); ++k) {
    const Mat& ak = s.cartan.basis.at(k);
    for (int t = 0; t < v[k].size(); ++t)
      if (s.K->residual(v[k].flat(t)) > 1e-10)
        throw DomainError("assemble_twisted_u_lax: v leaves K");
    LoopField comp(g.axes(), g.boundary(), LoopElement::zero(s.alg));
    for (int t = 0; t < g.size(); ++t) {
      Mat conj_a = g.flat(t) * ak * g.flat(t).inverse();
      LoopElement e(s.alg);
      e.set_coeff(1, conj_a);
      e.set_coeff(0, v[k].flat(t));
      e.set_coeff(-1, sig.apply(conj_a));
      comp.flat(t) = e;
    }
    theta.names.push_back("x" + std::to_string(k + 1));
    theta.comps.push_back(std::move(comp));
  }
  return theta;
}

TwistedUKLax assemble_twisted_uk_lax(const Splitting& s, const MatField& g,
                                     const MatField& xi, DiffMethod diff) {
  if (s.family != Family::TwistedUK)
    throw StructuralError("assemble_twisted_uk_lax needs the twisted-U/K family");
  if (s.cartan.n() != s.alg->rank)
    throw UnsupportedError(
        "assemble_twisted_uk_lax: symmetric space does not have maximal rank");
  const NestedDecomposition& nd = *s.nested;
  const Subspace aperp_p1 = Subspace::intersect(s.cartan.Aperp, nd.P1);
  for (int t = 0; t < xi.size(); ++t)
    if (aperp_p1.residual(xi.flat(t)) > 1e-8)
      throw DomainError("assemble_twisted_uk_lax: xi leaves Aperp cap P1");
  const InvolutionSpec& s2 = s.alg->involution("sigma2");
  const int na = static_cast<int>(g.axes().size());

  TwistedUKLax out;
  ConnectionForm& theta = out.theta;
  std::vector<MatField> dg;
  for (int ax = 0; ax < na; ++ax) dg.push_back(d_axis(g, ax));
  (void)diff;
  double compat = 0.0;
  for (int k = 0; k < na; ++k) {
    const Mat& ak = s.cartan.basis.at(static_cast<size_t>(k));
    LoopField comp(g.axes(), g.boundary(), LoopElement::zero(s.alg));
    for (int t = 0; t < g.size(); ++t) {
      Mat gi = g.flat(t).inverse();
      Mat conj_a = g.flat(t) * ak * gi;
      Mat br = comm(ak, xi.flat(t));
      LoopElement e(s.alg);
      e.set_coeff(1, conj_a);
      e.set_coeff(0, nd.S1.project(br));
      e.set_coeff(-1, s2.apply(conj_a));
      comp.flat(t) = e;
      compat = std::max(
          compat, (gi * dg[static_cast<size_t>(k)].flat(t) - nd.K1p.project(br))
                      .norm());
    }
    theta.names.push_back("x" + std::to_string(k + 1));
    theta.comps.push_back(std::move(comp));
  }
  out.compatibility_residual = compat;
  if (compat > 1e-6)
    throw DomainError(
        "assemble_twisted_uk_lax: g^-1 dg != pi_K1'([a_i, xi]) dx_i "
        "(residual " +
        std::to_string(compat) + ")");

  // gauge check: g^{-1} * theta = D lambda + (v + g^{-1} dg) + lambda^{-1}
  // g^{-1} sigma2(g D g^{-1}) g
  double gauge_res = 0.0;
  for (int k = 0; k < na; ++k) {
    const Mat& ak = s.cartan.basis.at(static_cast<size_t>(k));
    for (int t = 0; t < g.size(); ++t) {
      Mat gi = g.flat(t).inverse();
      const LoopElement& e = theta.comps[static_cast<size_t>(k)].flat(t);
      Mat br = comm(ak, xi.flat(t));
      Mat c1 = gi * e.coeff(1) * g.flat(t) - ak;
      Mat c0 = gi * e.coeff(0) * g.flat(t) + gi * dg[static_cast<size_t>(k)].flat(t) -
               (nd.S1.project(br) + nd.K1p.project(br));
      Mat cm = gi * e.coeff(-1) * g.flat(t) -
               gi * s2.apply(g.flat(t) * ak * gi) * g.flat(t);
      gauge_res = std::max({gauge_res, c1.norm(), c0.norm(), cm.norm()});
    }
  }
  out.gauge_identity_residual = gauge_res;
  return out;
}

double GSGEData::orthogonality_residual() const {
  double worst = 0.0;
  for (int t = 0; t < A.size(); ++t) {
    const Mat& a = A.flat(t);
    worst = std::max(
        worst, (a.transpose() * a - Mat::Identity(n, n)).norm());
  }
  return worst;
}

double GSGEData::diagonal_residual() const {
  double worst = 0.0;
  for (int t = 0; t < F.size(); ++t)
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(F.flat(t)(i, i)));
  return worst;
}

namespace {

Mat gsge_block_component(const GSGEData& d, int coord, int node, int degree) {
  const int n = d.n;
  const Mat& A = d.A.flat(node);
  const Mat& F = d.F.flat(node);
  Mat ek = Mat::Zero(n, n);
  ek(coord, coord) = 1.0;
  Mat J = Mat::Identity(n, n);
  for (int i = 1; i < n; ++i) J(i, i) = -1.0;
  Mat out = Mat::Zero(2 * n, 2 * n);
  if (degree == 1) {
    out.topRightCorner(n, n) = 0.5 * ek * A.transpose();
    out.bottomLeftCorner(n, n) = 0.5 * A * ek;
  } else if (degree == 0) {
    out.topLeftCorner(n, n) = ek * F - F.transpose() * ek;
  } else if (degree == -1) {
    out.topRightCorner(n, n) = 0.5 * ek * A.transpose() * J;
    out.bottomLeftCorner(n, n) = 0.5 * J * A * ek;
  }
  return out;
}

}  // namespace

GSGELax assemble_gsge_lax(const Splitting& s, const GSGEData& d) {
  if (s.family != Family::TwistedUK || s.alg->half() != d.n)
    throw StructuralError("assemble_gsge_lax: splitting does not match data");
  if (d.orthogonality_residual() > 1e-8)
    throw DomainError("assemble_gsge_lax: A is not orthogonal");
  if (d.diagonal_residual() > 0.0)
    throw DomainError("assemble_gsge_lax: F has nonzero diagonal");
  const InvolutionSpec& s2 = s.alg->involution("sigma2");
  const NestedDecomposition& nd = *s.nested;
  const int n = d.n;
  GSGELax out;
  double ident = 0.0;
  const int coords[2] = {d.slice_axes.first, d.slice_axes.second};
  for (int c = 0; c < 2; ++c) {
    const int coord = coords[c];
    LoopField comp(d.A.axes(), d.A.boundary(), LoopElement::zero(s.alg));
    for (int t = 0; t < d.A.size(); ++t) {
      LoopElement e(s.alg);
      for (int deg : {-1, 0, 1}) {
        Mat m = gsge_block_component(d, coord, t, deg);
        if (m.norm() > 0.0) e.set_coeff(deg, m);
      }
      comp.flat(t) = e;

      // three-term route: g = diag(I, A), xi = offdiag(2 F^T; 2 F)
      const Mat& A = d.A.flat(t);
      const Mat& F = d.F.flat(t);
      Mat g = Mat::Identity(2 * n, 2 * n);
      g.bottomRightCorner(n, n) = A;
      Mat xi = Mat::Zero(2 * n, 2 * n);
      xi.topRightCorner(n, n) = 2.0 * F.transpose();
      xi.bottomLeftCorner(n, n) = 2.0 * F;
      const Mat& ak = s.cartan.basis.at(static_cast<size_t>(coord));
      Mat gi = g.inverse();
      Mat conj_a = g * ak * gi;
      ident = std::max(ident, (e.coeff(1) - conj_a).norm());
      ident = std::max(ident,
                       (e.coeff(0) - nd.S1.project(comm(ak, xi))).norm());
      ident = std::max(ident, (e.coeff(-1) - s2.apply(conj_a)).norm());
    }
    out.omega.names.push_back("x" + std::to_string(coord + 1));
    out.omega.comps.push_back(std::move(comp));
  }
  out.identity_residual = ident;
  out.identity_holds = ident < 1e-13;
  return out;
}

std::pair<MatField, MatField> gsge_residual(const GSGEData& d, DiffMethod diff) {
  (void)diff;
  const int n = d.n;
  const int p = d.slice_axes.first;
  const int q = d.slice_axes.second;
  // w components along the two slice coordinates: w_k = e_kk F - F^T e_kk
  MatField wp = d.F, wq = d.F;
  for (int t = 0; t < d.F.size(); ++t) {
    const Mat& F = d.F.flat(t);
    Mat ep = Mat::Zero(n, n), eq = Mat::Zero(n, n);
    ep(p, p) = 1.0;
    eq(q, q) = 1.0;
    wp.flat(t) = ep * F - F.transpose() * ep;
    wq.flat(t) = eq * F - F.transpose() * eq;
  }
  MatField dwq = d_axis(wq, 0);  // axis 0 carries x_{p}
  MatField dwp = d_axis(wp, 1);
  MatField gauss = d.F;
  for (int t = 0; t < d.F.size(); ++t) {
    const Mat& A = d.A.flat(t);
    Mat m = A.transpose() * unit_entry(n, 0, 0) * A;  // e11 pairing: a_1i a_1j
    Mat rhs = Mat::Zero(n, n);
    rhs(p, q) = m(p, q);
    rhs(q, p) = -m(q, p);
    gauss.flat(t) = dwq.flat(t) - dwp.flat(t) +
                    comm(wp.flat(t), wq.flat(t)) + 0.5 * rhs;
  }
  // Codazzi: A^{-1} d_k A = e_kk F^T - F e_kk along both slice axes, stacked
  MatField dA0 = d_axis(d.A, 0);
  MatField dA1 = d_axis(d.A, 1);
  MatField codazzi(d.F.axes(), d.F.boundary(), Mat::Zero(2 * n, n));
  for (int t = 0; t < d.F.size(); ++t) {
    const Mat& A = d.A.flat(t);
    const Mat& F = d.F.flat(t);
    Mat ep = Mat::Zero(n, n), eq = Mat::Zero(n, n);
    ep(p, p) = 1.0;
    eq(q, q) = 1.0;
    Mat rp = A.inverse() * dA0.flat(t) - (ep * F.transpose() - F * ep);
    Mat rq = A.inverse() * dA1.flat(t) - (eq * F.transpose() - F * eq);
    Mat st(2 * n, n);
    st.topRows(n) = rp;
    st.bottomRows(n) = rq;
    codazzi.flat(t) = st;
  }
  return {gauss, codazzi};
}

MatField build_F_from_metric(const MatField& a_row, int n,
                             std::pair<int, int> slice_axes, DiffMethod diff) {
  (void)diff;
  const int p = slice_axes.first;
  const int q = slice_axes.second;
  MatField d0 = d_axis(a_row, 0);
  MatField d1 = (a_row.dims() == 2) ? d_axis(a_row, 1) : d0;
  MatField F(a_row.axes(), a_row.boundary(), Mat::Zero(n, n));
  for (int t = 0; t < a_row.size(); ++t) {
    const Mat& row = a_row.flat(t);
    for (int j : {p, q}) {
      if (std::abs(row(0, j)) <= 1e-6) {
        std::vector<int> node;
        if (a_row.dims() == 1) {
          node = {t};
        } else {
          node = {t / a_row.count(1), t % a_row.count(1)};
        }
        throw SingularityError(
            "build_F_from_metric: a_1" + std::to_string(j + 1) +
                " vanishes at a grid node",
            node);
      }
    }
    Mat f = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      // f_ij = d(a_1i)/dx_j / a_1j for the slice coordinates
      if (i != p) f(i, p) = d0.flat(t)(0, i) / row(0, p);
      if (a_row.dims() == 2 && i != q) f(i, q) = d1.flat(t)(0, i) / row(0, q);
    }
    F.flat(t) = f;
  }
  return F;
}

GSGEData gsge_from_connection(const Splitting& s,
                              const std::vector<LoopField>& comps) {
  const int n = s.alg->half();
  if (static_cast<int>(comps.size()) != n)
    throw StructuralError("gsge_from_connection: need one component per coordinate");
  GSGEData d;
  d.n = n;
  d.A = MatField(comps[0].axes(), comps[0].boundary(), Mat::Zero(n, n));
  d.F = MatField(comps[0].axes(), comps[0].boundary(), Mat::Zero(n, n));
  for (int t = 0; t < comps[0].size(); ++t) {
    Mat A(n, n), F = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      Mat ll = comps[static_cast<size_t>(k)].flat(t).coeff(1).bottomLeftCorner(n, n);
      A.col(k) = 2.0 * ll.col(k);
      Mat ul = comps[static_cast<size_t>(k)].flat(t).coeff(0).topLeftCorner(n, n);
      for (int l = 0; l < n; ++l)
        if (l != k) F(k, l) = ul(k, l).real();
    }
    d.A.flat(t) = A;
    d.F.flat(t) = F;
  }
  return d;
}

}  // namespace loopsol
