#include "loopsol/factorization.hpp"

#include <json.hpp>

#include "loopsol/errors.hpp"

namespace loopsol {

Mat RationalLoop::eval(Cplx lambda) const {
  Mat v = value_at_inf;
  for (size_t k = 0; k < poles.size(); ++k) {
    Cplx d = lambda - poles[k];
    if (std::abs(d) < 1e-13)
      throw DomainError("rational loop evaluated at a pole");
    v += residues[k] / d;
  }
  return v;
}

Mat RationalLoop::eval_inverse(Cplx lambda) const {
  return eval(lambda).inverse();
}

LoopElement RationalLoop::to_band(int depth) const {
  LoopElement b(alg);
  b.set_coeff(0, value_at_inf);
  for (int k = 1; k <= depth; ++k) {
    Mat c = Mat::Zero(alg->size, alg->size);
    for (size_t p = 0; p < poles.size(); ++p)
      c += std::pow(poles[p], k - 1) * residues[p];
    b.add_coeff(-k, c);
  }
  b.trim(0.0);
  return b;
}

std::string RationalLoop::to_json() const {
  nlohmann::json j;
  j["algebra"] = alg->name;
  j["symmetry_tags"] = symmetry_tags;
  auto dump_mat = [](const Mat& m) {
    nlohmann::json flat = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c)
      for (int r = 0; r < m.rows(); ++r) {
        flat.push_back(m(r, c).real());
        flat.push_back(m(r, c).imag());
      }
    return flat;
  };
  j["value_at_inf"] = dump_mat(value_at_inf);
  j["poles"] = nlohmann::json::array();
  j["residues"] = nlohmann::json::array();
  for (size_t k = 0; k < poles.size(); ++k) {
    j["poles"].push_back({poles[k].real(), poles[k].imag()});
    j["residues"].push_back(dump_mat(residues[k]));
  }
  return j.dump();
}

RationalLoop RationalLoop::from_json(const std::string& text, AlgebraPtr a) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("algebra").get<std::string>() != a->name)
    throw StructuralError("rational loop algebra tag mismatch");
  RationalLoop f;
  f.alg = a;
  const int n = a->size;
  auto load_mat = [&](const nlohmann::json& flat) {
    Mat m(n, n);
    int k = 0;
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) {
        m(r, c) = Cplx(flat[k].get<double>(), flat[k + 1].get<double>());
        k += 2;
      }
    return m;
  };
  f.value_at_inf = load_mat(j.at("value_at_inf"));
  for (const auto& p : j.at("poles"))
    f.poles.push_back(Cplx(p[0].get<double>(), p[1].get<double>()));
  for (const auto& r : j.at("residues")) f.residues.push_back(load_mat(r));
  for (const auto& t : j.value("symmetry_tags", nlohmann::json::array()))
    f.symmetry_tags.push_back(t.get<std::string>());
  return f;
}

double rational_symmetry_residual(const Splitting& s, const RationalLoop& f,
                                  const std::vector<Cplx>& samples) {
  double worst = 0.0;
  const int n = s.alg->size;
  for (const Cplx& l : samples) {
    Mat fl = f.eval(l);
    if (s.family == Family::U || s.family == Family::UK ||
        s.family == Family::Standard) {
      // unitary reality: f(conj l)^H f(l) = I
      Mat g = f.eval(std::conj(l));
      worst = std::max(worst, (g.adjoint() * fl - Mat::Identity(n, n)).norm());
    } else if (s.family == Family::TwistedUK) {
      worst = std::max(worst, (f.eval(std::conj(l)).conjugate() - fl).norm());
      const InvolutionSpec& s1 = s.alg->involution("sigma1");
      worst = std::max(worst, (s1.apply(f.eval(-l)) - fl).norm());
      Mat J = Mat::Identity(n, n);
      J.bottomRightCorner(n / 2, n / 2) *= -1.0;
      worst = std::max(worst, (fl.transpose() * J * fl - J).norm());
    } else {
      throw UnsupportedError("rational loops for this family are not supported");
    }
  }
  return worst;
}

namespace {

Mat projector_from_direction(const CVec& v) {
  CVec u = v / v.norm();
  return u * u.adjoint();
}

/// Twisted o(n,n) residue solve: f = I + sum over the pole orbit, with
/// R(-p) = -sigma1(R(p)) and real residues, such that f^T J1 f = J1.
struct TwistedElementProblem {
  const Splitting& s;
  std::vector<Cplx> poles;  // {p, -p, 1/p, -1/p}
  int m;
  Mat J;

  explicit TwistedElementProblem(const Splitting& sp, double p)
      : s(sp), m(sp.alg->size) {
    poles = {Cplx(p, 0), Cplx(-p, 0), Cplx(1.0 / p, 0), Cplx(-1.0 / p, 0)};
    J = Mat::Identity(m, m);
    J.bottomRightCorner(m / 2, m / 2) *= -1.0;
  }

  int nvars() const { return 2 * m * m; }  // R at p and at 1/p, real

  std::vector<Mat> residues(const RVec& x) const {
    Mat R1 = Mat::Zero(m, m), R2 = Mat::Zero(m, m);
    int k = 0;
    for (int c = 0; c < m; ++c)
      for (int r = 0; r < m; ++r) R1(r, c) = x(k++);
    for (int c = 0; c < m; ++c)
      for (int r = 0; r < m; ++r) R2(r, c) = x(k++);
    const InvolutionSpec& s1 = s.alg->involution("sigma1");
    return {R1, -s1.apply(R1), R2, -s1.apply(R2)};
  }

  Mat eval(const RVec& x, Cplx l) const {
    std::vector<Mat> rs = residues(x);
    Mat f = Mat::Identity(m, m);
    for (size_t k = 0; k < poles.size(); ++k) f += rs[k] / (l - poles[k]);
    return f;
  }

  RVec equations(const RVec& x, const std::vector<Cplx>& samples,
                 double pin) const {
    std::vector<double> eq;
    for (const Cplx& l : samples) {
      Mat f = eval(x, l);
      Mat h = f.transpose() * J * f - J;
      for (int c = 0; c < m; ++c)
        for (int r = 0; r < m; ++r) {
          eq.push_back(h(r, c).real());
          eq.push_back(h(r, c).imag());
        }
    }
    // keep the element away from the identity
    double n1 = x.head(m * m).squaredNorm();
    double n2 = x.tail(m * m).squaredNorm();
    eq.push_back(3.0 * (n1 - pin * pin));
    eq.push_back(3.0 * (n2 - pin * pin));
    RVec v(static_cast<int>(eq.size()));
    for (size_t k = 0; k < eq.size(); ++k) v(static_cast<int>(k)) = eq[k];
    return v;
  }
};

RationalLoop solve_twisted_simple(const Splitting& s, double pole,
                                  uint64_t seed) {
  TwistedElementProblem prob(s, pole);
  std::vector<Cplx> samples;
  for (int k = 0; k < 9; ++k) {
    double ang = 0.37 + 0.61 * k;
    samples.push_back(Cplx(1.31 * std::cos(ang), 1.31 * std::sin(ang)));
    samples.push_back(Cplx(0.63 * std::cos(ang + 0.2), 0.63 * std::sin(ang + 0.2)));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.4, 0.4);
  const double pin = 0.5;
  RVec best;
  double best_res = 1e300;
  for (int attempt = 0; attempt < 12; ++attempt) {
    RVec x(prob.nvars());
    for (int k = 0; k < x.size(); ++k) x(k) = dist(rng);
    double lambda_damp = 1e-3;
    RVec r = prob.equations(x, samples, pin);
    for (int it = 0; it < 400; ++it) {
      // numeric Jacobian
      RMat Jm(r.size(), x.size());
      const double h = 1e-7;
      for (int k = 0; k < x.size(); ++k) {
        RVec xp = x;
        xp(k) += h;
        Jm.col(k) = (prob.equations(xp, samples, pin) - r) / h;
      }
      RMat A = Jm.transpose() * Jm +
               lambda_damp * RMat::Identity(x.size(), x.size());
      RVec step = A.ldlt().solve(-Jm.transpose() * r);
      RVec xn = x + step;
      RVec rn = prob.equations(xn, samples, pin);
      if (rn.norm() < r.norm()) {
        x = xn;
        r = rn;
        lambda_damp = std::max(lambda_damp * 0.5, 1e-12);
      } else {
        lambda_damp *= 8.0;
        if (lambda_damp > 1e8) break;
      }
      if (r.norm() < 1e-12) break;
    }
    if (r.norm() < best_res) {
      best_res = r.norm();
      best = x;
    }
    if (best_res < 1e-12) break;
  }
  if (best_res > 1e-9)
    throw FactorizationError(
        "simple_element: no twisted rational element found for this pole "
        "configuration (residual " + std::to_string(best_res) + ")",
        {});
  RationalLoop f;
  f.alg = s.alg;
  f.poles = prob.poles;
  f.residues = prob.residues(best);
  f.value_at_inf = Mat::Identity(s.alg->size, s.alg->size);
  f.symmetry_tags = {"tau", "sigma1", "orbit:neg,inv"};
  return f;
}

}  // namespace

RationalLoop simple_element(const Splitting& s, Cplx pole, const CVec& direction,
                            uint64_t seed) {
  if (s.family == Family::U || s.family == Family::Standard) {
    if (std::abs(pole.imag()) < 1e-12)
      throw DomainError("simple_element: pole must be off the real axis");
    RationalLoop f;
    f.alg = s.alg;
    Mat pi = projector_from_direction(direction);
    f.poles = {pole};
    f.residues = {(pole - std::conj(pole)) * pi};
    f.value_at_inf = Mat::Identity(s.alg->size, s.alg->size);
    f.symmetry_tags = {"tau"};
    return f;
  }
  if (s.family == Family::TwistedUK) {
    if (std::abs(std::abs(pole) - 1.0) < 1e-9)
      throw DomainError("simple_element: twisted pole must avoid |lambda| = 1");
    if (std::abs(pole.imag()) > 1e-12)
      throw UnsupportedError(
          "simple_element: only real twisted pole orbits {p,-p,1/p,-1/p} are "
          "supported");
    return solve_twisted_simple(s, pole.real(), seed);
  }
  throw UnsupportedError("simple_element: family not supported");
}

bool is_simple_probe(const Splitting& s, const RationalLoop& f) {
  (void)s;
  // single orbit <=> every pole is an image of the first under the family's
  // lambda involutions
  if (f.poles.empty()) return false;
  Cplx p0 = f.poles.front();
  for (const Cplx& p : f.poles) {
    bool image = std::abs(p - p0) < 1e-12 || std::abs(p - std::conj(p0)) < 1e-12 ||
                 std::abs(p + p0) < 1e-12 || std::abs(p + std::conj(p0)) < 1e-12 ||
                 std::abs(p - 1.0 / p0) < 1e-12 || std::abs(p + 1.0 / p0) < 1e-12;
    if (!image) return false;
  }
  return true;
}

std::optional<std::pair<RationalLoop, RationalLoop>> try_split_product(
    const Splitting& s, const RationalLoop& f) {
  if (f.poles.size() < 2) return std::nullopt;
  // recover the left factor from the residue column space at its pole
  for (size_t k = 0; k < f.poles.size(); ++k) {
    const Cplx p1 = f.poles[k];
    const Mat& res = f.residues[k];
    Eigen::JacobiSVD<Mat> svd(res, Eigen::ComputeThinU);
    if (svd.singularValues()(0) < 1e-12) continue;
    if (svd.singularValues().size() > 1 &&
        svd.singularValues()(1) > 1e-8 * svd.singularValues()(0))
      continue;  // not rank one
    CVec dir = svd.matrixU().col(0);
    RationalLoop f1;
    f1.alg = f.alg;
    f1.poles = {p1};
    f1.residues = {(p1 - std::conj(p1)) * projector_from_direction(dir)};
    f1.value_at_inf = Mat::Identity(s.alg->size, s.alg->size);
    f1.symmetry_tags = f.symmetry_tags;
    // g = f1^{-1} f must be pole-free at p1
    bool clean = true;
    for (double eps : {1e-4, 1e-5}) {
      Mat g1 = f1.eval_inverse(p1 + eps) * f.eval(p1 + eps);
      Mat g2 = f1.eval_inverse(p1 + 2 * eps) * f.eval(p1 + 2 * eps);
      if ((g1 - g2).norm() > 1e-2) clean = false;
    }
    if (!clean) continue;
    // rebuild the right factor from samples: g = I + R2/(lambda - p2)
    for (size_t l = 0; l < f.poles.size(); ++l) {
      if (l == k) continue;
      Cplx p2 = f.poles[l];
      Cplx sample = p2 + Cplx(0.05, 0.07);
      Mat g = f1.eval_inverse(sample) * f.eval(sample);
      Mat r2 = (g - Mat::Identity(s.alg->size, s.alg->size)) * (sample - p2);
      RationalLoop f2;
      f2.alg = f.alg;
      f2.poles = {p2};
      f2.residues = {r2};
      f2.value_at_inf = Mat::Identity(s.alg->size, s.alg->size);
      f2.symmetry_tags = f.symmetry_tags;
      // verify the split multiplicatively
      double worst = 0.0;
      for (const Cplx& lam : {Cplx(1.7, 0.3), Cplx(-0.9, 1.1), Cplx(0.2, -1.4)})
        worst = std::max(
            worst, (f1.eval(lam) * f2.eval(lam) - f.eval(lam)).norm());
      if (worst < 1e-8) return std::make_pair(f1, f2);
    }
  }
  return std::nullopt;
}

namespace {

/// Minus-inverse solve for untwisted splittings: find W = I + sum_{k>=1}
/// W_{-k} lambda^{-k} with (G W)_c = 0 for c = -1..-depth.
LoopElement solve_minus_inverse_untwisted(const LoopElement& G, int depth) {
  const int m = G.algebra()->size;
  const int nW = depth * m;
  Mat A = Mat::Zero(nW, nW);
  Mat rhs = Mat::Zero(nW, m);
  for (int row = 0; row < depth; ++row) {
    const int c = -(row + 1);
    for (int k = 1; k <= depth; ++k)
      A.block(row * m, (k - 1) * m, m, m) = G.coeff(c + k);
    rhs.block(row * m, 0, m, m) = -G.coeff(c);
  }
  Mat X = A.fullPivLu().solve(rhs);
  LoopElement W(G.algebra());
  W.set_coeff(0, Mat::Identity(m, m));
  for (int k = 1; k <= depth; ++k) {
    Mat wk = X.block((k - 1) * m, 0, m, m);
    if (wk.norm() > 0) W.set_coeff(-k, wk);
  }
  return W;
}

/// Minus-inverse solve for the twisted o(n,n) splitting in mu = lambda/rho
/// coordinates: W real with the parity pattern, W_0 = diag(I, B0), such that
/// E = G W satisfies the mirror conditions E_{-k} = rho^{-2k} sigma2(E_k)
/// and the boundary normalization at lambda = 1 (lower-right block identity).
LoopElement solve_minus_inverse_twisted(const Splitting& s,
                                        const LoopElement& G, int depth,
                                        double rho) {
  const int m = s.alg->size;
  const int n = m / 2;
  const InvolutionSpec& s2 = s.alg->involution("sigma2");

  // unknown basis: per degree the parity-allowed real elementary matrices
  struct Var {
    int deg;
    Mat basis;
  };
  std::vector<Var> vars;
  auto block_diag_pattern = [&](int i, int j) {
    return (i < n && j < n) || (i >= n && j >= n);
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      vars.push_back({0, unit_entry(m, n + i, n + j)});  // B0 block
  for (int k = 1; k <= depth; ++k) {
    const bool even = (k % 2 == 0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (block_diag_pattern(i, j) == even)
          vars.push_back({-k, unit_entry(m, i, j)});
  }
  const int nv = static_cast<int>(vars.size());

  const int kmax = std::max(G.hi(), 1);
  // rows: mirror conditions for k = 1..kmax plus the lambda = 1 block
  Mat W0fix = Mat::Zero(m, m);
  W0fix.topLeftCorner(n, n) = Mat::Identity(n, n);

  auto gw_coeff = [&](const Mat& wbasis, int wdeg, int c) -> Mat {
    return G.coeff(c - wdeg) * wbasis;
  };

  const int rows_mirror = kmax * m * m;
  const int rows_bound = (n - 1) * (n - 1) + 2 * (n + 1) * (n - 1);
  RMat A = RMat::Zero(2 * (rows_mirror + rows_bound), nv);
  RVec b = RVec::Zero(2 * (rows_mirror + rows_bound));

  auto fill = [&](int row0, const Mat& contrib, bool to_rhs) {
    // contributions are stacked entrywise, real then imaginary
    int r = row0;
    for (int jj = 0; jj < contrib.cols(); ++jj)
      for (int ii = 0; ii < contrib.rows(); ++ii) {
        if (to_rhs) {
          b(r) -= contrib(ii, jj).real();
          b(r + 1) -= contrib(ii, jj).imag();
        }
        r += 2;
      }
    return row0;
  };
  auto fill_col = [&](int col, int row0, const Mat& contrib) {
    int r = row0;
    for (int jj = 0; jj < contrib.cols(); ++jj)
      for (int ii = 0; ii < contrib.rows(); ++ii) {
        A(r, col) += contrib(ii, jj).real();
        A(r + 1, col) += contrib(ii, jj).imag();
        r += 2;
      }
  };

  for (int k = 1; k <= kmax; ++k) {
    const int row0 = 2 * (k - 1) * m * m;
    const double w = std::pow(rho, -2 * k);
    for (int v = 0; v < nv; ++v) {
      Mat c = gw_coeff(vars[v].basis, vars[v].deg, -k) -
              w * s2.apply(gw_coeff(vars[v].basis, vars[v].deg, k));
      fill_col(v, row0, c);
    }
    Mat cfix = gw_coeff(W0fix, 0, -k) - w * s2.apply(gw_coeff(W0fix, 0, k));
    fill(row0, cfix, true);
  }
  {
    // boundary value at lambda = 1 (mu = 1/rho): using the mirror relations,
    //   E(1) = E_0 + sum_{k>0} rho^{-k} (E_k + sigma2(E_k));
    // lower-right block = I and off blocks (w.r.t. (n+1, n-1)) vanish
    const int row0 = 2 * rows_mirror;
    auto boundary_sum = [&](const Mat& wbasis, int wdeg) {
      Mat e = gw_coeff(wbasis, wdeg, 0);
      for (int k = 1; k <= kmax; ++k) {
        Mat ek = gw_coeff(wbasis, wdeg, k);
        e += std::pow(rho, -k) * (ek + s2.apply(ek));
      }
      return e;
    };
    auto bound_part = [&](const Mat& e1) {
      Mat out = Mat::Zero(rows_bound, 1);
      int t = 0;
      for (int i = n + 1; i < m; ++i)
        for (int j = n + 1; j < m; ++j) out(t++, 0) = e1(i, j);
      for (int i = 0; i <= n; ++i)
        for (int j = n + 1; j < m; ++j) {
          out(t++, 0) = e1(i, j);
          out(t++, 0) = e1(j, i);
        }
      return out;
    };
    for (int v = 0; v < nv; ++v)
      fill_col(v, row0, bound_part(boundary_sum(vars[v].basis, vars[v].deg)));
    Mat efix = bound_part(boundary_sum(W0fix, 0));
    // target: identity on the lower-right diagonal
    Mat target = Mat::Zero(rows_bound, 1);
    int t = 0;
    for (int i = n + 1; i < m; ++i)
      for (int j = n + 1; j < m; ++j) target(t++, 0) = (i == j) ? 1.0 : 0.0;
    fill(row0, efix - target, true);
  }

  // small-norm solution of the truncated system: the exact minus factor has
  // rapidly decaying mu-coefficients, so ridge-damping the weakly determined
  // deep unknowns reproduces it
  RMat ata = A.transpose() * A;
  const double ridge = 1e-18 * std::max(1.0, ata.trace());
  ata.diagonal().array() += ridge;
  RVec x = ata.ldlt().solve(A.transpose() * b);
  LoopElement W(s.alg);
  W.set_coeff(0, W0fix);
  for (int v = 0; v < nv; ++v) {
    Mat c = W.coeff(vars[v].deg);
    c += x(v) * vars[v].basis;
    W.set_coeff(vars[v].deg, c);
  }
  W.trim(1e-300);
  return W;
}

NodeFactorization factorize_with_depth(const Splitting& s, const LoopElement& G,
                                       int depth, double rho) {
  NodeFactorization out;
  out.depth = depth;
  out.scale = rho;
  LoopElement W = s.twisted() ? solve_minus_inverse_twisted(s, G, depth, rho)
                              : solve_minus_inverse_untwisted(G, depth);
  LoopElement E = loop_mul(G, W, 0, G.hi() + 1);
  if (!s.twisted()) {
    E = E.band(0, std::max(E.hi(), 0));
  } else {
    // mirror completion: keep degrees >= 0, reflect through sigma2 with the
    // mu-coordinate weights
    const InvolutionSpec& s2 = *s.mirror();
    LoopElement Epos = E.band(0, E.hi());
    LoopElement Eneg(s.alg);
    for (const auto& [d, c] : Epos.coeffs())
      if (d > 0) Eneg.add_coeff(-d, std::pow(rho, -2 * d) * s2.apply(c));
    E = Epos + Eneg;
  }
  E.trim(1e-300);
  out.plus = E;
  out.minus = loop_inverse_band(W, depth);
  // ignore defects below the truncation floor
  const int floor = -depth + 2;
  LoopElement recon = loop_mul(out.plus, out.minus, floor, G.hi() + 2);
  recon -= G.band(floor, G.hi() + 2);
  double scale = std::max(1.0, G.norm());
  out.residual = recon.norm() / scale;
  out.ok = true;
  return out;
}

}  // namespace

LoopElement scale_band(const LoopElement& x, double rho) {
  LoopElement out(x.algebra());
  for (const auto& [d, c] : x.coeffs())
    out.set_coeff(d, std::pow(rho, d) * c);
  return out;
}

namespace {

double auto_twist_scale(const LoopElement& G) {
  // heuristic: growth rate of the negative tail bounds the outermost pole
  double rate = 1.0;
  for (int k = 2; k <= -G.lo(); ++k) {
    double a = G.coeff(-k).norm(), b = G.coeff(-(k - 1)).norm();
    if (a > 1e-12 && b > 1e-12) rate = std::max(rate, a / b);
  }
  return 2.5 * rate;
}

}  // namespace

NodeFactorization birkhoff_factorize_node(const Splitting& s,
                                          const LoopElement& G,
                                          FactorizeOptions opt) {
  double rho = 1.0;
  LoopElement Gs = G;
  if (s.twisted()) {
    rho = opt.twist_scale > 0 ? opt.twist_scale : auto_twist_scale(G);
    if (!opt.input_scaled && rho != 1.0) Gs = scale_band(G, 1.0 / rho);
  }
  NodeFactorization best;
  best.ok = false;
  best.residual = 1e300;
  int depth = opt.depth;
  while (true) {
    NodeFactorization cur;
    try {
      cur = factorize_with_depth(s, Gs, depth, rho);
    } catch (const std::exception&) {
      cur.ok = false;
      cur.residual = 1e300;
    }
    if (cur.residual < best.residual) best = cur;
    if (best.residual < opt.tol || !opt.escalate) break;
    if (depth >= opt.depth_cap) break;
    depth = std::min(opt.depth_cap, depth + std::max(4, depth / 2));
  }
  best.ok = best.residual < std::max(opt.tol, 1e-6);
  return best;
}

FactorizationResult birkhoff_factorize(const Splitting& s,
                                       const GridField<LoopElement>& G,
                                       FactorizeOptions opt) {
  FactorizationResult out;
  out.plus = G;
  out.minus = G;
  out.ok = GridField<uint8_t>(G.axes(), G.boundary(), 1);
  for (int t = 0; t < G.size(); ++t) {
    NodeFactorization nf = birkhoff_factorize_node(s, G.flat(t), opt);
    out.plus.flat(t) = nf.plus;
    out.minus.flat(t) = nf.minus;
    out.ok.flat(t) = nf.ok ? 1 : 0;
    out.depth_used = std::max(out.depth_used, nf.depth);
    if (nf.ok)
      out.max_residual = std::max(out.max_residual, nf.residual);
    else
      ++out.failures;
  }
  return out;
}

double factorization_uniqueness_probe(const Splitting& s, const LoopElement& G,
                                      FactorizeOptions opt) {
  NodeFactorization a = birkhoff_factorize_node(s, G, opt);
  FactorizeOptions o2 = opt;
  o2.depth = std::min(opt.depth_cap, opt.depth + 6);
  o2.escalate = false;
  NodeFactorization b = birkhoff_factorize_node(s, G, o2);
  if (!a.ok || !b.ok)
    throw FactorizationError("uniqueness probe: factorization failed", {});
  LoopElement d = a.minus - b.minus;
  d = d.band(-opt.depth + 2, 0);
  return d.norm();
}

FrameView vacuum_frame_view(const HierarchyInstance& h, int i, int j,
                            std::vector<Axis> axes) {
  FrameView v;
  v.axes = axes;
  HierarchyInstance hh = h;
  v.eval = [hh, i, j, axes](int a, int b, Cplx lambda) {
    const double x = axes[0].coord(a);
    const double t = axes.size() > 1 ? axes[1].coord(b) : 0.0;
    return vacuum_frame_value(hh, i, j, x, t, lambda);
  };
  return v;
}

InverseScattering formal_inverse_scattering(const HierarchyInstance& h,
                                            const RationalLoop& f,
                                            const std::vector<Axis>& axes,
                                            int flow_i, int flow_j,
                                            FactorizeOptions opt) {
  const Splitting& s = h.split;
  const int band_cap = kMaxBandWidth / 2 - 1;

  // twisted pole orbits reach outside the unit circle; factor on a circle
  // enclosing them (mu = lambda / rho coordinates)
  double rho = 1.0;
  if (s.twisted()) {
    double pmax = 1.0;
    for (const Cplx& p : f.poles) pmax = std::max(pmax, std::abs(p));
    rho = opt.twist_scale > 0 ? opt.twist_scale : 2.5 * pmax;
  }
  RationalLoop fmu = f;
  for (size_t k = 0; k < fmu.poles.size(); ++k) {
    fmu.poles[k] /= rho;
    fmu.residues[k] /= rho;
  }
  LoopElement fband = fmu.to_band(std::min(opt.depth_cap, band_cap));

  // vacuum generators per coordinate, in mu coordinates
  std::vector<LoopElement> gens;
  if (s.twisted()) {
    for (int k = 1; k <= static_cast<int>(axes.size()); ++k)
      gens.push_back(scale_band(s.vacuum_generator(k, 1), rho));
  } else {
    gens.push_back(h.J1);
    if (axes.size() > 1) gens.push_back(s.vacuum_generator(flow_i, flow_j));
  }

  GridField<LoopElement> G(axes, Boundary::Decaying, LoopElement::zero(s.alg));
  const int n0 = axes[0].count;
  const int n1 = axes.size() > 1 ? axes[1].count : 1;
  for (int a = 0; a < n0; ++a)
    for (int b = 0; b < n1; ++b) {
      LoopElement arg = gens[0];
      arg *= Cplx(axes[0].coord(a), 0);
      if (axes.size() > 1) {
        LoopElement t2 = gens[1];
        t2 *= Cplx(axes[1].coord(b), 0);
        arg += t2;
      }
      LoopElement V = loop_exp_commuting(arg, band_cap);
      LoopElement fv = loop_mul(fband, V, -band_cap, band_cap);
      fv.trim(1e-300);
      if (axes.size() > 1)
        G.at(a, b) = fv;
      else
        G.at(a) = fv;
    }

  FactorizeOptions node_opt = opt;
  node_opt.twist_scale = rho;
  node_opt.input_scaled = true;
  FactorizationResult fr = birkhoff_factorize(s, G, node_opt);
  InverseScattering out;
  out.E_band = fr.plus;
  out.M_band = fr.minus;
  out.ok = fr.ok;
  out.max_residual = fr.max_residual;
  out.failures = fr.failures;

  const size_t ncomp = s.twisted() ? axes.size() : 1;
  for (size_t c = 0; c < ncomp; ++c) {
    LoopField comp(axes, Boundary::Decaying, LoopElement::zero(s.alg));
    const LoopElement& gen = s.twisted() ? gens[c] : gens[0];
    for (int t = 0; t < comp.size(); ++t) {
      if (!fr.ok.flat(t)) continue;
      const LoopElement& M = fr.minus.flat(t);
      LoopElement Minv = loop_inverse_band(M, fr.depth_used);
      LoopElement mg = loop_mul(M, gen);
      LoopElement conj = loop_mul(mg, Minv, -2, 2).band(-1, 1);
      if (rho != 1.0) conj = scale_band(conj, 1.0 / rho);
      comp.flat(t) = s.project_plus_raw(conj);
    }
    out.components.push_back(std::move(comp));
  }
  return out;
}

SU2Dressing dress_su2(const HierarchyInstance& h, const RationalLoop& f,
                      const FrameView& E, const LoopField& base_P) {
  if (h.split.alg->size != 2 ||
      (h.split.family != Family::U && h.split.family != Family::UK))
    throw UnsupportedError("dress_su2 requires the rank-one unitary family");
  if (f.poles.size() != 1)
    throw UnsupportedError("dress_su2 requires a one-pole simple element");
  const Cplx pole = f.poles[0];
  const Cplx s = pole - std::conj(pole);
  Mat pi = f.residues[0] / s;

  CVec v0(2);
  {
    Eigen::JacobiSVD<Mat> svd(pi, Eigen::ComputeThinU);
    v0 = svd.matrixU().col(0);
  }
  const Mat a1 = h.split.cartan.regular();
  SU2Dressing out;
  out.f = f;
  const auto& axes = E.axes;
  const int n0 = axes[0].count;
  const int n1 = axes.size() > 1 ? axes[1].count : 1;
  std::vector<Axis> gaxes = axes;
  out.pitilde = GridField<Mat>(gaxes, base_P.boundary(), Mat::Zero(2, 2));
  out.Ptilde = LoopField(gaxes, base_P.boundary(), LoopElement::zero(h.split.alg));
  for (int a = 0; a < n0; ++a)
    for (int b = 0; b < n1; ++b) {
      Mat Ev = E.eval(a, b, std::conj(pole));
      CVec w = Ev.fullPivLu().solve(v0);
      w /= w.norm();
      Mat pt = w * w.adjoint();
      const int flat = a * n1 + b;
      out.pitilde.flat(flat) = pt;
      const LoopElement& base =
          base_P.size() == n0 * n1 ? base_P.flat(flat) : base_P.flat(a);
      Mat u = base.coeff(0);
      Mat ut = u + s * comm(pt, a1);
      LoopElement p(h.split.alg);
      p.set_coeff(1, a1);
      p.set_coeff(0, ut);
      out.Ptilde.flat(flat) = p;
    }

  GridField<Mat> pit = out.pitilde;
  FrameView ev;
  ev.axes = axes;
  RationalLoop fcopy = f;
  FrameView Ecopy = E;
  ev.eval = [fcopy, Ecopy, pit, pole, s, n1](int a, int b, Cplx lambda) -> Mat {
    const Mat& pt = pit.flat(a * n1 + b);
    Mat ftilde_inv = Mat::Identity(2, 2) +
                     (std::conj(pole) - pole) / (lambda - std::conj(pole)) * pt;
    Mat out = fcopy.eval(lambda) * Ecopy.eval(a, b, lambda) * ftilde_inv;
    return out;
  };
  out.Etilde = ev;

  // pointwise check of f E = Etilde ftilde at a few nodes and lambdas
  double worst = 0.0;
  for (int a : {0, n0 / 2, n0 - 1})
    for (const Cplx& l : {Cplx(0.9, 0.2), Cplx(-1.3, 0.4)}) {
      int b = n1 / 2;
      const Mat& pt = out.pitilde.flat(a * n1 + b);
      Mat ftilde = Mat::Identity(2, 2) + s / (l - pole) * pt;
      Mat lhs = f.eval(l) * E.eval(a, b, l);
      Mat rhs = out.Etilde.eval(a, b, l) * ftilde;
      worst = std::max(worst, (lhs - rhs).norm());
    }
  out.pointwise_residual = worst;
  return out;
}

RationalLoop dressed_simple_element(const SU2Dressing& d, int i, int j) {
  RationalLoop f;
  f.alg = d.f.alg;
  const Cplx pole = d.f.poles[0];
  const int n1 = d.pitilde.dims() > 1 ? d.pitilde.count(1) : 1;
  const Mat& pt = d.pitilde.flat(i * n1 + j);
  f.poles = {pole};
  f.residues = {(pole - std::conj(pole)) * pt};
  f.value_at_inf = Mat::Identity(2, 2);
  f.symmetry_tags = d.f.symmetry_tags;
  return f;
}

}  // namespace loopsol
