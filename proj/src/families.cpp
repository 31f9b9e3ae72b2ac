#include "loopsol/errors.hpp"
#include "loopsol/loop.hpp"

namespace loopsol {

namespace {

const Cplx kI(0.0, 1.0);

std::vector<Mat> su_basis(int n) {
  std::vector<Mat> b;
  for (int k = 0; k + 1 < n; ++k)
    b.push_back(kI * (unit_entry(n, k, k) - unit_entry(n, k + 1, k + 1)));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      b.push_back(unit_entry(n, i, j) - unit_entry(n, j, i));
      b.push_back(kI * (unit_entry(n, i, j) + unit_entry(n, j, i)));
    }
  return b;
}

std::vector<Mat> so_basis(int n) {
  std::vector<Mat> b;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      b.push_back(unit_entry(n, i, j) - unit_entry(n, j, i));
  return b;
}

std::vector<Mat> sl_real_basis(int n) {
  std::vector<Mat> b;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) b.push_back(unit_entry(n, i, j));
  for (int k = 0; k + 1 < n; ++k)
    b.push_back(unit_entry(n, k, k) - unit_entry(n, k + 1, k + 1));
  return b;
}

std::vector<Mat> upper_triangular_traceless_basis(int n) {
  std::vector<Mat> b;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) b.push_back(unit_entry(n, i, j));
  for (int k = 0; k + 1 < n; ++k)
    b.push_back(unit_entry(n, k, k) - unit_entry(n, k + 1, k + 1));
  return b;
}

Mat onn_metric(int n) {
  Mat j = Mat::Identity(2 * n, 2 * n);
  j.bottomRightCorner(n, n) *= -1.0;
  return j;
}

// real o(n,n): [[a, b], [b^T, d]] with a, d in o(n), b arbitrary
std::vector<Mat> onn_real_basis(int n) {
  const int m = 2 * n;
  std::vector<Mat> b;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      b.push_back(unit_entry(m, i, j) - unit_entry(m, j, i));
      b.push_back(unit_entry(m, n + i, n + j) - unit_entry(m, n + j, n + i));
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      b.push_back(unit_entry(m, i, n + j) + unit_entry(m, n + j, i));
  return b;
}

InvolutionSpec tau_compact(int size) {
  InvolutionSpec s;
  s.symbol = "tau";
  s.op = MatOp::ConjTranspose;
  s.sign = -1.0;
  s.lambda_action = LambdaAction::Conj;
  (void)size;
  return s;
}

InvolutionSpec tau_realform() {
  InvolutionSpec s;
  s.symbol = "tau";
  s.op = MatOp::Conj;
  s.sign = 1.0;
  s.lambda_action = LambdaAction::Conj;
  return s;
}

InvolutionSpec sigma_negtranspose(LambdaAction act) {
  InvolutionSpec s;
  s.symbol = "sigma";
  s.op = MatOp::Transpose;
  s.sign = -1.0;
  s.lambda_action = act;
  return s;
}

InvolutionSpec sigma_conjugation(const std::string& symbol, const Mat& c,
                                 LambdaAction act) {
  InvolutionSpec s;
  s.symbol = symbol;
  s.C = c;
  s.op = MatOp::None;
  s.sign = 1.0;
  s.lambda_action = act;
  return s;
}

}  // namespace

Splitting make_standard_splitting(int n) {
  Splitting s;
  s.family = Family::Standard;
  auto alg = std::make_shared<AlgebraDescriptor>();
  alg->name = "sl(n,C)";
  alg->size = n;
  alg->rank = n - 1;
  s.alg = alg;
  Subspace ambient = Subspace::span(alg->complex_basis());
  std::vector<Mat> cart;
  for (int k = 0; k + 1 < n; ++k) {
    Mat h = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) h(i, i) = static_cast<double>(n - 1 - 2 * i);
    if (k == 0) {
      cart.push_back(h);
      cart.push_back(kI * h);
    } else {
      Mat g = unit_entry(n, k, k) - unit_entry(n, k + 1, k + 1);
      cart.push_back(g);
      cart.push_back(kI * g);
    }
  }
  s.cartan = CartanData::make(cart, ambient, 0);
  s.cartan.verify();
  return s;
}

Splitting make_u_splitting_su(int n) {
  Splitting s;
  s.family = Family::U;
  auto alg = std::make_shared<AlgebraDescriptor>();
  alg->name = "sl(n,C)";
  alg->size = n;
  alg->rank = n - 1;
  alg->involutions.push_back(tau_compact(n));
  s.alg = alg;
  s.tau_symbol = "tau";
  Subspace u = Subspace::span(su_basis(n));
  std::vector<Mat> cart;
  // i diag with distinct entries; n = 2 gives diag(i, -i)
  for (int k = 0; k + 1 < n; ++k) {
    Mat a = Mat::Zero(n, n);
    if (k == 0) {
      for (int i = 0; i < n; ++i) a(i, i) = kI * Cplx(n - 1 - 2 * i, 0.0);
    } else {
      a = kI * (unit_entry(n, k, k) - unit_entry(n, k + 1, k + 1));
    }
    cart.push_back(a);
  }
  s.cartan = CartanData::make(cart, u, 0);
  s.cartan.verify();
  return s;
}

Splitting make_uk_splitting_su_so(int n) {
  Splitting s;
  s.family = Family::UK;
  auto alg = std::make_shared<AlgebraDescriptor>();
  alg->name = "sl(n,C)";
  alg->size = n;
  alg->rank = n - 1;
  alg->involutions.push_back(tau_compact(n));
  alg->involutions.push_back(sigma_negtranspose(LambdaAction::Negate));
  s.alg = alg;
  s.tau_symbol = "tau";
  s.sigma_symbol = "sigma";
  Subspace u = Subspace::span(su_basis(n));
  // K = so(n), P = i * (real symmetric traceless)
  s.K = Subspace::span(so_basis(n));
  std::vector<Mat> pgens;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      if (i == j) {
        if (i + 1 < n)
          pgens.push_back(kI *
                          (unit_entry(n, i, i) - unit_entry(n, i + 1, i + 1)));
      } else {
        pgens.push_back(kI * (unit_entry(n, i, j) + unit_entry(n, j, i)));
      }
    }
  s.P = Subspace::span(pgens);
  std::vector<Mat> cart;
  for (int k = 0; k + 1 < n; ++k) {
    Mat a = Mat::Zero(n, n);
    if (k == 0)
      for (int i = 0; i < n; ++i) a(i, i) = kI * Cplx(n - 1 - 2 * i, 0.0);
    else
      a = kI * (unit_entry(n, k, k) - unit_entry(n, k + 1, k + 1));
    cart.push_back(a);
  }
  s.cartan = CartanData::make(cart, *s.P, 0);
  s.cartan.verify();
  return s;
}

Splitting make_twisted_u_splitting_sl(int n) {
  Splitting s;
  s.family = Family::TwistedU;
  auto alg = std::make_shared<AlgebraDescriptor>();
  alg->name = "sl(n,C)";
  alg->size = n;
  alg->rank = n - 1;
  alg->involutions.push_back(tau_realform());
  alg->involutions.push_back(sigma_negtranspose(LambdaAction::Invert));
  IwasawaData iw;
  iw.K = Subspace::span(so_basis(n));
  iw.B = Subspace::span(upper_triangular_traceless_basis(n));
  alg->iwasawa = iw;
  s.alg = alg;
  s.tau_symbol = "tau";
  s.sigma_symbol = "sigma";
  s.mirror_symbol = "sigma";
  s.K = alg->iwasawa->K;
  s.B = alg->iwasawa->B;
  Subspace u = Subspace::span(sl_real_basis(n));
  // diagonal traceless with distinct entries first
  std::vector<Mat> cart;
  for (int k = 0; k + 1 < n; ++k) {
    Mat a = Mat::Zero(n, n);
    if (k == 0)
      for (int i = 0; i < n; ++i) a(i, i) = Cplx(n - 1 - 2 * i, 0.0);
    else
      a = unit_entry(n, k, k) - unit_entry(n, k + 1, k + 1);
    cart.push_back(a);
  }
  s.cartan = CartanData::make(cart, u, 0);
  s.cartan.verify();
  return s;
}

Splitting make_twisted_uk_splitting_onn(int n) {
  Splitting s;
  s.family = Family::TwistedUK;
  const int m = 2 * n;
  auto alg = std::make_shared<AlgebraDescriptor>();
  alg->name = "o(n,n,C)";
  alg->size = m;
  alg->rank = n;
  alg->involutions.push_back(tau_realform());
  Mat j1 = onn_metric(n);
  Mat j2 = Mat::Identity(m, m);
  for (int i = n + 1; i < m; ++i) j2(i, i) = -1.0;
  alg->involutions.push_back(
      sigma_conjugation("sigma1", j1, LambdaAction::Negate));
  alg->involutions.push_back(
      sigma_conjugation("sigma2", j2, LambdaAction::Invert));
  s.alg = alg;
  s.tau_symbol = "tau";
  s.sigma_symbol = "sigma1";
  s.mirror_symbol = "sigma2";

  Subspace u = Subspace::span(onn_real_basis(n));
  const InvolutionSpec& s1 = alg->involution("sigma1");
  const InvolutionSpec& s2 = alg->involution("sigma2");
  std::vector<Mat> k1g, p1g, k2g, p2g;
  for (const Mat& g : u.basis()) {
    auto [f1, a1] = eigenspace_split(s1, g);
    if (f1.norm() > 1e-12) k1g.push_back(f1);
    if (a1.norm() > 1e-12) p1g.push_back(a1);
    auto [f2, a2] = eigenspace_split(s2, g);
    if (f2.norm() > 1e-12) k2g.push_back(f2);
    if (a2.norm() > 1e-12) p2g.push_back(a2);
  }
  Subspace k1 = Subspace::span(k1g);
  Subspace p1 = Subspace::span(p1g);
  Subspace k2 = Subspace::span(k2g);
  Subspace p2 = Subspace::span(p2g);
  // S1 = o(n) x 0, K1' = 0 x o(n)
  std::vector<Mat> s1g, k1pg;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      s1g.push_back(unit_entry(m, i, j) - unit_entry(m, j, i));
      k1pg.push_back(unit_entry(m, n + i, n + j) - unit_entry(m, n + j, n + i));
    }
  s.nested = NestedDecomposition::build(u, k1, p1, k2, p2, Subspace::span(s1g),
                                        Subspace::span(k1pg));
  s.K = k1;
  s.P = p1;

  // A = { offdiag(D; D) }, basis a_i = (1/2) offdiag(e_ii; e_ii)
  std::vector<Mat> cart;
  for (int i = 0; i < n; ++i) {
    Mat a = Mat::Zero(m, m);
    a(i, n + i) = 0.5;
    a(n + i, i) = 0.5;
    cart.push_back(a);
  }
  s.cartan = CartanData::make(cart, p1, 0);
  // a_1 = (1/2) offdiag(e_11; e_11) is regular only for n = 2; higher flows
  // use an explicit regular direction sum c_i a_i instead.
  if (n == 2) s.cartan.verify();
  return s;
}

Splitting make_splitting(Family f, int n) {
  switch (f) {
    case Family::Standard: return make_standard_splitting(n);
    case Family::U: return make_u_splitting_su(n);
    case Family::UK: return make_uk_splitting_su_so(n);
    case Family::TwistedU: return make_twisted_u_splitting_sl(n);
    case Family::TwistedUK: return make_twisted_uk_splitting_onn(n);
  }
  throw UsageError("unknown family");
}

}  // namespace loopsol
