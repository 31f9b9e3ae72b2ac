#include "loopsol/algebra.hpp"

#include <json.hpp>

#include "loopsol/errors.hpp"

namespace loopsol {

Mat InvolutionSpec::apply(const Mat& x) const {
  Mat y;
  switch (op) {
    case MatOp::None:
      y = x;
      break;
    case MatOp::Transpose:
      y = x.transpose();
      break;
    case MatOp::Conj:
      y = x.conjugate();
      break;
    case MatOp::ConjTranspose:
      y = x.adjoint();
      break;
  }
  if (C.size() > 0) y = C * y * C.inverse();
  return sign * y;
}

std::pair<Mat, Mat> IwasawaData::split(const Mat& x) {
  const int n = static_cast<int>(x.rows());
  Mat k = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      k(i, j) = x(i, j);
      k(j, i) = -x(i, j);
    }
  return {k, x - k};
}

double AlgebraDescriptor::identity_residual(const Mat& x) const {
  if (x.rows() != size || x.cols() != size)
    throw StructuralError("element shape does not match algebra " + name);
  if (name == "gl(n,C)") return 0.0;
  if (name == "sl(n,C)") return std::abs(x.trace());
  if (name == "o(n,n,C)") {
    const int n = size / 2;
    Mat J = Mat::Identity(size, size);
    J.bottomRightCorner(n, n) *= -1.0;
    return (x.transpose() * J + J * x).norm();
  }
  throw StructuralError("unknown algebra name: " + name);
}

bool AlgebraDescriptor::has_involution(const std::string& sym) const {
  for (const auto& s : involutions)
    if (s.symbol == sym) return true;
  return false;
}

const InvolutionSpec& AlgebraDescriptor::involution(const std::string& sym) const {
  for (const auto& s : involutions)
    if (s.symbol == sym) return s;
  throw StructuralError("involution '" + sym + "' not registered on " + name);
}

std::vector<Mat> AlgebraDescriptor::complex_basis() const {
  std::vector<Mat> gens;
  const Cplx I1(0.0, 1.0);
  if (name == "gl(n,C)" || name == "sl(n,C)") {
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        if (name == "sl(n,C)" && i == j) continue;
        gens.push_back(unit_entry(size, i, j));
        gens.push_back(unit_entry(size, i, j, I1));
      }
    if (name == "sl(n,C)") {
      for (int i = 0; i + 1 < size; ++i) {
        Mat h = unit_entry(size, i, i) - unit_entry(size, i + 1, i + 1);
        gens.push_back(h);
        gens.push_back(I1 * h);
      }
    }
  } else if (name == "o(n,n,C)") {
    const int n = size / 2;
    auto push = [&](const Mat& m) {
      gens.push_back(m);
      gens.push_back(I1 * m);
    };
    // X = [[a, b], [b^T, d]], a and d antisymmetric, b arbitrary
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) {
        Mat a = Mat::Zero(size, size);
        a(i, j) = 1.0;
        a(j, i) = -1.0;
        push(a);
        Mat d = Mat::Zero(size, size);
        d(n + i, n + j) = 1.0;
        d(n + j, n + i) = -1.0;
        push(d);
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Mat b = Mat::Zero(size, size);
        b(i, n + j) = 1.0;
        b(n + j, i) = 1.0;
        push(b);
      }
  } else {
    throw StructuralError("unknown algebra name: " + name);
  }
  return gens;
}

Mat bracket(const AlgebraDescriptor& alg, const Mat& x, const Mat& y) {
  if (x.rows() != alg.size || x.cols() != alg.size || y.rows() != alg.size ||
      y.cols() != alg.size)
    throw StructuralError("bracket: dimension mismatch with " + alg.name);
  return comm(x, y);
}

Mat apply_involution(const AlgebraDescriptor& alg, const InvolutionSpec& spec,
                     const Mat& x) {
  if (!alg.has_involution(spec.symbol))
    throw StructuralError("involution '" + spec.symbol +
                          "' not registered on " + alg.name);
  if (x.rows() != alg.size || x.cols() != alg.size)
    throw StructuralError("apply_involution: dimension mismatch");
  return spec.apply(x);
}

std::pair<Mat, Mat> eigenspace_split(const InvolutionSpec& spec, const Mat& x) {
  Mat fx = spec.apply(x);
  return {(x + fx) / 2.0, (x - fx) / 2.0};
}

std::pair<Mat, Mat> iwasawa_project(const AlgebraDescriptor& alg, const Mat& x) {
  if (!alg.iwasawa)
    throw UnsupportedError("algebra " + alg.name +
                           " has no registered Iwasawa decomposition");
  if (x.rows() != alg.size || x.cols() != alg.size)
    throw StructuralError("iwasawa_project: dimension mismatch");
  return IwasawaData::split(x);
}

CartanData CartanData::make(std::vector<Mat> basis, Subspace ambient,
                            int regular_index) {
  CartanData c;
  c.basis = std::move(basis);
  c.ambient = std::move(ambient);
  c.regular_index = regular_index;
  c.A = Subspace::span(c.basis);
  c.Aperp = c.A.complement_within(c.ambient);
  return c;
}

void CartanData::verify(double rank_tol) const {
  for (size_t i = 0; i < basis.size(); ++i)
    for (size_t j = i + 1; j < basis.size(); ++j)
      if (comm(basis[i], basis[j]).norm() > 1e-12)
        throw ConfigError("Cartan basis does not commute");
  AdInverse ad(regular(), ambient, rank_tol);
  const int expected = ambient.dim() - static_cast<int>(basis.size());
  if (ad.rank() != expected)
    throw ConfigError("distinguished element is not regular: ad rank " +
                      std::to_string(ad.rank()) + " expected " +
                      std::to_string(expected));
}

NestedDecomposition NestedDecomposition::build(
    const Subspace& u, const Subspace& k1, const Subspace& p1,
    const Subspace& k2, const Subspace& p2, const Subspace& s1,
    const Subspace& k1p, double tol) {
  NestedDecomposition d;
  d.U = u;
  d.K1 = k1;
  d.P1 = p1;
  d.K2 = k2;
  d.P2 = p2;
  d.S1 = s1;
  d.K1p = k1p;
  d.Q1 = Subspace::intersect(k1, p2);
  d.Q2 = Subspace::intersect(k2, p1);
  d.S2 = Subspace::intersect(k1p, k2);
  d.K2p = s1.sum_with(d.Q2);
  d.validate(tol);
  return d;
}

void NestedDecomposition::validate(double tol) const {
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("nested decomposition inconsistent: " + what);
  };
  // Q1 = K1 cap P2 and Q2 = K2 cap P1 (membership + dimension)
  Subspace q1 = Subspace::intersect(K1, P2);
  check(q1.dim() == Q1.dim(), "dim Q1");
  for (const Mat& b : Q1.basis())
    check(K1.residual(b) < tol && P2.residual(b) < tol, "Q1 membership");
  for (const Mat& b : Q2.basis())
    check(K2.residual(b) < tol && P1.residual(b) < tol, "Q2 membership");
  // K1 = S1 + S2 + Q1: projectors sum to the K1 projector, pairwise products vanish
  check(S1.dim() + S2.dim() + Q1.dim() == K1.dim(), "dim K1 split");
  const RMat pk1 = K1.basis_matrix() * K1.basis_matrix().transpose();
  RMat psum = RMat::Zero(pk1.rows(), pk1.cols());
  const Subspace* parts[3] = {&S1, &S2, &Q1};
  for (const Subspace* s : parts) {
    if (s->dim() == 0) continue;
    psum += s->basis_matrix() * s->basis_matrix().transpose();
  }
  check((psum - pk1).norm() < 1e-8, "projector sum on K1");
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      if (parts[a]->dim() == 0 || parts[b]->dim() == 0) continue;
      RMat prod = (parts[a]->basis_matrix() * parts[a]->basis_matrix().transpose()) *
                  (parts[b]->basis_matrix() * parts[b]->basis_matrix().transpose());
      check(prod.norm() < 1e-10, "projector annihilation on K1");
    }
  // [S1, S2] = 0 on basis pairs
  for (const Mat& x : S1.basis())
    for (const Mat& y : S2.basis())
      check(comm(x, y).norm() < 1e-12, "[S1,S2] != 0");
  // idempotence of every stored projector
  const Subspace* all[10] = {&K1, &P1, &K2, &P2, &S1, &S2, &Q1, &Q2, &K1p, &K2p};
  for (const Subspace* s : all) {
    if (s->dim() == 0) continue;
    RMat p = s->basis_matrix() * s->basis_matrix().transpose();
    check((p * p - p).norm() < 1e-10, "projector not idempotent");
  }
}

NestedComponents nested_project(const NestedDecomposition& d, const Mat& x) {
  if (d.U.dim() > 0 && d.U.residual(x) > 1e-8)
    throw DomainError("nested_project: element is not in the real form");
  NestedComponents c;
  c.s1 = d.S1.project(x);
  c.s2 = d.S2.project(x);
  c.q1 = d.Q1.project(x);
  c.q2 = d.Q2.project(x);
  c.p_rem = x - c.s1 - c.s2 - c.q1 - c.q2;
  return c;
}

namespace {

Mat mat_from_json(const nlohmann::json& j) {
  const auto& rows = j;
  const int r = static_cast<int>(rows.size());
  const int c = r ? static_cast<int>(rows[0].size()) : 0;
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) {
      const auto& e = rows[i][k];
      if (e.is_array())
        m(i, k) = Cplx(e[0].get<double>(), e[1].get<double>());
      else
        m(i, k) = Cplx(e.get<double>(), 0.0);
    }
  return m;
}

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j)
      row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

MatOp op_from_string(const std::string& s) {
  if (s == "none") return MatOp::None;
  if (s == "transpose") return MatOp::Transpose;
  if (s == "conj") return MatOp::Conj;
  if (s == "conj-transpose") return MatOp::ConjTranspose;
  throw ConfigError("unknown matrix op: " + s);
}

std::string op_to_string(MatOp op) {
  switch (op) {
    case MatOp::None: return "none";
    case MatOp::Transpose: return "transpose";
    case MatOp::Conj: return "conj";
    case MatOp::ConjTranspose: return "conj-transpose";
  }
  return "none";
}

LambdaAction lambda_from_string(const std::string& s) {
  if (s == "fix") return LambdaAction::Fix;
  if (s == "conj") return LambdaAction::Conj;
  if (s == "negate") return LambdaAction::Negate;
  if (s == "invert") return LambdaAction::Invert;
  throw ConfigError("unknown lambda action: " + s);
}

std::string lambda_to_string(LambdaAction a) {
  switch (a) {
    case LambdaAction::Fix: return "fix";
    case LambdaAction::Conj: return "conj";
    case LambdaAction::Negate: return "negate";
    case LambdaAction::Invert: return "invert";
  }
  return "fix";
}

}  // namespace

AlgebraPtr algebra_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("algebra config parse error: ") + e.what());
  }
  auto alg = std::make_shared<AlgebraDescriptor>();
  if (!j.contains("name") || !j.contains("n"))
    throw ConfigError("algebra config requires 'name' and 'n'");
  alg->name = j["name"].get<std::string>();
  const int n = j["n"].get<int>();
  alg->size = (alg->name == "o(n,n,C)") ? 2 * n : n;
  alg->rank = j.value("rank", alg->name == "o(n,n,C)" ? n : n - 1);
  for (const auto& ji : j.value("involutions", nlohmann::json::array())) {
    InvolutionSpec s;
    s.symbol = ji.at("symbol").get<std::string>();
    if (ji.contains("conjugation_matrix"))
      s.C = mat_from_json(ji["conjugation_matrix"]);
    s.op = op_from_string(ji.value("op", "none"));
    s.sign = ji.value("sign", 1.0);
    s.lambda_action = lambda_from_string(ji.value("lambda_action", "fix"));
    alg->involutions.push_back(std::move(s));
  }
  return alg;
}

std::string algebra_to_json(const AlgebraDescriptor& alg) {
  nlohmann::json j;
  j["name"] = alg.name;
  j["n"] = alg.half();
  j["rank"] = alg.rank;
  j["involutions"] = nlohmann::json::array();
  for (const auto& s : alg.involutions) {
    nlohmann::json ji;
    ji["symbol"] = s.symbol;
    if (s.C.size() > 0) ji["conjugation_matrix"] = mat_to_json(s.C);
    ji["op"] = op_to_string(s.op);
    ji["sign"] = s.sign;
    ji["lambda_action"] = lambda_to_string(s.lambda_action);
    j["involutions"].push_back(ji);
  }
  return j.dump(2);
}

}  // namespace loopsol
