#include "loopsol/loop.hpp"

#include <json.hpp>

#include "loopsol/errors.hpp"

namespace loopsol {

LoopElement LoopElement::monomial(AlgebraPtr alg, int degree, const Mat& coeff) {
  LoopElement x(std::move(alg));
  x.set_coeff(degree, coeff);
  return x;
}

int LoopElement::lo() const {
  if (empty()) return 0;
  return coeffs_.begin()->first;
}

int LoopElement::hi() const {
  if (empty()) return -1;
  return coeffs_.rbegin()->first;
}

Mat LoopElement::coeff(int degree) const {
  auto it = coeffs_.find(degree);
  if (it != coeffs_.end()) return it->second;
  return Mat::Zero(alg_->size, alg_->size);
}

void LoopElement::set_coeff(int degree, const Mat& m) {
  if (m.rows() != alg_->size || m.cols() != alg_->size)
    throw StructuralError("LoopElement coefficient shape mismatch");
  coeffs_[degree] = m;
  if (width() > kMaxBandWidth)
    throw ResourceError("Laurent band width exceeds " +
                        std::to_string(kMaxBandWidth));
}

void LoopElement::add_coeff(int degree, const Mat& m) {
  auto it = coeffs_.find(degree);
  if (it == coeffs_.end())
    set_coeff(degree, m);
  else
    it->second += m;
}

void LoopElement::trim(double tol) {
  for (auto it = coeffs_.begin(); it != coeffs_.end();)
    if (it->second.norm() <= tol)
      it = coeffs_.erase(it);
    else
      ++it;
}

Mat LoopElement::eval(Cplx lambda) const {
  if (lambda == Cplx(0.0, 0.0) && !empty() && lo() < 0)
    throw DomainError("loop evaluation at lambda=0 with negative degrees");
  Mat v = Mat::Zero(alg_->size, alg_->size);
  for (const auto& [d, c] : coeffs_) v += std::pow(lambda, d) * c;
  return v;
}

double LoopElement::norm() const {
  double s = 0.0;
  for (const auto& [d, c] : coeffs_) s += c.squaredNorm();
  return std::sqrt(s);
}

void LoopElement::check_same(const LoopElement& o) const {
  if (!alg_ || !o.alg_) throw StructuralError("loop element without algebra");
  if (alg_->name != o.alg_->name || alg_->size != o.alg_->size)
    throw StructuralError("loop elements from different algebras");
}

LoopElement& LoopElement::operator+=(const LoopElement& o) {
  check_same(o);
  for (const auto& [d, c] : o.coeffs_) add_coeff(d, c);
  return *this;
}

LoopElement& LoopElement::operator-=(const LoopElement& o) {
  check_same(o);
  for (const auto& [d, c] : o.coeffs_) add_coeff(d, -c);
  return *this;
}

LoopElement& LoopElement::operator*=(Cplx s) {
  for (auto& [d, c] : coeffs_) c *= s;
  return *this;
}

LoopElement LoopElement::band(int dlo, int dhi) const {
  LoopElement r(alg_);
  for (const auto& [d, c] : coeffs_)
    if (d >= dlo && d <= dhi) r.coeffs_[d] = c;
  return r;
}

LoopElement loop_bracket(const LoopElement& a, const LoopElement& b) {
  if (a.algebra()->name != b.algebra()->name ||
      a.algebra()->size != b.algebra()->size)
    throw StructuralError("loop_bracket: different algebras");
  LoopElement r(a.algebra());
  for (const auto& [da, ca] : a.coeffs())
    for (const auto& [db, cb] : b.coeffs()) r.add_coeff(da + db, comm(ca, cb));
  r.trim(0.0);
  return r;
}

LoopElement loop_mul(const LoopElement& a, const LoopElement& b, int window_lo,
                     int window_hi) {
  if (a.algebra()->size != b.algebra()->size)
    throw StructuralError("loop_mul: different algebras");
  LoopElement r(a.algebra());
  for (const auto& [da, ca] : a.coeffs())
    for (const auto& [db, cb] : b.coeffs()) {
      const int d = da + db;
      if (d < window_lo || d > window_hi) continue;
      r.add_coeff(d, ca * cb);
    }
  return r;
}

LoopElement loop_apply(const InvolutionSpec& s, const LoopElement& x) {
  LoopElement r(x.algebra());
  for (const auto& [d, c] : x.coeffs()) {
    int dd = d;
    Cplx scale(1.0, 0.0);
    switch (s.lambda_action) {
      case LambdaAction::Fix:
      case LambdaAction::Conj:
        // conjugate-linear specs pull the conjugated parameter back to lambda
        break;
      case LambdaAction::Negate:
        scale = (d % 2 == 0) ? 1.0 : -1.0;
        break;
      case LambdaAction::Invert:
        dd = -d;
        break;
    }
    r.add_coeff(dd, scale * s.apply(c));
  }
  return r;
}

LoopElement loop_exp_commuting(const LoopElement& x, int max_abs_degree,
                               double tol) {
  const int n = x.algebra()->size;
  LoopElement acc = LoopElement::monomial(x.algebra(), 0, Mat::Identity(n, n));
  LoopElement term = acc;
  for (int k = 1; k <= 256; ++k) {
    term = loop_mul(term, x, -max_abs_degree, max_abs_degree);
    term *= Cplx(1.0 / k, 0.0);
    acc += term;
    if (term.norm() < tol) break;
  }
  return acc;
}

LoopElement loop_inverse_band(const LoopElement& w, int depth) {
  // w = sum_{j<=0} w_j lambda^j with w_0 invertible; m = w^{-1} has the same
  // one-sided shape: match degrees 0, -1, ..., -depth of w m = 1.
  const int n = w.algebra()->size;
  if (w.hi() > 0)
    throw DomainError("loop_inverse_band expects a non-positive band");
  Mat w0inv = w.coeff(0).inverse();
  LoopElement m(w.algebra());
  m.set_coeff(0, w0inv);
  for (int d = 1; d <= depth; ++d) {
    Mat acc = Mat::Zero(n, n);
    for (int k = 1; k <= d; ++k) acc += w.coeff(-k) * m.coeff(-(d - k));
    m.set_coeff(-d, -w0inv * acc);
  }
  return m;
}

std::string family_name(Family f) {
  switch (f) {
    case Family::Standard: return "standard";
    case Family::U: return "u";
    case Family::UK: return "uk";
    case Family::TwistedU: return "twisted-u";
    case Family::TwistedUK: return "twisted-uk";
  }
  return "standard";
}

Family family_from_name(const std::string& s) {
  if (s == "standard") return Family::Standard;
  if (s == "u") return Family::U;
  if (s == "uk") return Family::UK;
  if (s == "twisted-u") return Family::TwistedU;
  if (s == "twisted-uk") return Family::TwistedUK;
  throw UsageError("unknown family: " + s);
}

const InvolutionSpec* Splitting::tau() const {
  return tau_symbol.empty() ? nullptr : &alg->involution(tau_symbol);
}

const InvolutionSpec* Splitting::sigma() const {
  return sigma_symbol.empty() ? nullptr : &alg->involution(sigma_symbol);
}

const InvolutionSpec* Splitting::mirror() const {
  return mirror_symbol.empty() ? nullptr : &alg->involution(mirror_symbol);
}

double Splitting::membership(const LoopElement& xi, Part part) const {
  double s2 = 0.0;
  auto add = [&](double r) { s2 += r * r; };
  for (const auto& [d, c] : xi.coeffs()) add(alg->identity_residual(c));
  // reality tau(xi(conj lambda)) = xi(lambda): coefficient-wise fixed points
  if (const InvolutionSpec* t = tau()) {
    LoopElement r = loop_apply(*t, xi);
    add((r - xi).norm());
  }
  // parity sigma(xi(-lambda)) = xi(lambda)
  if (family == Family::UK || family == Family::TwistedUK) {
    LoopElement r = loop_apply(*sigma(), xi);
    add((r - xi).norm());
  }
  if (part == Part::Plus) {
    if (!twisted()) {
      for (const auto& [d, c] : xi.coeffs())
        if (d < 0) add(c.norm());
    } else {
      // mirror condition sigma(xi(1/lambda)) = xi(lambda)
      LoopElement r = loop_apply(*mirror(), xi);
      add((r - xi).norm());
      if (family == Family::TwistedU) {
        add(K->residual(xi.coeff(0)));
      } else {
        // boundary value at lambda = 1: the literal finite coefficient sum
        Mat at1 = Mat::Zero(alg->size, alg->size);
        for (const auto& [d, c] : xi.coeffs()) at1 += c;
        add(nested->K2p.residual(at1));
      }
    }
  } else if (part == Part::Minus) {
    for (const auto& [d, c] : xi.coeffs())
      if (d > 0) add(c.norm());
    if (family == Family::TwistedU)
      add(B->residual(xi.coeff(0)));
    else if (family == Family::TwistedUK)
      add(nested->K1p.residual(xi.coeff(0)));
    else if (xi.has(0))
      add(xi.coeff(0).norm());  // untwisted minus loops vanish at infinity
  }
  return std::sqrt(s2);
}

LoopElement Splitting::project_plus_raw(const LoopElement& xi) const {
  LoopElement plus(alg);
  switch (family) {
    case Family::Standard:
    case Family::U:
    case Family::UK:
      return xi.band(0, xi.hi() >= 0 ? xi.hi() : 0);
    case Family::TwistedU: {
      // pi_+(A) = (A_0)_K + sum_{j>0} (A_j lambda^j + sigma(A_j) lambda^-j)
      auto [k0, b0] = IwasawaData::split(xi.coeff(0));
      plus.add_coeff(0, k0);
      const InvolutionSpec& sg = *sigma();
      for (const auto& [d, c] : xi.coeffs())
        if (d > 0) {
          plus.add_coeff(d, c);
          plus.add_coeff(-d, sg.apply(c));
        }
      plus.trim(0.0);
      return plus;
    }
    case Family::TwistedUK: {
      const InvolutionSpec& s2 = *mirror();
      Mat even_sum = Mat::Zero(alg->size, alg->size);
      for (const auto& [d, c] : xi.coeffs())
        if (d > 0) {
          plus.add_coeff(d, c);
          plus.add_coeff(-d, s2.apply(c));
          if (d % 2 == 0) even_sum += c + s2.apply(c);
        }
      Mat xi0 = nested->S1.project(xi.coeff(0)) - nested->S2.project(even_sum);
      plus.add_coeff(0, xi0);
      plus.trim(0.0);
      return plus;
    }
  }
  return plus;
}

std::pair<LoopElement, LoopElement> Splitting::project_split(
    const LoopElement& xi, double gate_tol) const {
  double r = membership(xi, Part::Full);
  if (r > gate_tol)
    throw DomainError("project_split: element is not in the loop algebra "
                      "(membership residual " +
                      std::to_string(r) + ")");
  LoopElement plus = project_plus_raw(xi);
  LoopElement minus = xi - plus;
  minus.trim(0.0);
  return {plus, minus};
}

LoopElement Splitting::vacuum_generator(int i, int j) const {
  if (i < 1 || i > cartan.n())
    throw DomainError("vacuum generator index i out of range");
  if (j < 1) throw DomainError("vacuum generator degree j must be positive");
  const bool odd_only = family == Family::UK || family == Family::TwistedUK;
  if (odd_only && j % 2 == 0)
    throw DomainError("family " + family_name(family) +
                      " admits only odd vacuum degrees");
  const Mat& a = cartan.basis[static_cast<size_t>(i - 1)];
  LoopElement v(alg);
  v.set_coeff(j, a);
  if (twisted()) {
    const InvolutionSpec& m = *mirror();
    v.add_coeff(-j, m.apply(a));
  }
  return v;
}

VacuumGenerator vacuum_generator(const Splitting& s, int i, int j) {
  VacuumGenerator g;
  g.i = i;
  g.j = j;
  g.value = s.vacuum_generator(i, j);
  return g;
}

std::string LoopElement::to_json() const {
  nlohmann::json j;
  j["algebra"] = alg_ ? alg_->name : "";
  j["n"] = alg_ ? alg_->half() : 0;
  nlohmann::json cs = nlohmann::json::object();
  for (const auto& [d, c] : coeffs_) {
    nlohmann::json flat = nlohmann::json::array();
    for (int col = 0; col < c.cols(); ++col)
      for (int row = 0; row < c.rows(); ++row) {
        flat.push_back(c(row, col).real());
        flat.push_back(c(row, col).imag());
      }
    cs[std::to_string(d)] = flat;
  }
  j["coeffs"] = cs;
  return j.dump();
}

LoopElement LoopElement::from_json(const std::string& text, AlgebraPtr alg) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("algebra").get<std::string>() != alg->name)
    throw StructuralError("loop element algebra tag mismatch");
  LoopElement x(alg);
  const int n = alg->size;
  for (const auto& [key, flat] : j.at("coeffs").items()) {
    Mat c(n, n);
    int k = 0;
    for (int col = 0; col < n; ++col)
      for (int row = 0; row < n; ++row) {
        c(row, col) = Cplx(flat[k].get<double>(), flat[k + 1].get<double>());
        k += 2;
      }
    x.set_coeff(std::stoi(key), c);
  }
  return x;
}

}  // namespace loopsol
