#ifndef LOOPSOL_STENCIL_HPP
#define LOOPSOL_STENCIL_HPP

#include "loopsol/grid.hpp"

namespace loopsol {

enum class DiffMethod { FD4, Spectral };

namespace detail {

/// index/weight pairs of the 4th-order first-derivative stencil at node i of
/// an axis with `count` nodes (one-sided at decaying edges, wrapped when
/// periodic). Weights exclude the 1/h factor.
inline std::vector<std::pair<int, double>> fd4_stencil(int i, int count,
                                                       Boundary b) {
  static const double c[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  static const double e0[5] = {-25.0 / 12, 48.0 / 12, -36.0 / 12, 16.0 / 12,
                               -3.0 / 12};
  static const double e1[5] = {-3.0 / 12, -10.0 / 12, 18.0 / 12, -6.0 / 12,
                               1.0 / 12};
  std::vector<std::pair<int, double>> st;
  if (b == Boundary::Periodic) {
    for (int k = -2; k <= 2; ++k)
      if (c[k + 2] != 0.0)
        st.push_back({((i + k) % count + count) % count, c[k + 2]});
    return st;
  }
  if (count < 5) throw ConfigError("grid too small for 4th order stencils");
  if (i >= 2 && i <= count - 3) {
    for (int k = -2; k <= 2; ++k)
      if (c[k + 2] != 0.0) st.push_back({i + k, c[k + 2]});
  } else if (i == 0) {
    for (int k = 0; k < 5; ++k) st.push_back({k, e0[k]});
  } else if (i == 1) {
    for (int k = 0; k < 5; ++k) st.push_back({k, e1[k]});
  } else if (i == count - 2) {
    for (int k = 0; k < 5; ++k) st.push_back({count - 1 - k, -e1[k]});
  } else {
    for (int k = 0; k < 5; ++k) st.push_back({count - 1 - k, -e0[k]});
  }
  return st;
}

}  // namespace detail

/// 4th-order first derivative along an axis.
template <class T>
GridField<T> d_axis(const GridField<T>& f, int ax) {
  GridField<T> out = f;
  const int n0 = f.count(0);
  const double h = f.axis(ax).step;
  if (f.dims() == 1) {
    for (int i = 0; i < n0; ++i) {
      auto st = detail::fd4_stencil(i, n0, f.boundary());
      T acc = f.at(st[0].first);
      acc *= Cplx(st[0].second / h, 0.0);
      for (size_t k = 1; k < st.size(); ++k) {
        T term = f.at(st[k].first);
        term *= Cplx(st[k].second / h, 0.0);
        acc += term;
      }
      out.at(i) = acc;
    }
    return out;
  }
  const int n1 = f.count(1);
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j) {
      auto st = detail::fd4_stencil(ax == 0 ? i : j, ax == 0 ? n0 : n1,
                                    f.boundary());
      T acc = (ax == 0) ? f.at(st[0].first, j) : f.at(i, st[0].first);
      acc *= Cplx(st[0].second / h, 0.0);
      for (size_t k = 1; k < st.size(); ++k) {
        T term = (ax == 0) ? f.at(st[k].first, j) : f.at(i, st[k].first);
        term *= Cplx(st[k].second / h, 0.0);
        acc += term;
      }
      if (ax == 0)
        out.at(i, j) = acc;
      else
        out.at(i, j) = acc;
    }
  return out;
}

/// Dense Fourier differentiation matrix for a periodic axis (odd or even N).
RMat spectral_diff_matrix(int n, double h);

/// Spectral first derivative along axis 0 of a periodic 1-D field.
template <class T>
GridField<T> d_spectral(const GridField<T>& f, const RMat& dmat) {
  if (f.dims() != 1) throw ConfigError("spectral derivative is 1-D only");
  const int n = f.count(0);
  GridField<T> out = f;
  for (int i = 0; i < n; ++i) {
    T acc = f.at(0);
    acc *= Cplx(dmat(i, 0), 0.0);
    for (int k = 1; k < n; ++k) {
      T term = f.at(k);
      term *= Cplx(dmat(i, k), 0.0);
      acc += term;
    }
    out.at(i) = acc;
  }
  return out;
}

template <class T>
GridField<T> d_x(const GridField<T>& f, DiffMethod m = DiffMethod::FD4) {
  if (m == DiffMethod::Spectral && f.boundary() == Boundary::Periodic) {
    static thread_local RMat cached;
    static thread_local int cached_n = -1;
    static thread_local double cached_h = 0.0;
    if (cached_n != f.count(0) || cached_h != f.axis(0).step) {
      cached = spectral_diff_matrix(f.count(0), f.axis(0).step);
      cached_n = f.count(0);
      cached_h = f.axis(0).step;
    }
    return d_spectral(f, cached);
  }
  return d_axis(f, 0);
}

/// Cumulative antiderivative along axis 0 of a 1-D field, anchored at the
/// left edge with value c0 (4th order; periodic fields integrate mean-free
/// content and report the mean defect through *mean_defect).
template <class T>
GridField<T> cumint_x(const GridField<T>& f, const T& c0,
                      double* mean_defect = nullptr) {
  if (f.dims() != 1) throw ConfigError("cumint_x is 1-D only");
  const int n = f.count(0);
  const double h = f.axis(0).step;
  if (n < 4) throw ConfigError("grid too small for integration");
  GridField<T> out = f;
  out.at(0) = c0;
  auto wsum = [&](int a, double wa, int b, double wb, int c, double wc, int d,
                  double wd) {
    T acc = f.at(a);
    acc *= Cplx(wa * h / 24.0, 0.0);
    T t = f.at(b);
    t *= Cplx(wb * h / 24.0, 0.0);
    acc += t;
    t = f.at(c);
    t *= Cplx(wc * h / 24.0, 0.0);
    acc += t;
    t = f.at(d);
    t *= Cplx(wd * h / 24.0, 0.0);
    acc += t;
    return acc;
  };
  if (mean_defect) {
    double tot = 0.0;
    for (int i = 0; i < n; ++i) tot += norm_of(f.at(i));
    T mean = f.at(0);
    for (int i = 1; i < n; ++i) mean += f.at(i);
    mean *= Cplx(1.0 / n, 0.0);
    *mean_defect = norm_of(mean) * n * h;  // total integral magnitude
    (void)tot;
  }
  for (int i = 0; i + 1 < n; ++i) {
    T inc = (i == 0) ? wsum(0, 9, 1, 19, 2, -5, 3, 1)
            : (i + 2 <= n - 1)
                ? wsum(i - 1, -1, i, 13, i + 1, 13, i + 2, -1)
                : wsum(n - 4, 1, n - 3, -5, n - 2, 19, n - 1, 9);
    T next = out.at(i);
    next += inc;
    out.at(i + 1) = next;
  }
  return out;
}

}  // namespace loopsol

#endif
