#ifndef LOOPSOL_GRID_HPP
#define LOOPSOL_GRID_HPP

#include <functional>
#include <string>
#include <vector>

#include "loopsol/errors.hpp"
#include "loopsol/loop.hpp"

namespace loopsol {

struct Axis {
  std::string name;
  double origin = 0.0;
  double step = 1.0;
  int count = 0;

  double coord(int i) const { return origin + step * i; }
};

enum class Boundary { Decaying, Periodic };

inline double norm_of(const Mat& m) { return m.norm(); }
inline double norm_of(const LoopElement& x) { return x.norm(); }

/// Uniformly sampled field over 1 or 2 coordinates. Samples are matrices or
/// loop elements; storage is row-major in the axis order given.
template <class T>
class GridField {
 public:
  GridField() = default;
  GridField(std::vector<Axis> axes, Boundary b, const T& fill)
      : axes_(std::move(axes)), boundary_(b) {
    if (axes_.empty() || axes_.size() > 2)
      throw ConfigError("GridField supports 1 or 2 axes");
    int total = 1;
    for (const Axis& a : axes_) {
      if (a.step <= 0.0) throw ConfigError("grid spacing must be positive");
      if (a.count < 1) throw ConfigError("grid axis must have samples");
      total *= a.count;
    }
    data_.assign(static_cast<size_t>(total), fill);
  }

  int dims() const { return static_cast<int>(axes_.size()); }
  const Axis& axis(int k) const { return axes_.at(static_cast<size_t>(k)); }
  const std::vector<Axis>& axes() const { return axes_; }
  Boundary boundary() const { return boundary_; }
  void set_boundary(Boundary b) { boundary_ = b; }

  int count(int ax) const { return axis(ax).count; }
  int size() const { return static_cast<int>(data_.size()); }

  T& flat(int k) { return data_[static_cast<size_t>(k)]; }
  const T& flat(int k) const { return data_[static_cast<size_t>(k)]; }

  T& at(int i) {
    return data_[static_cast<size_t>(i)];
  }
  const T& at(int i) const { return data_[static_cast<size_t>(i)]; }
  T& at(int i, int j) {
    return data_[static_cast<size_t>(i) * axes_[1].count + j];
  }
  const T& at(int i, int j) const {
    return data_[static_cast<size_t>(i) * axes_[1].count + j];
  }

  double norm() const {
    double s = 0.0;
    for (const T& v : data_) {
      double r = norm_of(v);
      s += r * r;
    }
    return std::sqrt(s);
  }

  double sup_norm() const {
    double s = 0.0;
    for (const T& v : data_) s = std::max(s, norm_of(v));
    return s;
  }

  template <class F>
  auto map(F f) const {
    using U = decltype(f(data_.front()));
    GridField<U> out(axes_, boundary_, f(data_.front()));
    for (int k = 0; k < size(); ++k) out.flat(k) = f(data_[k]);
    return out;
  }

  GridField<T>& operator+=(const GridField<T>& o) {
    for (int k = 0; k < size(); ++k) data_[k] += o.flat(k);
    return *this;
  }
  GridField<T>& operator-=(const GridField<T>& o) {
    for (int k = 0; k < size(); ++k) data_[k] -= o.flat(k);
    return *this;
  }
  GridField<T>& scale(Cplx s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

 private:
  std::vector<Axis> axes_;
  Boundary boundary_ = Boundary::Decaying;
  std::vector<T> data_;
};

using MatField = GridField<Mat>;
using LoopField = GridField<LoopElement>;

}  // namespace loopsol

#endif
