#pragma once

#include "clfstab/common.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace clfstab {

// Bounded time signal used for measurement errors, disturbances and test
// inputs. Callback signals may also read the current state; their output is
// clipped to the declared bound.
class Signal {
 public:
  enum class Kind { Zero, Constant, Sinusoid, PiecewiseConstant, Pulse, Callback };
  using Callback = std::function<Vec(double t, const Vec& x)>;

  static Signal zero(int dim);
  static Signal constant(Vec value);
  // amplitude[j] * sin(2 pi freq t + phase)
  static Signal sinusoid(Vec amplitude, double freq, double phase = 0.0);
  // uniform in [-amp, amp]^dim, redrawn every `dwell` time units
  static Signal piecewise_constant(int dim, std::uint64_t seed, double dwell, double amp);
  // value on [t_on, t_off), zero elsewhere
  static Signal pulse(Vec value, double t_on, double t_off);
  static Signal callback(int dim, double bound, Callback fn, std::string name = "callback");

  Vec operator()(double t, const Vec& x) const;
  Vec operator()(double t) const { return (*this)(t, Vec::Zero(dim_)); }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  // Exact sup over t (and x) of the Euclidean norm.
  double sup_norm() const { return bound_; }
  bool is_zero() const { return kind_ == Kind::Zero; }
  std::string describe() const;

 private:
  Kind kind_{Kind::Zero};
  int dim_{0};
  double bound_{0.0};
  Vec value_;
  double freq_{0.0}, phase_{0.0}, dwell_{1.0}, amp_{0.0}, t_on_{0.0}, t_off_{0.0};
  std::uint64_t seed_{0};
  Callback fn_;
  std::string name_;
};

}  // namespace clfstab
