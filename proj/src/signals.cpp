#include "clfstab/signals.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace clfstab {

namespace {
std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double unit_from_bits(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }
}  // namespace

Signal Signal::zero(int dim) {
  Signal s;
  s.kind_ = Kind::Zero;
  s.dim_ = dim;
  return s;
}

Signal Signal::constant(Vec value) {
  if (!value.allFinite()) throw Error(ErrorKind::InvalidParams, "Signal::constant: non-finite value");
  Signal s;
  s.kind_ = Kind::Constant;
  s.dim_ = static_cast<int>(value.size());
  s.bound_ = value.norm();
  s.value_ = std::move(value);
  return s;
}

Signal Signal::sinusoid(Vec amplitude, double freq, double phase) {
  if (!amplitude.allFinite() || !std::isfinite(freq) || !std::isfinite(phase)) {
    throw Error(ErrorKind::InvalidParams, "Signal::sinusoid: non-finite parameter");
  }
  Signal s;
  s.kind_ = Kind::Sinusoid;
  s.dim_ = static_cast<int>(amplitude.size());
  s.bound_ = amplitude.norm();
  s.value_ = std::move(amplitude);
  s.freq_ = freq;
  s.phase_ = phase;
  return s;
}

Signal Signal::piecewise_constant(int dim, std::uint64_t seed, double dwell, double amp) {
  if (!(dwell > 0.0) || !(amp >= 0.0)) {
    throw Error(ErrorKind::InvalidParams, "Signal::piecewise_constant: need dwell > 0 and amp >= 0");
  }
  Signal s;
  s.kind_ = Kind::PiecewiseConstant;
  s.dim_ = dim;
  s.seed_ = seed;
  s.dwell_ = dwell;
  s.amp_ = amp;
  s.bound_ = amp * std::sqrt(static_cast<double>(dim));
  return s;
}

Signal Signal::pulse(Vec value, double t_on, double t_off) {
  if (!(t_off >= t_on)) throw Error(ErrorKind::InvalidParams, "Signal::pulse: need t_off >= t_on");
  Signal s = constant(std::move(value));
  s.kind_ = Kind::Pulse;
  s.t_on_ = t_on;
  s.t_off_ = t_off;
  return s;
}

Signal Signal::callback(int dim, double bound, Callback fn, std::string name) {
  if (!(bound >= 0.0) || !fn) throw Error(ErrorKind::InvalidParams, "Signal::callback: need bound >= 0 and a function");
  Signal s;
  s.kind_ = Kind::Callback;
  s.dim_ = dim;
  s.bound_ = bound;
  s.fn_ = std::move(fn);
  s.name_ = std::move(name);
  return s;
}

Vec Signal::operator()(double t, const Vec& x) const {
  switch (kind_) {
    case Kind::Zero: return Vec::Zero(dim_);
    case Kind::Constant: return value_;
    case Kind::Sinusoid: return value_ * std::sin(2.0 * std::numbers::pi * freq_ * t + phase_);
    case Kind::PiecewiseConstant: {
      const auto slot = static_cast<std::int64_t>(std::floor(t / dwell_));
      Vec v(dim_);
      std::uint64_t state = splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(slot)));
      for (int j = 0; j < dim_; ++j) {
        state = splitmix64(state);
        v[j] = amp_ * (2.0 * unit_from_bits(state) - 1.0);
      }
      return v;
    }
    case Kind::Pulse: return (t >= t_on_ && t < t_off_) ? value_ : Vec(Vec::Zero(dim_));
    case Kind::Callback: {
      Vec v = fn_(t, x);
      require_dim(v, dim_, "Signal callback output");
      const double norm = v.norm();
      if (norm > bound_) v *= bound_ / norm;
      return v;
    }
  }
  return Vec::Zero(dim_);
}

std::string Signal::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Zero: os << "zero"; break;
    case Kind::Constant: os << "constant(|v|=" << bound_ << ")"; break;
    case Kind::Sinusoid: os << "sinusoid(|a|=" << bound_ << ",f=" << freq_ << ",phase=" << phase_ << ")"; break;
    case Kind::PiecewiseConstant:
      os << "piecewise_constant(seed=" << seed_ << ",dwell=" << dwell_ << ",amp=" << amp_ << ")";
      break;
    case Kind::Pulse: os << "pulse(|v|=" << bound_ << ",[" << t_on_ << "," << t_off_ << "))"; break;
    case Kind::Callback: os << name_ << "(bound=" << bound_ << ")"; break;
  }
  return os.str();
}

}  // namespace clfstab
