#include "clfstab/sampling_sim.hpp"

#include "clfstab/nonsmooth_clf.hpp"

#include <cstdio>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace clfstab {

// Schedules ---------------------------------------------------------------

void SamplingSchedule::finalize() {
  if (times_.size() < 2) throw Error(ErrorKind::InvalidParams, "schedule needs at least two times");
  if (times_.front() != 0.0) throw Error(ErrorKind::InvalidParams, "schedule must start at 0");
  diameter_ = 0.0;
  lower_diameter_ = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < times_.size(); ++i) {
    const double gap = times_[i] - times_[i - 1];
    if (!(gap > 0.0) || !std::isfinite(times_[i])) {
      throw Error(ErrorKind::InvalidParams, "schedule times must be finite and strictly increasing");
    }
    diameter_ = std::max(diameter_, gap);
    lower_diameter_ = std::min(lower_diameter_, gap);
  }
}

SamplingSchedule SamplingSchedule::uniform(double h, double T_end) {
  if (!(h > 0.0) || !std::isfinite(h) || !(T_end > 0.0) || !std::isfinite(T_end)) {
    throw Error(ErrorKind::InvalidParams, "uniform schedule needs h > 0 and T_end > 0");
  }
  const double ratio = T_end / h;
  // Tolerate roundoff so that uniform(0.1, 1) ends exactly at its 10th point.
  auto count = static_cast<std::size_t>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
  count = std::max<std::size_t>(count, 1);
  SamplingSchedule s;
  s.times_.resize(count + 1);
  for (std::size_t i = 0; i <= count; ++i) s.times_[i] = static_cast<double>(i) * h;
  s.finalize();
  std::ostringstream os;
  os << "uniform:" << format_double(h);
  s.description_ = os.str();
  return s;
}

SamplingSchedule SamplingSchedule::jittered(double h, double jitter_fraction, std::uint64_t seed, double T_end) {
  if (!(h > 0.0) || !(T_end > 0.0) || !(jitter_fraction >= 0.0 && jitter_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidParams, "jittered schedule needs h > 0, T_end > 0 and 0 <= jitter < 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  SamplingSchedule s;
  s.times_.push_back(0.0);
  while (s.times_.back() < T_end) s.times_.push_back(s.times_.back() + h * (1.0 + jitter_fraction * unit(rng)));
  s.finalize();
  std::ostringstream os;
  os << "jitter:" << format_double(h) << ":" << format_double(jitter_fraction) << ":" << seed;
  s.description_ = os.str();
  return s;
}

SamplingSchedule SamplingSchedule::from_times(std::vector<double> times) {
  SamplingSchedule s;
  s.times_ = std::move(times);
  s.finalize();
  s.description_ = "explicit";
  return s;
}

// Trajectory accessors ------------------------------------------------------

Vec PiTrajectory::sample_state(std::size_t i) const {
  return Eigen::Map<const Eigen::VectorXd>(sample_states.data() + i * static_cast<std::size_t>(n), n);
}

Vec PiTrajectory::held_control(std::size_t i) const {
  return Eigen::Map<const Eigen::VectorXd>(held_controls.data() + i * static_cast<std::size_t>(m), m);
}

namespace {

template <class Deriv>
Vec rk4_step(const Deriv& deriv, double t, const Vec& x, double h) {
  const Vec k1 = deriv(t, x);
  const Vec k2 = deriv(t + 0.5 * h, x + 0.5 * h * k1);
  const Vec k3 = deriv(t + 0.5 * h, x + 0.5 * h * k2);
  const Vec k4 = deriv(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void require_finite_state(const Vec& x, double t) {
  if (!x.allFinite()) {
    throw Error(ErrorKind::NonFinite, "non-finite state at t=" + format_double(t));
  }
}

Vec eval_feedback(const FeedbackLaw& k, const Vec& x, int m) {
  Vec u = k(x);
  require_dim(u, m, "feedback output");
  if (!u.allFinite()) throw Error(ErrorKind::NonFinite, "feedback '" + k.name + "' returned a non-finite control");
  return u;
}

void append(std::vector<double>& flat, const Vec& v) { flat.insert(flat.end(), v.data(), v.data() + v.size()); }

}  // namespace

PiTrajectory simulate_pi_trajectory(const ControlSystem& sys, const FeedbackLaw& k, const SamplingSchedule& schedule,
                                    const Vec& x0, const PerturbationSpec& pert, const IntegratorOptions& options,
                                    const SampleDiagnostics& diagnostics) {
  require_dim(x0, sys.n, "initial state");
  require_finite_state(x0, 0.0);
  if (k.n != sys.n || k.m != sys.m) throw Error(ErrorKind::DimensionMismatch, "feedback dimensions do not match system");
  if (pert.e.dim() != sys.n || pert.d.dim() != sys.n) {
    throw Error(ErrorKind::DimensionMismatch, "perturbation signals must have the state dimension");
  }
  if (options.substeps < 4) throw Error(ErrorKind::InvalidParams, "need at least 4 RK4 substeps per interval");

  PiTrajectory out;
  out.n = sys.n;
  out.m = sys.m;
  out.dense.n = sys.n;
  out.dense.m = sys.m;
  const auto& times = schedule.times();
  out.schedule_times = times;
  const bool with_d = !pert.d.is_zero();
  const bool with_e = !pert.e.is_zero();
  const double watch = options.watch_radius;

  Vec x = x0;
  Vec u = Vec::Zero(sys.m);
  out.max_norm = x.norm();
  if (watch > 0.0 && out.max_norm > watch) out.last_outside_time = 0.0;

  const std::size_t last = times.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const double ti = times[i];
    append(out.sample_states, x);
    if (diagnostics.V) out.sample_V.push_back(diagnostics.V(x));
    if (diagnostics.envelope) out.sample_Valpha.push_back(diagnostics.envelope->value(x));
    if (i == last) {
      out.dense.push(ti, x, u);
      out.is_sample.push_back(1);
      break;
    }
    const Vec measured = with_e ? Vec(x + pert.e(ti, x)) : x;
    u = eval_feedback(k, measured, sys.m);
    append(out.held_controls, u);
    out.dense.push(ti, x, u);
    out.is_sample.push_back(1);

    const double h = (times[i + 1] - ti) / options.substeps;
    auto deriv = [&](double t, const Vec& y) -> Vec {
      if (with_d) return eval_dynamics(sys, y, u) + pert.d(t, y);
      return eval_dynamics(sys, y, u);
    };
    for (int j = 0; j < options.substeps; ++j) {
      const double t = ti + j * h;
      const double t_next = (j + 1 == options.substeps) ? times[i + 1] : ti + (j + 1) * h;
      x = rk4_step(deriv, t, x, h);
      require_finite_state(x, t_next);
      const double norm = x.norm();
      out.max_norm = std::max(out.max_norm, norm);
      if (watch > 0.0 && norm > watch) out.last_outside_time = t_next;
      if (norm > options.blowup) {
        out.escaped = true;
        out.escape_time = t_next;
        out.dense.push(t_next, x, u);
        out.is_sample.push_back(0);
        return out;
      }
      if (options.record_dense && j + 1 < options.substeps) {
        out.dense.push(t_next, x, u);
        out.is_sample.push_back(0);
      }
    }
  }
  return out;
}

Trajectory simulate_classical(const ControlSystem& sys, const FeedbackLaw& k, const Vec& x0, double T_end, double step,
                              double blowup) {
  if (k.continuity == Continuity::MeasurableDiscontinuous) {
    throw Error(ErrorKind::RefusedDiscontinuous,
                "feedback '" + k.name + "' is discontinuous; classical solutions are undefined, use sampled simulation");
  }
  if (k.n != sys.n || k.m != sys.m) throw Error(ErrorKind::DimensionMismatch, "feedback dimensions do not match system");
  return simulate_open_loop(sys, Signal::zero(sys.m), x0, T_end, step, &k, blowup);
}

Trajectory simulate_open_loop(const ControlSystem& sys, const Signal& input, const Vec& x0, double T_end, double step,
                              const FeedbackLaw* k, double blowup) {
  require_dim(x0, sys.n, "initial state");
  require_finite_state(x0, 0.0);
  if (input.dim() != sys.m) throw Error(ErrorKind::DimensionMismatch, "input signal must have the control dimension");
  if (!(step > 0.0) || !(T_end > 0.0)) throw Error(ErrorKind::InvalidParams, "need step > 0 and T_end > 0");
  auto control = [&](double t, const Vec& y) -> Vec {
    Vec v = input(t, y);
    if (k) v += eval_feedback(*k, y, sys.m);
    return v;
  };
  auto deriv = [&](double t, const Vec& y) -> Vec { return eval_dynamics(sys, y, control(t, y)); };

  Trajectory traj;
  traj.n = sys.n;
  traj.m = sys.m;
  const auto steps = static_cast<std::size_t>(std::ceil(T_end / step - 1e-9 * std::max(1.0, T_end / step)));
  const double h = T_end / static_cast<double>(steps);
  Vec x = x0;
  traj.push(0.0, x, control(0.0, x));
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * h;
    const double t_next = (i + 1 == steps) ? T_end : static_cast<double>(i + 1) * h;
    x = rk4_step(deriv, t, x, h);
    require_finite_state(x, t_next);
    if (x.norm() > blowup) {
      traj.escaped = true;
      traj.escape_time = t_next;
      traj.push(t_next, x, Vec(Vec::Zero(sys.m)));
      return traj;
    }
    traj.push(t_next, x, control(t_next, x));
  }
  return traj;
}

// CSV ---------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

namespace {
void write_header(std::ostream& os, int n, int m) {
  os << "t";
  for (int j = 1; j <= n; ++j) os << ",x" << j;
  for (int j = 1; j <= m; ++j) os << ",u" << j;
}

void write_row(std::ostream& os, const Trajectory& traj, std::size_t i) {
  os << format_double(traj.times[i]);
  for (int j = 0; j < traj.n; ++j) os << ',' << format_double(traj.states[i * traj.n + j]);
  for (int j = 0; j < traj.m; ++j) os << ',' << format_double(traj.controls[i * traj.m + j]);
}
}  // namespace

void write_pi_csv(std::ostream& os, const PiTrajectory& traj, const SampleDiagnostics& diagnostics) {
  const bool with_v = static_cast<bool>(diagnostics.V) || !traj.sample_V.empty();
  const bool with_valpha = !traj.sample_Valpha.empty();
  write_header(os, traj.n, traj.m);
  if (with_v || with_valpha) os << ",V,Valpha";
  os << ",is_sample\n";
  std::size_t sample = 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < traj.dense.size(); ++i) {
    write_row(os, traj.dense, i);
    const bool is_sample = traj.is_sample[i] != 0;
    if (with_v || with_valpha) {
      double v = nan;
      double va = nan;
      if (is_sample && sample < traj.sample_V.size()) v = traj.sample_V[sample];
      else if (diagnostics.V) v = diagnostics.V(traj.dense.state(i));
      if (is_sample && sample < traj.sample_Valpha.size()) va = traj.sample_Valpha[sample];
      os << ',' << format_double(v) << ',' << format_double(va);
    }
    os << ',' << (is_sample ? 1 : 0) << '\n';
    if (is_sample) ++sample;
  }
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  write_header(os, traj.n, traj.m);
  os << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    write_row(os, traj, i);
    os << '\n';
  }
}

}  // namespace clfstab
