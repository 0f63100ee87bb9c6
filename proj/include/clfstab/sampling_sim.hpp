#pragma once

#include "clfstab/clf_smooth.hpp"
#include "clfstab/common.hpp"
#include "clfstab/signals.hpp"
#include "clfstab/systems.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace clfstab {

class MoreauEnvelope;

class SamplingSchedule {
 public:
  // t_i = i h until the first time >= T_end.
  static SamplingSchedule uniform(double h, double T_end);
  // gaps drawn uniformly from [h(1-j), h(1+j)], deterministic per seed.
  static SamplingSchedule jittered(double h, double jitter_fraction, std::uint64_t seed, double T_end);
  static SamplingSchedule from_times(std::vector<double> times);

  const std::vector<double>& times() const { return times_; }
  std::size_t intervals() const { return times_.size() - 1; }
  double diameter() const { return diameter_; }
  double lower_diameter() const { return lower_diameter_; }
  double horizon() const { return times_.back(); }
  std::string describe() const { return description_; }

 private:
  SamplingSchedule() = default;
  void finalize();

  std::vector<double> times_;
  double diameter_{0.0};
  double lower_diameter_{0.0};
  std::string description_;
};

inline SamplingSchedule uniform_schedule(double h, double T_end) { return SamplingSchedule::uniform(h, T_end); }
inline SamplingSchedule jittered_schedule(double h, double jitter_fraction, std::uint64_t seed, double T_end) {
  return SamplingSchedule::jittered(h, jitter_fraction, seed, T_end);
}

// e: measurement error added to the state before the feedback is evaluated.
// d: disturbance added to the state derivative.
struct PerturbationSpec {
  Signal e;
  Signal d;
  static PerturbationSpec none(int n) { return {Signal::zero(n), Signal::zero(n)}; }
};

struct IntegratorOptions {
  int substeps{16};
  double blowup{kDefaultBlowup};
  bool record_dense{true};
  // When positive, the last integrator time with |x| > watch_radius is tracked.
  double watch_radius{0.0};
};

struct SampleDiagnostics {
  ScalarField V;
  std::shared_ptr<const MoreauEnvelope> envelope;
};

struct PiTrajectory {
  int n{0};
  int m{0};
  std::vector<double> schedule_times;
  // Dense output. Controls in each row are the value held from that time on.
  Trajectory dense;
  std::vector<char> is_sample;
  std::vector<double> sample_states;  // row-major, one row per reached sample time
  std::vector<double> held_controls;  // row-major, one row per integrated interval
  std::vector<double> sample_V;
  std::vector<double> sample_Valpha;
  bool escaped{false};
  double escape_time{0.0};
  double max_norm{0.0};
  double last_outside_time{-1.0};  // -1 when never outside the watch radius

  std::size_t samples() const { return n == 0 ? 0 : sample_states.size() / static_cast<std::size_t>(n); }
  Vec sample_state(std::size_t i) const;
  Vec held_control(std::size_t i) const;
  double sample_time(std::size_t i) const { return schedule_times[i]; }
  Vec final_state() const { return sample_state(samples() - 1); }
};

PiTrajectory simulate_pi_trajectory(const ControlSystem& sys, const FeedbackLaw& k, const SamplingSchedule& schedule,
                                    const Vec& x0, const PerturbationSpec& pert, const IntegratorOptions& options = {},
                                    const SampleDiagnostics& diagnostics = {});

// Classical closed loop x' = f(x, k(x)) by fixed-step RK4.
Trajectory simulate_classical(const ControlSystem& sys, const FeedbackLaw& k, const Vec& x0, double T_end,
                              double step, double blowup = kDefaultBlowup);

// x' = f(x, k(x) + v(t)) (or f(x, v(t)) without a feedback) by fixed-step RK4.
Trajectory simulate_open_loop(const ControlSystem& sys, const Signal& input, const Vec& x0, double T_end, double step,
                              const FeedbackLaw* k = nullptr, double blowup = kDefaultBlowup);

// Header t,x1..xn,u1..um[,V,Valpha],is_sample; %.17g; LF.
void write_pi_csv(std::ostream& os, const PiTrajectory& traj, const SampleDiagnostics& diagnostics = {});
// Header t,x1..xn,u1..um; %.17g; LF.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

std::string format_double(double v);

}  // namespace clfstab
