#pragma once

#include "clfstab/clf_smooth.hpp"
#include "clfstab/common.hpp"
#include "clfstab/comparison.hpp"
#include "clfstab/parallel.hpp"
#include "clfstab/signals.hpp"
#include "clfstab/systems.hpp"

#include <nlohmann/json_fwd.hpp>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace clfstab {

using InputSignal = Signal;

// Trajectory of x' = f(x, k(x) + v(t)) together with |v| at every sample.
struct InputTrajectory {
  Trajectory traj;
  std::vector<double> input_norms;
  double input_sup{0.0};  // declared sup-norm of the generator
};

InputTrajectory simulate_with_input(const ControlSystem& sys, const InputSignal& v, const Vec& x0, double T_end,
                                    double step, const FeedbackLaw* k = nullptr, double blowup = kDefaultBlowup);

enum class EstimateForm { Max, Sum };

struct ISSEstimate {
  KLFunction beta;
  KFunction gamma;
  EstimateForm form{EstimateForm::Sum};
};

// |x(t)| <= beta(|x0|, t) (+ or max) gamma(sup_{s<=t} |v(s)|), tolerance 1e-9 relative.
EnvelopeReport check_iss_estimate(const std::vector<InputTrajectory>& trajs, const ISSEstimate& est,
                                  Execution exec = Execution::Serial);

// |x(t)| <= beta(|x0|, t) + int_0^t gamma(|v(s)|) ds, trapezoid rule on the samples.
EnvelopeReport check_iiss_estimate(const std::vector<InputTrajectory>& trajs, const KLFunction& beta,
                                   const KFunction& gamma, Execution exec = Execution::Serial);

// int_0^t |x|^p ds <= initial(|x0|) + gain * int_0^t |v|^q ds. `norm` and
// `bound` of each violation hold the two sides.
struct IntegralEstimate {
  double state_power{2.0};
  double input_power{2.0};
  KFunction initial{KFunction::power(1.0, 2.0)};
  double input_gain{1.0};
};
EnvelopeReport check_integral_estimate(const std::vector<InputTrajectory>& trajs, const IntegralEstimate& est,
                                       Execution exec = Execution::Serial);

enum class DissipationForm { ISS, IISS, Implication };
std::string_view to_string(DissipationForm form);

// iss:         Vdot <= -alpha(|x|) + gamma(|u|), alpha class-K-infinity
// iiss:        Vdot <= -alpha(|x|) + gamma(|u|), alpha positive definite
// implication: |x| >= gamma(|u|) implies Vdot <= -alpha(|x|)
struct LyapunovCandidate {
  std::string name;
  int n{0};
  ScalarField V;
  VectorField grad;
  DissipationForm form{DissipationForm::ISS};
  RealFn alpha;
  RealFn gamma;
  std::string alpha_text;
  std::string gamma_text;
};

// Sampled class checks on alpha/gamma; throws InvalidCandidate.
void validate_candidate(const LyapunovCandidate& cand, double s_max = 1e6);

struct DissipationViolation {
  Vec x;
  Vec u;
  double vdot{0.0};
  double bound{0.0};
};

struct LyapunovReport {
  std::size_t pairs_checked{0};
  double worst_excess{-std::numeric_limits<double>::infinity()};
  std::vector<DissipationViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Validates the candidate first, then checks every (x, u) grid pair with
// tolerance 1e-9 (1 + |terms|).
LyapunovReport verify_lyapunov_candidate(const LyapunovCandidate& cand, const ControlSystem& sys,
                                         const std::vector<Vec>& states, const std::vector<Vec>& inputs,
                                         Execution exec = Execution::Parallel);

// Tensor grid on [-half_width, half_width]^dim with `resolution` points per axis.
std::vector<Vec> box_grid(int dim, double half_width, int resolution);

struct GainRow {
  double amplitude{0.0};  // sup-norm of the input
  double limsup{0.0};     // max |x| over the tail window and all initial states
  bool escaped{false};
};

struct GainProbe {
  double tail_fraction{0.25};
  std::vector<GainRow> rows;  // sorted by amplitude
  // Monotone envelope through the finite rows; domain bounded by the first
  // amplitude that escapes.
  std::optional<KFunction> gamma_hat;
  double estimate(double amplitude) const;
};

GainProbe asymptotic_gain_probe(const ControlSystem& sys, const FeedbackLaw* k, const std::vector<InputSignal>& inputs,
                                const std::vector<Vec>& initial_states, double horizon, double step,
                                double tail_fraction = 0.25, Execution exec = Execution::Parallel);

// x = forward(z); inverse_jacobian(x) is D(inverse) at x. When it is empty a
// central-difference Jacobian of `inverse` is used.
struct Diffeomorphism {
  std::string name;
  int dim{0};
  VectorField forward;
  VectorField inverse;
  std::function<Mat(const Vec&)> inverse_jacobian;
};

Diffeomorphism identity_map(int dim);
Diffeomorphism linear_map(const Eigen::MatrixXd& T);

// z' = D(T^-1)(T(z)) f(T(z), S(v)). Checks T(0) = 0, S(0) = 0 and
// inverse(forward(z)) = z to 1e-8 at seeded samples; throws InverseConsistency.
ControlSystem conjugate_system(const ControlSystem& sys, const Diffeomorphism& state, const Diffeomorphism& input,
                               int check_samples = 64, double check_radius = 1.0, std::uint64_t seed = 5);

// x' = f(x, k(x) + v).
ControlSystem closed_loop(const ControlSystem& sys, const FeedbackLaw& k);

struct CascadeCandidates {
  LyapunovCandidate iss_candidate;  // for the driven subsystem, input = driver state
  std::vector<Vec> iss_states;
  std::vector<Vec> iss_inputs;
};

struct CascadeReport {
  std::size_t runs{0};
  std::size_t escaped{0};
  std::size_t converged{0};
  double max_tail_norm{0.0};  // max |(x, y)| over the final quarter of non-escaped runs
  double max_final_norm{0.0};
  std::vector<std::size_t> diverging_runs;
  bool ok() const { return escaped == 0 && converged == runs; }
};

// Composite x' = f(x, y), y' = g(y, 0): `driven` has driven.m == driver.n.
// Initial states are (x0, y0) stacked.
CascadeReport cascade_check(const ControlSystem& driven, const ControlSystem& driver,
                            const std::vector<Vec>& initial_states, double horizon, double step,
                            double convergence_tol, const std::optional<CascadeCandidates>& candidates = std::nullopt,
                            Execution exec = Execution::Parallel);

ControlSystem cascade_system(const ControlSystem& driven, const ControlSystem& driver);

// |B| int_0^inf |e^{tA}| dt (spectral norms); throws NotHurwitz.
double linear_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

nlohmann::json to_json(const GainProbe& probe);
nlohmann::json to_json(const LyapunovReport& report);
nlohmann::json to_json(const CascadeReport& report);
GainProbe gain_probe_from_json(const nlohmann::json& j);
LyapunovReport lyapunov_report_from_json(const nlohmann::json& j);
CascadeReport cascade_report_from_json(const nlohmann::json& j);

}  // namespace clfstab
