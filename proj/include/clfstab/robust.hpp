#pragma once

#include "clfstab/nonsmooth_clf.hpp"
#include "clfstab/sampling_sim.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace clfstab {

struct ConstantsOptions {
  std::optional<double> alpha;      // otherwise the largest admissible R / 2^k
  double decrease_fraction{0.5};    // envelope check: min_u zeta.f <= -fraction * gamma(r)
  int check_resolution{41};
  int lipschitz_samples{400};
  double lipschitz_safety{1.1};
  double band_ratio{0.5};  // delta_lo = band_ratio * delta_hi
  double time_factor{2.0};  // T_bound = time_factor * gamma(R) / rate
  int max_halvings{30};
  std::uint64_t seed{11};
  EnvelopeOptions envelope;
};

// Sizing of the sampled robust-stabilization statement on the ball B_R.
struct RobustConstants {
  double r{0.0}, R{0.0};
  double gamma_r{0.0}, gamma_R{0.0};  // inf W over s <= |x| <= R
  double alpha{0.0};
  double sup_V{0.0};
  double rho_bar{0.0};          // sqrt(2 sup V); bounds |x - y_alpha(x)| / alpha
  double omega_shift{0.0};      // sampled modulus of continuity of W at rho_bar alpha
  double c_formula{0.0};        // rho_bar / alpha + R / alpha^2
  double c_empirical{0.0};      // sampled Lipschitz constant of V_alpha on B_R
  double c{0.0};                // constant used for sizing
  double m{0.0};                // sup |f| over B_R x U0
  double delta_rate{0.0};       // guaranteed decrease of V_alpha per unit time outside B_r
  double kappa{0.0};            // delta_rate / (2c)
  double delta_hi{0.0};         // schedule band: delta_lo <= Delta(pi) <= d(pi) <= delta_hi
  double delta_lo{0.0};
  double eps_bound{0.0};        // admissible measurement error, kappa * delta_lo
  double T_bound{0.0};
  double decrease_fraction{0.0};
  double envelope_worst_margin{0.0};
  std::shared_ptr<const MoreauEnvelope> envelope;
};

RobustConstants constants_for(const ContinuousCLF& clf, const ControlSystem& sys, const ControlSet& controls, double r,
                              double R, const ConstantsOptions& options = {});
RobustConstants constants_for(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls, double r,
                              double R, const ConstantsOptions& options = {});
// Uses the envelope's alpha as given.
RobustConstants constants_for(std::shared_ptr<const MoreauEnvelope> env, const ControlSystem& sys,
                              const ControlSet& controls, double r, double R, const ConstantsOptions& options = {});

struct ScheduleChoice {
  std::string label;
  double h_factor{1.0};  // nominal gap as a multiple of delta_hi
  double jitter{0.0};
  std::uint64_t seed{1};
};

enum class ErrorModel { None, RadialOutward, CoordinateFlip, PiecewiseConstant, Sinusoid };
std::string_view to_string(ErrorModel model);
ErrorModel error_model_from_string(std::string_view name);

struct ErrorChoice {
  std::string label;
  ErrorModel model{ErrorModel::None};
  double eps_factor{0.0};  // |e| <= eps_factor * eps_bound
  int axis{0};             // CoordinateFlip: e = -eps sign(x_axis) e_axis
  std::uint64_t seed{1};
};

// Builds the measurement error signal of the given sup-norm.
Signal make_error_signal(const ErrorChoice& choice, int n, double eps, double dwell);

struct RobustExperimentSpec {
  std::vector<Vec> initial_states;
  std::vector<ScheduleChoice> schedules;
  std::vector<ErrorChoice> errors;
  double horizon{0.0};  // T_end = max(2 T_bound, horizon)
  bool check_decrease{true};
  double decrease_tolerance{1e-7};
  int substeps{16};
  double blowup{kDefaultBlowup};
  Execution exec{Execution::Parallel};
};

struct RobustCell {
  std::size_t x0_index{0}, schedule_index{0}, error_index{0};
  double diameter{0.0}, lower_diameter{0.0}, error_bound{0.0};
  bool band_compliant{false};
  bool error_compliant{false};
  bool escaped{false};
  double max_norm{0.0};
  double entry_time{0.0};  // last time outside B_r (0 if never)
  bool contained{false};   // |x(t)| <= R throughout
  bool entered{false};     // |x(t)| <= r for all t >= T_bound
  std::size_t decrease_checked{0};
  std::size_t decrease_violations{0};
  double worst_decrease_excess{0.0};
  bool passed() const { return contained && entered && decrease_violations == 0; }
};

struct RobustReport {
  RobustConstants constants;
  double T_end{0.0};
  std::vector<Vec> initial_states;
  std::vector<ScheduleChoice> schedules;
  std::vector<ErrorChoice> errors;
  std::vector<RobustCell> cells;  // ordered by (schedule, error, x0)
  std::size_t failures() const;
  std::size_t compliant_failures() const;
};

RobustReport robust_stabilization_experiment(const ControlSystem& sys, const RobustConstants& constants,
                                             const ControlSet& controls, const RobustExperimentSpec& spec);

// 16 states equally spaced on the circle of the given radius (n = 2), or the
// generic sphere sample otherwise.
std::vector<Vec> ring_states(int n, double radius, int count = 16);

nlohmann::json to_json(const RobustConstants& c);
nlohmann::json to_json(const RobustCell& cell);
nlohmann::json to_json(const RobustReport& report);
// The envelope pointer is not serialized and comes back empty.
RobustConstants robust_constants_from_json(const nlohmann::json& j);
RobustCell robust_cell_from_json(const nlohmann::json& j);
RobustReport robust_report_from_json(const nlohmann::json& j);

}  // namespace clfstab
