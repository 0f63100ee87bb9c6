#include "clfstab/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace clfstab {

namespace {

constexpr double kRel = 1e-9;  // absorbs roundoff in i*h schedule times

// Points on shells rho = R k / shells, k = 0..shells.
std::vector<Vec> ball_samples(int n, double R, int shells, int directions) {
  std::vector<Vec> pts;
  pts.push_back(Vec::Zero(n));
  for (int k = 1; k <= shells; ++k) {
    for (Vec& x : sphere_points(n, R * k / shells, directions)) pts.push_back(std::move(x));
  }
  return pts;
}

std::vector<Vec> random_ball(int n, double R, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Vec d(n);
    for (int j = 0; j < n; ++j) d[j] = normal(rng);
    d.normalize();
    pts.push_back(d * (R * std::pow(unit(rng), 1.0 / n)));
  }
  return pts;
}

double modulus_of_continuity(const ScalarField& W, int n, double R, double delta) {
  const auto pts = ball_samples(n, R, 24, 48);
  const auto dirs = sphere_points(n, delta, 2 * n <= 4 ? 16 : 4 * n);
  double omega = 0.0;
  for (const Vec& x : pts) {
    const double wx = W(x);
    for (const Vec& d : dirs) omega = std::max(omega, std::abs(W(Vec(x + d)) - wx));
  }
  return omega;
}

double sup_dynamics(const ControlSystem& sys, const ControlSet& controls, double R) {
  double m = 0.0;
  for (const Vec& x : ball_samples(sys.n, R, 32, 64)) {
    for (const Vec& u : controls.grid()) m = std::max(m, eval_dynamics(sys, x, u).norm());
  }
  return m;
}

double empirical_lipschitz(const MoreauEnvelope& env, int n, double R, int samples, std::uint64_t seed) {
  const auto pts = random_ball(n, R, samples, seed);
  const auto dirs = random_ball(n, 1.0, samples, seed ^ 0x5bd1e995ULL);
  const double step = 1e-3 * R;
  const auto quotients = map_indices<double>(pts.size(), Execution::Parallel, [&](std::size_t i) {
    Vec d = dirs[i];
    if (d.norm() == 0.0) return 0.0;
    d.normalize();
    Vec y = pts[i] + step * d;
    if (y.norm() > R) y = pts[i] - step * d;
    return std::abs(env.value(y) - env.value(pts[i])) / step;
  });
  return *std::max_element(quotients.begin(), quotients.end());
}

RobustConstants size_with_envelope(std::shared_ptr<const MoreauEnvelope> env, const ControlSystem& sys,
                                   const ControlSet& controls, RobustConstants c, const ConstantsOptions& options) {
  const ContinuousCLF& clf = env->base();
  c.alpha = env->alpha();
  c.omega_shift = modulus_of_continuity(clf.W, clf.n, c.R, c.rho_bar * c.alpha);
  const auto check = envelope_decrease_check(*env, sys, controls, c.r, c.R, options.check_resolution,
                                             options.decrease_fraction);
  if (!check.ok()) {
    throw Error(ErrorKind::PreconditionFailed, "envelope decrease fails on the annulus for alpha=" +
                                                   format_double(c.alpha) + " (worst margin " +
                                                   format_double(check.worst_margin) + ")");
  }
  c.envelope_worst_margin = check.worst_margin;
  c.c_formula = c.rho_bar / c.alpha + c.R / (c.alpha * c.alpha);
  c.c_empirical = empirical_lipschitz(*env, clf.n, c.R, options.lipschitz_samples, options.seed);
  c.c = std::max(options.lipschitz_safety * c.c_empirical, std::numeric_limits<double>::min());
  c.m = sup_dynamics(sys, controls, c.R);
  if (!(c.m > 0.0)) throw Error(ErrorKind::PreconditionFailed, "dynamics vanish on B_R x U0");
  c.decrease_fraction = options.decrease_fraction;
  c.delta_rate = 0.5 * options.decrease_fraction * c.gamma_r;
  c.kappa = c.delta_rate / (2.0 * c.c);
  c.delta_hi = std::min(1.0, c.gamma_r / (8.0 * c.c * c.m));
  c.delta_lo = options.band_ratio * c.delta_hi;
  c.eps_bound = c.kappa * c.delta_lo;
  c.T_bound = options.time_factor * c.gamma_R / c.delta_rate;
  c.envelope = std::move(env);
  return c;
}

RobustConstants base_constants(const ContinuousCLF& clf, double r, double R) {
  if (!(r > 0.0) || !(R > r) || !std::isfinite(R)) throw Error(ErrorKind::InvalidParams, "need 0 < r < R");
  RobustConstants c;
  c.r = r;
  c.R = R;
  c.gamma_r = rate_infimum(clf, r, R);
  c.gamma_R = rate_infimum(clf, R, R);
  if (!(2.0 * c.gamma_r < c.gamma_R)) {
    throw Error(ErrorKind::PreconditionFailed, "need 2 gamma(r) < gamma(R); got gamma(r)=" + format_double(c.gamma_r) +
                                                   ", gamma(R)=" + format_double(c.gamma_R));
  }
  double sup_v = 0.0;
  for (const Vec& x : ball_samples(clf.n, R, 32, 64)) sup_v = std::max(sup_v, clf.V(x));
  c.sup_V = sup_v;
  c.rho_bar = std::sqrt(2.0 * sup_v);
  return c;
}

}  // namespace

RobustConstants constants_for(const ContinuousCLF& clf, const ControlSystem& sys, const ControlSet& controls, double r,
                              double R, const ConstantsOptions& options) {
  if (clf.n != sys.n) throw Error(ErrorKind::DimensionMismatch, "CLF and system dimensions differ");
  RobustConstants base = base_constants(clf, r, R);
  if (options.alpha) {
    auto env = std::make_shared<MoreauEnvelope>(clf, *options.alpha, options.envelope);
    return size_with_envelope(std::move(env), sys, controls, base, options);
  }
  // Largest alpha = R / 2^k with omega(rho_bar alpha) < gamma(r) / 16 and a
  // verified envelope decrease.
  double alpha = R;
  std::string last_failure = "no candidate satisfied omega(rho_bar alpha) < gamma(r)/16";
  for (int k = 1; k <= options.max_halvings; ++k) {
    alpha *= 0.5;
    const double omega = modulus_of_continuity(clf.W, clf.n, R, base.rho_bar * alpha);
    if (!(omega < base.gamma_r / 16.0)) continue;
    try {
      auto env = std::make_shared<MoreauEnvelope>(clf, alpha, options.envelope);
      return size_with_envelope(std::move(env), sys, controls, base, options);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::PreconditionFailed) throw;
      last_failure = e.what();
    }
  }
  throw Error(ErrorKind::PreconditionFailed, "no admissible alpha: " + last_failure);
}

RobustConstants constants_for(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls, double r,
                              double R, const ConstantsOptions& options) {
  return constants_for(continuous_from_smooth(clf), sys, controls, r, R, options);
}

RobustConstants constants_for(std::shared_ptr<const MoreauEnvelope> env, const ControlSystem& sys,
                              const ControlSet& controls, double r, double R, const ConstantsOptions& options) {
  if (!env) throw Error(ErrorKind::InvalidParams, "constants_for: null envelope");
  if (env->base().n != sys.n) throw Error(ErrorKind::DimensionMismatch, "CLF and system dimensions differ");
  RobustConstants base = base_constants(env->base(), r, R);
  return size_with_envelope(std::move(env), sys, controls, base, options);
}

// Experiment ----------------------------------------------------------------

std::string_view to_string(ErrorModel model) {
  switch (model) {
    case ErrorModel::None: return "none";
    case ErrorModel::RadialOutward: return "radial-outward";
    case ErrorModel::CoordinateFlip: return "coordinate-flip";
    case ErrorModel::PiecewiseConstant: return "piecewise-constant";
    case ErrorModel::Sinusoid: return "sinusoid";
  }
  return "none";
}

ErrorModel error_model_from_string(std::string_view name) {
  for (ErrorModel m : {ErrorModel::None, ErrorModel::RadialOutward, ErrorModel::CoordinateFlip,
                       ErrorModel::PiecewiseConstant, ErrorModel::Sinusoid}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorKind::UnknownName, "unknown error model '" + std::string(name) + "'");
}

Signal make_error_signal(const ErrorChoice& choice, int n, double eps, double dwell) {
  switch (choice.model) {
    case ErrorModel::None: return Signal::zero(n);
    case ErrorModel::RadialOutward:
      return Signal::callback(
          n, eps,
          [eps, n](double, const Vec& x) -> Vec {
            const double norm = x.norm();
            return norm > 0.0 ? Vec(x * (eps / norm)) : Vec(Vec::Zero(n));
          },
          "radial-outward");
    case ErrorModel::CoordinateFlip: {
      const int axis = choice.axis;
      if (axis < 0 || axis >= n) throw Error(ErrorKind::InvalidParams, "coordinate-flip axis out of range");
      return Signal::callback(
          n, eps,
          [eps, n, axis](double, const Vec& x) -> Vec {
            Vec e = Vec::Zero(n);
            e[axis] = -eps * ((x[axis] > 0.0) - (x[axis] < 0.0));
            return e;
          },
          "coordinate-flip");
    }
    case ErrorModel::PiecewiseConstant:
      return Signal::piecewise_constant(n, choice.seed, dwell, eps / std::sqrt(static_cast<double>(n)));
    case ErrorModel::Sinusoid:
      return Signal::sinusoid(Vec::Constant(n, eps / std::sqrt(static_cast<double>(n))), 1.0 / (7.0 * dwell), 0.3);
  }
  return Signal::zero(n);
}

std::size_t RobustReport::failures() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const RobustCell& c) { return !c.passed(); }));
}

std::size_t RobustReport::compliant_failures() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const RobustCell& c) {
    return c.band_compliant && c.error_compliant && !c.passed();
  }));
}

RobustReport robust_stabilization_experiment(const ControlSystem& sys, const RobustConstants& constants,
                                             const ControlSet& controls, const RobustExperimentSpec& spec) {
  if (!constants.envelope) throw Error(ErrorKind::PreconditionFailed, "constants carry no envelope");
  if (spec.initial_states.empty() || spec.schedules.empty() || spec.errors.empty()) {
    throw Error(ErrorKind::InvalidParams, "experiment needs initial states, schedules and error models");
  }
  for (const Vec& x0 : spec.initial_states) require_dim(x0, sys.n, "experiment initial state");

  RobustReport report;
  report.constants = constants;
  report.T_end = std::max(2.0 * constants.T_bound, spec.horizon);
  report.initial_states = spec.initial_states;
  report.schedules = spec.schedules;
  report.errors = spec.errors;

  std::vector<SamplingSchedule> schedules;
  for (const auto& s : spec.schedules) {
    const double h = s.h_factor * constants.delta_hi;
    schedules.push_back(s.jitter > 0.0 ? SamplingSchedule::jittered(h, s.jitter, s.seed, report.T_end)
                                       : SamplingSchedule::uniform(h, report.T_end));
  }
  const FeedbackLaw k = proximal_feedback(constants.envelope, sys, controls);
  SampleDiagnostics diagnostics;
  if (spec.check_decrease) diagnostics.envelope = constants.envelope;

  const std::size_t nx = spec.initial_states.size();
  const std::size_t ne = spec.errors.size();
  const std::size_t count = spec.schedules.size() * ne * nx;
  report.cells = map_indices<RobustCell>(count, spec.exec, [&](std::size_t idx) {
    RobustCell cell;
    cell.x0_index = idx % nx;
    cell.error_index = (idx / nx) % ne;
    cell.schedule_index = idx / (nx * ne);
    const SamplingSchedule& schedule = schedules[cell.schedule_index];
    const ErrorChoice& err = spec.errors[cell.error_index];
    const double eps = err.eps_factor * constants.eps_bound;
    PerturbationSpec pert{make_error_signal(err, sys.n, eps, constants.delta_hi), Signal::zero(sys.n)};

    cell.diameter = schedule.diameter();
    cell.lower_diameter = schedule.lower_diameter();
    cell.error_bound = pert.e.sup_norm();
    cell.band_compliant = cell.lower_diameter >= constants.delta_lo * (1.0 - kRel) &&
                          cell.diameter <= constants.delta_hi * (1.0 + kRel);
    cell.error_compliant = cell.error_bound <= constants.eps_bound * (1.0 + kRel);

    IntegratorOptions opts;
    opts.substeps = spec.substeps;
    opts.blowup = spec.blowup;
    opts.record_dense = false;
    opts.watch_radius = constants.r;
    const PiTrajectory traj =
        simulate_pi_trajectory(sys, k, schedule, spec.initial_states[cell.x0_index], pert, opts, diagnostics);

    cell.escaped = traj.escaped;
    cell.max_norm = traj.max_norm;
    cell.entry_time = std::max(0.0, traj.last_outside_time);
    cell.contained = !traj.escaped && traj.max_norm <= constants.R;
    cell.entered = !traj.escaped && traj.last_outside_time <= constants.T_bound;
    if (spec.check_decrease) {
      const std::size_t samples = traj.samples();
      for (std::size_t i = 0; i + 1 < samples; ++i) {
        if (!(traj.sample_state(i).norm() > constants.r)) continue;
        const double tau = traj.sample_time(i + 1) - traj.sample_time(i);
        const double excess =
            traj.sample_Valpha[i + 1] - traj.sample_Valpha[i] + constants.delta_rate * tau - spec.decrease_tolerance;
        ++cell.decrease_checked;
        if (excess > 0.0) {
          ++cell.decrease_violations;
          cell.worst_decrease_excess = std::max(cell.worst_decrease_excess, excess);
        }
      }
    }
    return cell;
  });
  return report;
}

std::vector<Vec> ring_states(int n, double radius, int count) { return sphere_points(n, radius, count); }

// JSON ----------------------------------------------------------------------

nlohmann::json to_json(const RobustConstants& c) {
  return {{"r", c.r},
          {"R", c.R},
          {"gamma_r", c.gamma_r},
          {"gamma_R", c.gamma_R},
          {"alpha", c.alpha},
          {"sup_V", c.sup_V},
          {"rho_bar", c.rho_bar},
          {"omega_shift", c.omega_shift},
          {"c_formula", c.c_formula},
          {"c_empirical", c.c_empirical},
          {"c", c.c},
          {"m", c.m},
          {"delta_rate", c.delta_rate},
          {"kappa", c.kappa},
          {"delta_hi", c.delta_hi},
          {"delta_lo", c.delta_lo},
          {"eps_bound", c.eps_bound},
          {"T_bound", c.T_bound},
          {"decrease_fraction", c.decrease_fraction},
          {"envelope_worst_margin", c.envelope_worst_margin}};
}

nlohmann::json to_json(const RobustCell& cell) {
  return {{"x0_index", cell.x0_index},
          {"schedule_index", cell.schedule_index},
          {"error_index", cell.error_index},
          {"diameter", cell.diameter},
          {"lower_diameter", cell.lower_diameter},
          {"error_bound", cell.error_bound},
          {"band_compliant", cell.band_compliant},
          {"error_compliant", cell.error_compliant},
          {"escaped", cell.escaped},
          {"max_norm", cell.max_norm},
          {"entry_time", cell.entry_time},
          {"contained", cell.contained},
          {"entered", cell.entered},
          {"decrease_checked", cell.decrease_checked},
          {"decrease_violations", cell.decrease_violations},
          {"worst_decrease_excess", cell.worst_decrease_excess},
          {"passed", cell.passed()}};
}

nlohmann::json to_json(const RobustReport& report) {
  nlohmann::json j;
  j["constants"] = to_json(report.constants);
  j["T_end"] = report.T_end;
  auto& x0s = j["initial_states"] = nlohmann::json::array();
  for (const Vec& x : report.initial_states) x0s.push_back(std::vector<double>(x.data(), x.data() + x.size()));
  auto& sched = j["schedules"] = nlohmann::json::array();
  for (const auto& s : report.schedules) {
    sched.push_back({{"label", s.label}, {"h_factor", s.h_factor}, {"jitter", s.jitter}, {"seed", s.seed}});
  }
  auto& errs = j["errors"] = nlohmann::json::array();
  for (const auto& e : report.errors) {
    errs.push_back({{"label", e.label}, {"model", std::string(to_string(e.model))}, {"eps_factor", e.eps_factor},
                    {"axis", e.axis}, {"seed", e.seed}});
  }
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& c : report.cells) cells.push_back(to_json(c));
  j["summary"] = {{"cells", report.cells.size()},
                  {"failures", report.failures()},
                  {"compliant_failures", report.compliant_failures()}};
  return j;
}

RobustConstants robust_constants_from_json(const nlohmann::json& j) {
  RobustConstants c;
  auto get = [&](const char* key) { return j.at(key).get<double>(); };
  c.r = get("r");
  c.R = get("R");
  c.gamma_r = get("gamma_r");
  c.gamma_R = get("gamma_R");
  c.alpha = get("alpha");
  c.sup_V = get("sup_V");
  c.rho_bar = get("rho_bar");
  c.omega_shift = get("omega_shift");
  c.c_formula = get("c_formula");
  c.c_empirical = get("c_empirical");
  c.c = get("c");
  c.m = get("m");
  c.delta_rate = get("delta_rate");
  c.kappa = get("kappa");
  c.delta_hi = get("delta_hi");
  c.delta_lo = get("delta_lo");
  c.eps_bound = get("eps_bound");
  c.T_bound = get("T_bound");
  c.decrease_fraction = get("decrease_fraction");
  c.envelope_worst_margin = get("envelope_worst_margin");
  return c;
}

RobustCell robust_cell_from_json(const nlohmann::json& j) {
  RobustCell c;
  c.x0_index = j.at("x0_index").get<std::size_t>();
  c.schedule_index = j.at("schedule_index").get<std::size_t>();
  c.error_index = j.at("error_index").get<std::size_t>();
  c.diameter = j.at("diameter").get<double>();
  c.lower_diameter = j.at("lower_diameter").get<double>();
  c.error_bound = j.at("error_bound").get<double>();
  c.band_compliant = j.at("band_compliant").get<bool>();
  c.error_compliant = j.at("error_compliant").get<bool>();
  c.escaped = j.at("escaped").get<bool>();
  c.max_norm = j.at("max_norm").get<double>();
  c.entry_time = j.at("entry_time").get<double>();
  c.contained = j.at("contained").get<bool>();
  c.entered = j.at("entered").get<bool>();
  c.decrease_checked = j.at("decrease_checked").get<std::size_t>();
  c.decrease_violations = j.at("decrease_violations").get<std::size_t>();
  c.worst_decrease_excess = j.at("worst_decrease_excess").get<double>();
  return c;
}

RobustReport robust_report_from_json(const nlohmann::json& j) {
  RobustReport r;
  r.constants = robust_constants_from_json(j.at("constants"));
  r.T_end = j.at("T_end").get<double>();
  for (const auto& x : j.at("initial_states")) {
    const auto v = x.get<std::vector<double>>();
    Vec s(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) s[static_cast<Eigen::Index>(i)] = v[i];
    r.initial_states.push_back(s);
  }
  for (const auto& s : j.at("schedules")) {
    r.schedules.push_back({s.at("label").get<std::string>(), s.at("h_factor").get<double>(),
                           s.at("jitter").get<double>(), s.at("seed").get<std::uint64_t>()});
  }
  for (const auto& e : j.at("errors")) {
    r.errors.push_back({e.at("label").get<std::string>(), error_model_from_string(e.at("model").get<std::string>()),
                        e.at("eps_factor").get<double>(), e.at("axis").get<int>(), e.at("seed").get<std::uint64_t>()});
  }
  for (const auto& c : j.at("cells")) r.cells.push_back(robust_cell_from_json(c));
  return r;
}

}  // namespace clfstab
