#include "clfstab/iss_analysis.hpp"

#include "clfstab/sampling_sim.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace clfstab {

InputTrajectory simulate_with_input(const ControlSystem& sys, const InputSignal& v, const Vec& x0, double T_end,
                                    double step, const FeedbackLaw* k, double blowup) {
  InputTrajectory out;
  out.traj = simulate_open_loop(sys, v, x0, T_end, step, k, blowup);
  out.input_sup = v.sup_norm();
  out.input_norms.reserve(out.traj.size());
  for (std::size_t i = 0; i < out.traj.size(); ++i) out.input_norms.push_back(v(out.traj.times[i], out.traj.state(i)).norm());
  return out;
}

namespace {

std::vector<Trajectory> bare(const std::vector<InputTrajectory>& trajs) {
  std::vector<Trajectory> out;
  out.reserve(trajs.size());
  for (const auto& t : trajs) out.push_back(t.traj);
  return out;
}

// Cumulative trapezoid of g(sample index) over the trajectory times.
std::vector<double> cumulative_integral(const std::vector<double>& times, const std::function<double(std::size_t)>& g) {
  std::vector<double> acc(times.size(), 0.0);
  double prev = times.empty() ? 0.0 : g(0);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double cur = g(i);
    acc[i] = acc[i - 1] + 0.5 * (times[i] - times[i - 1]) * (prev + cur);
    prev = cur;
  }
  return acc;
}

}  // namespace

EnvelopeReport check_iss_estimate(const std::vector<InputTrajectory>& trajs, const ISSEstimate& est, Execution exec) {
  std::vector<std::vector<double>> gains(trajs.size());
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    double running = 0.0;
    for (double u : trajs[k].input_norms) {
      running = std::max(running, u);
      gains[k].push_back(est.gamma.eval(running));
    }
  }
  const auto plain = bare(trajs);
  return check_envelope(
      plain,
      [&](std::size_t k, std::size_t i) {
        const auto& tr = plain[k];
        const double b = est.beta.eval(tr.initial_norm(), tr.times[i] - tr.times.front());
        return est.form == EstimateForm::Sum ? b + gains[k][i] : std::max(b, gains[k][i]);
      },
      exec);
}

EnvelopeReport check_iiss_estimate(const std::vector<InputTrajectory>& trajs, const KLFunction& beta,
                                   const KFunction& gamma, Execution exec) {
  std::vector<std::vector<double>> integrals(trajs.size());
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const auto& norms = trajs[k].input_norms;
    integrals[k] = cumulative_integral(trajs[k].traj.times, [&](std::size_t i) { return gamma.eval(norms[i]); });
  }
  const auto plain = bare(trajs);
  return check_envelope(
      plain,
      [&](std::size_t k, std::size_t i) {
        const auto& tr = plain[k];
        return beta.eval(tr.initial_norm(), tr.times[i] - tr.times.front()) + integrals[k][i];
      },
      exec);
}

EnvelopeReport check_integral_estimate(const std::vector<InputTrajectory>& trajs, const IntegralEstimate& est,
                                       Execution exec) {
  struct Partial {
    std::vector<Violation> violations;
    double max_ratio{0.0};
  };
  auto partials = map_indices<Partial>(trajs.size(), exec, [&](std::size_t k) {
    Partial p;
    const auto& tr = trajs[k].traj;
    const auto& norms = trajs[k].input_norms;
    const auto lhs = cumulative_integral(tr.times, [&](std::size_t i) { return std::pow(tr.state_norm(i), est.state_power); });
    const auto rhs_in = cumulative_integral(tr.times, [&](std::size_t i) { return std::pow(norms[i], est.input_power); });
    const double base = est.initial.eval(tr.initial_norm());
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double b = base + est.input_gain * rhs_in[i];
      const double tol = 1e-9 * (1.0 + std::abs(b));
      p.max_ratio = std::max(p.max_ratio, lhs[i] / (b + tol));
      if (lhs[i] > b + tol) p.violations.push_back({k, tr.times[i], lhs[i], b});
    }
    return p;
  });
  EnvelopeReport report;
  for (auto& p : partials) {
    report.max_ratio = std::max(report.max_ratio, p.max_ratio);
    report.violations.insert(report.violations.end(), p.violations.begin(), p.violations.end());
  }
  return report;
}

// Lyapunov candidates -----------------------------------------------------------

std::string_view to_string(DissipationForm form) {
  switch (form) {
    case DissipationForm::ISS: return "iss";
    case DissipationForm::IISS: return "iiss";
    case DissipationForm::Implication: return "implication";
  }
  return "iss";
}

void validate_candidate(const LyapunovCandidate& cand, double s_max) {
  if (!cand.V || !cand.alpha || !cand.gamma || cand.n < 1) {
    throw Error(ErrorKind::InvalidCandidate, "candidate '" + cand.name + "' needs V, alpha, gamma and n >= 1");
  }
  switch (cand.form) {
    case DissipationForm::ISS:
    case DissipationForm::Implication:
      if (!sampled_class_k_infinity(cand.alpha, s_max)) {
        throw Error(ErrorKind::InvalidCandidate, "candidate '" + cand.name + "': " + std::string(to_string(cand.form)) +
                                                     " form needs a class-K-infinity alpha");
      }
      break;
    case DissipationForm::IISS:
      if (!sampled_positive_definite(cand.alpha, s_max)) {
        throw Error(ErrorKind::InvalidCandidate, "candidate '" + cand.name + "': alpha is not positive definite");
      }
      break;
  }
  if (!sampled_class_k(cand.gamma, s_max)) {
    throw Error(ErrorKind::InvalidCandidate, "candidate '" + cand.name + "': gamma is not class-K");
  }
}

LyapunovReport verify_lyapunov_candidate(const LyapunovCandidate& cand, const ControlSystem& sys,
                                         const std::vector<Vec>& states, const std::vector<Vec>& inputs,
                                         Execution exec) {
  validate_candidate(cand);
  if (cand.n != sys.n) throw Error(ErrorKind::DimensionMismatch, "candidate and system dimensions differ");
  if (states.empty() || inputs.empty()) throw Error(ErrorKind::InvalidParams, "verify_lyapunov_candidate: empty grid");
  struct Partial {
    std::size_t checked{0};
    double worst{-std::numeric_limits<double>::infinity()};
    std::vector<DissipationViolation> violations;
  };
  auto partials = map_indices<Partial>(states.size(), exec, [&](std::size_t i) {
    Partial p;
    const Vec& x = states[i];
    require_dim(x, sys.n, "candidate grid state");
    const Vec grad = cand.grad ? cand.grad(x) : fd_gradient(cand.V, x);
    const double a = cand.alpha(x.norm());
    for (const Vec& u : inputs) {
      const double g = cand.gamma(u.norm());
      if (cand.form == DissipationForm::Implication && x.norm() < g) continue;
      const double vdot = grad.dot(eval_dynamics(sys, x, u));
      const double bound = cand.form == DissipationForm::Implication ? -a : -a + g;
      const double excess = vdot - bound;
      const double tol = 1e-9 * (1.0 + std::abs(vdot) + std::abs(a) + std::abs(g));
      ++p.checked;
      p.worst = std::max(p.worst, excess);
      if (excess > tol) p.violations.push_back({x, u, vdot, bound});
    }
    return p;
  });
  LyapunovReport report;
  for (auto& p : partials) {
    report.pairs_checked += p.checked;
    report.worst_excess = std::max(report.worst_excess, p.worst);
    report.violations.insert(report.violations.end(), p.violations.begin(), p.violations.end());
  }
  return report;
}

std::vector<Vec> box_grid(int dim, double half_width, int resolution) {
  if (dim < 1 || dim > kMaxDim || resolution < 1 || !(half_width >= 0.0)) {
    throw Error(ErrorKind::InvalidParams, "box_grid: bad dimension, width or resolution");
  }
  std::vector<double> axis(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) {
    axis[i] = resolution == 1 ? 0.0 : half_width * (2.0 * i - (resolution - 1)) / (resolution - 1);
  }
  std::vector<Vec> pts;
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  while (true) {
    Vec x(dim);
    for (int j = 0; j < dim; ++j) x[j] = axis[idx[j]];
    pts.push_back(x);
    int j = 0;
    while (j < dim && ++idx[j] == resolution) idx[j++] = 0;
    if (j == dim) break;
  }
  return pts;
}

// Asymptotic gain -------------------------------------------------------------

double GainProbe::estimate(double amplitude) const {
  if (!gamma_hat) throw Error(ErrorKind::PreconditionFailed, "gain probe has no finite rows");
  if (auto bound = gamma_hat->domain_bound(); bound && amplitude >= *bound) {
    throw Error(ErrorKind::InversionOutOfRange, "amplitude " + format_double(amplitude) + " has no finite gain");
  }
  return gamma_hat->eval(amplitude);
}

GainProbe asymptotic_gain_probe(const ControlSystem& sys, const FeedbackLaw* k, const std::vector<InputSignal>& inputs,
                                const std::vector<Vec>& initial_states, double horizon, double step,
                                double tail_fraction, Execution exec) {
  if (!(tail_fraction >= 0.2 && tail_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidParams, "asymptotic_gain_probe: tail window must cover at least 20% of the horizon");
  }
  if (inputs.empty() || initial_states.empty()) throw Error(ErrorKind::InvalidParams, "asymptotic_gain_probe: empty input or state set");
  const std::size_t nx = initial_states.size();
  struct Run {
    double tail{0.0};
    bool escaped{false};
  };
  const auto runs = map_indices<Run>(inputs.size() * nx, exec, [&](std::size_t idx) {
    const auto traj = simulate_with_input(sys, inputs[idx / nx], initial_states[idx % nx], horizon, step, k).traj;
    Run run;
    run.escaped = traj.escaped;
    const double start = (1.0 - tail_fraction) * horizon;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      if (traj.times[i] >= start) run.tail = std::max(run.tail, traj.state_norm(i));
    }
    return run;
  });

  GainProbe probe;
  probe.tail_fraction = tail_fraction;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    GainRow row;
    row.amplitude = inputs[i].sup_norm();
    for (std::size_t j = 0; j < nx; ++j) {
      const Run& r = runs[i * nx + j];
      row.escaped = row.escaped || r.escaped;
      row.limsup = std::max(row.limsup, r.tail);
    }
    if (row.escaped) row.limsup = std::numeric_limits<double>::infinity();
    probe.rows.push_back(row);
  }
  std::stable_sort(probe.rows.begin(), probe.rows.end(),
                   [](const GainRow& a, const GainRow& b) { return a.amplitude < b.amplitude; });

  std::map<double, double> envelope;
  std::optional<double> first_escape;
  double running = 0.0;
  for (const auto& row : probe.rows) {
    if (row.escaped) {
      first_escape = row.amplitude;
      break;
    }
    running = std::max(running, row.limsup);
    if (row.amplitude > 0.0) envelope[row.amplitude] = running;
  }
  if (!envelope.empty()) {
    KFunction g = KFunction::piecewise_linear({envelope.begin(), envelope.end()});
    probe.gamma_hat = first_escape ? g.with_domain_bound(*first_escape) : g;
  }
  return probe;
}

// Coordinate changes ----------------------------------------------------------

Diffeomorphism identity_map(int dim) {
  return {"identity", dim, [](const Vec& z) { return z; }, [](const Vec& x) { return x; },
          [dim](const Vec&) -> Mat { return Mat::Identity(dim, dim); }};
}

Diffeomorphism linear_map(const Eigen::MatrixXd& T) {
  if (T.rows() != T.cols() || T.rows() > kMaxDim) throw Error(ErrorKind::DimensionMismatch, "linear_map: need a square matrix");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(T);
  if (!lu.isInvertible()) throw Error(ErrorKind::InverseConsistency, "linear_map: matrix is singular");
  const Mat fwd = T;
  const Mat inv = lu.inverse();
  return {"linear", static_cast<int>(T.rows()), [fwd](const Vec& z) -> Vec { return fwd * z; },
          [inv](const Vec& x) -> Vec { return inv * x; }, [inv](const Vec&) -> Mat { return inv; }};
}

namespace {

Mat fd_jacobian(const VectorField& g, const Vec& x) {
  const Vec g0 = g(x);
  Mat J(g0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (g(xp) - g(xm)) / (2.0 * h);
  }
  return J;
}

void check_diffeomorphism(const Diffeomorphism& d, int samples, double radius, std::uint64_t seed) {
  if (!d.forward || !d.inverse) throw Error(ErrorKind::InvalidParams, "diffeomorphism '" + d.name + "' is incomplete");
  const Vec zero = Vec::Zero(d.dim);
  if (d.forward(zero).norm() > 1e-12 || d.inverse(zero).norm() > 1e-12) {
    throw Error(ErrorKind::InverseConsistency, "diffeomorphism '" + d.name + "' does not fix the origin");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-radius, radius);
  for (int s = 0; s < samples; ++s) {
    Vec z(d.dim);
    for (int j = 0; j < d.dim; ++j) z[j] = unit(rng);
    const Vec x = d.forward(z);
    require_dim(x, d.dim, "diffeomorphism image");
    const double err = std::max((d.inverse(x) - z).norm() / (1.0 + z.norm()), (d.forward(d.inverse(z)) - z).norm() / (1.0 + z.norm()));
    if (!(err <= 1e-8)) {
      throw Error(ErrorKind::InverseConsistency,
                  "diffeomorphism '" + d.name + "': inverse mismatch " + format_double(err) + " at a sample point");
    }
  }
}

}  // namespace

ControlSystem conjugate_system(const ControlSystem& sys, const Diffeomorphism& state, const Diffeomorphism& input,
                               int check_samples, double check_radius, std::uint64_t seed) {
  if (state.dim != sys.n || input.dim != sys.m) {
    throw Error(ErrorKind::DimensionMismatch, "conjugate_system: transform dimensions do not match the system");
  }
  check_diffeomorphism(state, check_samples, check_radius, seed);
  if (sys.m > 0) check_diffeomorphism(input, check_samples, check_radius, seed + 1);
  ControlSystem out;
  out.name = sys.name + "[" + state.name + "," + input.name + "]";
  out.n = sys.n;
  out.m = sys.m;
  out.notes = "conjugated: z' = D(T^-1)(T z) f(T z, S v)";
  out.f = [f = sys.f, state, input](const Vec& z, const Vec& v) -> Vec {
    const Vec x = state.forward(z);
    const Vec u = input.forward(v);
    const Mat J = state.inverse_jacobian ? state.inverse_jacobian(x) : fd_jacobian(state.inverse, x);
    return J * f(x, u);
  };
  return out;
}

ControlSystem closed_loop(const ControlSystem& sys, const FeedbackLaw& k) {
  if (k.n != sys.n || k.m != sys.m) throw Error(ErrorKind::DimensionMismatch, "closed_loop: feedback dimensions differ");
  ControlSystem out = sys;
  out.name = sys.name + "+" + k.name;
  out.f = [f = sys.f, k](const Vec& x, const Vec& v) -> Vec { return f(x, Vec(k(x) + v)); };
  if (sys.affine) {
    AffineParts parts;
    parts.drift = [a = *sys.affine, k](const Vec& x) -> Vec { return a.drift(x) + a.input_matrix(x) * k(x); };
    parts.input_matrix = sys.affine->input_matrix;
    out.affine = parts;
  }
  out.default_controls.reset();
  return out;
}

ControlSystem cascade_system(const ControlSystem& driven, const ControlSystem& driver) {
  if (driven.m != driver.n) throw Error(ErrorKind::DimensionMismatch, "cascade: driven input dimension must equal driver state dimension");
  if (driven.n + driver.n > kMaxDim) throw Error(ErrorKind::DimensionMismatch, "cascade: composite dimension too large");
  ControlSystem out;
  out.name = driven.name + "<-" + driver.name;
  out.n = driven.n + driver.n;
  out.m = driver.m;
  const int nx = driven.n;
  const int ny = driver.n;
  out.f = [fx = driven.f, fy = driver.f, nx, ny](const Vec& s, const Vec& u) -> Vec {
    const Vec x = s.head(nx);
    const Vec y = s.tail(ny);
    Vec out(nx + ny);
    out.head(nx) = fx(x, y);
    out.tail(ny) = fy(y, u);
    return out;
  };
  return out;
}

CascadeReport cascade_check(const ControlSystem& driven, const ControlSystem& driver,
                            const std::vector<Vec>& initial_states, double horizon, double step,
                            double convergence_tol, const std::optional<CascadeCandidates>& candidates,
                            Execution exec) {
  if (candidates) {
    const auto rep = verify_lyapunov_candidate(candidates->iss_candidate, driven, candidates->iss_states,
                                               candidates->iss_inputs, exec);
    if (!rep.ok()) {
      throw Error(ErrorKind::PreconditionFailed, "cascade_check: ISS candidate for the driven subsystem fails on its grid");
    }
  }
  const ControlSystem composite = cascade_system(driven, driver);
  struct Run {
    bool escaped{false};
    double tail{0.0};
    double final_norm{0.0};
  };
  const auto runs = map_indices<Run>(initial_states.size(), exec, [&](std::size_t i) {
    const auto traj = simulate_open_loop(composite, Signal::zero(composite.m), initial_states[i], horizon, step);
    Run r;
    r.escaped = traj.escaped;
    r.final_norm = traj.state_norm(traj.size() - 1);
    for (std::size_t j = 0; j < traj.size(); ++j) {
      if (traj.times[j] >= 0.75 * horizon) r.tail = std::max(r.tail, traj.state_norm(j));
    }
    return r;
  });
  CascadeReport report;
  report.runs = runs.size();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Run& r = runs[i];
    if (r.escaped) {
      ++report.escaped;
      report.diverging_runs.push_back(i);
      continue;
    }
    report.max_tail_norm = std::max(report.max_tail_norm, r.tail);
    report.max_final_norm = std::max(report.max_final_norm, r.final_norm);
    if (r.final_norm <= convergence_tol) ++report.converged;
    else report.diverging_runs.push_back(i);
  }
  return report;
}

// Linear gain -------------------------------------------------------------------

namespace {

double spectral_norm(const Eigen::MatrixXd& M) {
  if (M.size() == 1) return std::abs(M(0, 0));
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace

double linear_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() == 0 || A.rows() != A.cols() || B.rows() != A.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "linear_gain: need A n x n and B n x m");
  }
  const double max_re = Eigen::EigenSolver<Eigen::MatrixXd>(A).eigenvalues().real().maxCoeff();
  if (!(max_re < 0.0)) throw Error(ErrorKind::NotHurwitz, "linear_gain: A is not Hurwitz (max Re = " + format_double(max_re) + ")");
  auto norm_at = [&A](double t) { return spectral_norm(Eigen::MatrixXd((t * A).exp())); };

  // Segment length with |e^{LA}| <= 1/2, so the tail is a geometric series.
  double L = 1.0 / -max_re;
  double q = norm_at(L);
  for (int it = 0; q > 0.5; ++it) {
    if (it > 60) throw Error(ErrorKind::NonConvergence, "linear_gain: no contracting segment length");
    L *= 2.0;
    q = norm_at(L);
  }
  const double first = integrate(norm_at, 0.0, L, 1e-12);
  double total = first;
  for (int k = 1;; ++k) {
    const double head = norm_at(k * L);
    const double tail_bound = head * first / (1.0 - q);
    if (tail_bound <= 1e-8 * total) break;
    if (k > 100000) throw Error(ErrorKind::NonConvergence, "linear_gain: tail did not converge");
    total += integrate(norm_at, k * L, (k + 1) * L, 1e-12 * total);
  }
  return spectral_norm(B) * total;
}

// JSON --------------------------------------------------------------------------

nlohmann::json to_json(const GainProbe& probe) {
  nlohmann::json j;
  j["tail_fraction"] = probe.tail_fraction;
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const auto& r : probe.rows) {
    nlohmann::json row{{"amplitude", r.amplitude}, {"escaped", r.escaped}};
    if (r.escaped) {
      row["limsup"] = nullptr;
      row["gain"] = "no finite gain";
    } else {
      row["limsup"] = r.limsup;
      row["gain"] = probe.gamma_hat ? nlohmann::json(probe.gamma_hat->eval(r.amplitude)) : nlohmann::json(nullptr);
    }
    rows.push_back(row);
  }
  j["gamma_hat"] = probe.gamma_hat ? to_json(*probe.gamma_hat) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const LyapunovReport& report) {
  nlohmann::json j;
  j["pairs_checked"] = report.pairs_checked;
  j["worst_excess"] = report.pairs_checked ? nlohmann::json(report.worst_excess) : nlohmann::json(nullptr);
  j["ok"] = report.ok();
  auto& v = j["violations"] = nlohmann::json::array();
  for (const auto& d : report.violations) {
    v.push_back({{"x", std::vector<double>(d.x.data(), d.x.data() + d.x.size())},
                 {"u", std::vector<double>(d.u.data(), d.u.data() + d.u.size())},
                 {"vdot", d.vdot},
                 {"bound", d.bound}});
  }
  return j;
}

nlohmann::json to_json(const CascadeReport& report) {
  return {{"runs", report.runs},
          {"escaped", report.escaped},
          {"converged", report.converged},
          {"max_tail_norm", report.max_tail_norm},
          {"max_final_norm", report.max_final_norm},
          {"diverging_runs", report.diverging_runs},
          {"ok", report.ok()}};
}

namespace {
Vec vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}
}  // namespace

GainProbe gain_probe_from_json(const nlohmann::json& j) {
  GainProbe p;
  p.tail_fraction = j.at("tail_fraction").get<double>();
  for (const auto& r : j.at("rows")) {
    GainRow row;
    row.amplitude = r.at("amplitude").get<double>();
    row.escaped = r.at("escaped").get<bool>();
    row.limsup = row.escaped ? std::numeric_limits<double>::infinity() : r.at("limsup").get<double>();
    p.rows.push_back(row);
  }
  if (!j.at("gamma_hat").is_null()) p.gamma_hat = k_function_from_json(j["gamma_hat"]);
  return p;
}

LyapunovReport lyapunov_report_from_json(const nlohmann::json& j) {
  LyapunovReport r;
  r.pairs_checked = j.at("pairs_checked").get<std::size_t>();
  if (!j.at("worst_excess").is_null()) r.worst_excess = j["worst_excess"].get<double>();
  for (const auto& v : j.at("violations")) {
    r.violations.push_back({vec_from_json(v.at("x")), vec_from_json(v.at("u")), v.at("vdot").get<double>(),
                            v.at("bound").get<double>()});
  }
  return r;
}

CascadeReport cascade_report_from_json(const nlohmann::json& j) {
  CascadeReport r;
  r.runs = j.at("runs").get<std::size_t>();
  r.escaped = j.at("escaped").get<std::size_t>();
  r.converged = j.at("converged").get<std::size_t>();
  r.max_tail_norm = j.at("max_tail_norm").get<double>();
  r.max_final_norm = j.at("max_final_norm").get<double>();
  r.diverging_runs = j.at("diverging_runs").get<std::vector<std::size_t>>();
  return r;
}

}  // namespace clfstab
