#include "clfstab/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace clfstab {

namespace {
constexpr double kMinSlope = 1e-12;

void require_nonnegative(double s, const char* what) {
  if (!(s >= 0.0) || std::isnan(s)) {
    throw Error(ErrorKind::InvalidParams, std::string(what) + ": argument must be >= 0");
  }
}
}  // namespace

// KFunction ------------------------------------------------------------------

KFunction KFunction::power(double a, double p) {
  if (!(a > 0.0) || !(p > 0.0) || !std::isfinite(a) || !std::isfinite(p)) {
    throw Error(ErrorKind::InvalidParams, "KFunction::power: need finite a > 0, p > 0");
  }
  return KFunction(Power{a, p});
}

KFunction KFunction::piecewise_linear(std::vector<std::pair<double, double>> knots) {
  if (knots.empty() || knots.front() != std::pair<double, double>{0.0, 0.0}) {
    knots.insert(knots.begin(), {0.0, 0.0});
  }
  if (knots.size() < 2) throw Error(ErrorKind::InvalidParams, "KFunction::piecewise_linear: need a knot besides 0");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    auto& [s, v] = knots[i];
    const auto& [s_prev, v_prev] = knots[i - 1];
    if (!(s > s_prev) || !std::isfinite(s) || !std::isfinite(v)) {
      throw Error(ErrorKind::InvalidParams, "KFunction::piecewise_linear: knots must be finite with increasing s");
    }
    v = std::max(v, v_prev + kMinSlope * (s - s_prev));
  }
  return KFunction(PiecewiseLinear{std::move(knots)});
}

KFunction KFunction::with_domain_bound(double bound) const {
  KFunction out = *this;
  out.domain_bound_ = bound;
  return out;
}

double KFunction::eval(double s) const {
  require_nonnegative(s, "KFunction::eval");
  if (domain_bound_ && s > *domain_bound_) {
    throw Error(ErrorKind::InvalidParams, "KFunction::eval: argument outside the domain bound");
  }
  return std::visit(
      [s](const auto& rep) -> double {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, Power>) {
          return rep.a * std::pow(s, rep.p);
        } else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
          const auto& k = rep.knots;
          auto it = std::upper_bound(k.begin(), k.end(), s,
                                     [](double value, const auto& knot) { return value < knot.first; });
          std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - k.begin()), k.size() - 1);
          if (hi == 0) hi = 1;
          const auto& [s0, v0] = k[hi - 1];
          const auto& [s1, v1] = k[hi];
          return v0 + (v1 - v0) * (s - s0) / (s1 - s0);
        } else {
          return rep.outer->eval(rep.inner->eval(s));
        }
      },
      rep_);
}

double KFunction::inverse(double v) const {
  if (!(v >= 0.0)) throw Error(ErrorKind::InversionOutOfRange, "KFunction::inverse: value must be >= 0");
  double s = std::visit(
      [v](const auto& rep) -> double {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, Power>) {
          return std::pow(v / rep.a, 1.0 / rep.p);
        } else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
          const auto& k = rep.knots;
          auto it = std::upper_bound(k.begin(), k.end(), v,
                                     [](double value, const auto& knot) { return value < knot.second; });
          std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - k.begin()), k.size() - 1);
          if (hi == 0) hi = 1;
          const auto& [s0, v0] = k[hi - 1];
          const auto& [s1, v1] = k[hi];
          return s0 + (s1 - s0) * (v - v0) / (v1 - v0);
        } else {
          return rep.inner->inverse(rep.outer->inverse(v));
        }
      },
      rep_);
  if (domain_bound_ && s > *domain_bound_) {
    throw Error(ErrorKind::InversionOutOfRange, "KFunction::inverse: value outside the range on the domain");
  }
  return s;
}

RealFn KFunction::as_fn() const {
  return [self = *this](double s) { return self.eval(s); };
}

KFunction k_compose(const KFunction& outer, const KFunction& inner) {
  KFunction out(KFunction::Composite{std::make_shared<const KFunction>(outer), std::make_shared<const KFunction>(inner)});
  if (inner.domain_bound_) out.domain_bound_ = inner.domain_bound_;
  return out;
}

// Sampled class checks ------------------------------------------------------------

namespace {
std::vector<double> log_grid(double s_max, int points) {
  std::vector<double> g;
  const double lo = std::log(1e-6 * std::min(1.0, s_max));
  const double hi = std::log(s_max);
  for (int i = 0; i < points; ++i) g.push_back(std::exp(lo + (hi - lo) * i / (points - 1)));
  return g;
}
}  // namespace

bool sampled_class_k(const RealFn& f, double s_max, int points) {
  if (std::abs(f(0.0)) > 1e-12) return false;
  double prev = 0.0;
  for (double s : log_grid(s_max, points)) {
    double v = f(s);
    if (!std::isfinite(v) || !(v > prev)) return false;
    prev = v;
  }
  return true;
}

bool sampled_class_k_infinity(const RealFn& f, double s_max, int points, double growth_factor) {
  if (!sampled_class_k(f, s_max, points)) return false;
  return f(s_max) > growth_factor * f(1.0);
}

bool sampled_positive_definite(const RealFn& f, double s_max, int points) {
  if (std::abs(f(0.0)) > 1e-12) return false;
  for (double s : log_grid(s_max, points)) {
    double v = f(s);
    if (!std::isfinite(v) || !(v > 0.0)) return false;
  }
  return true;
}

// KLFunction ------------------------------------------------------------------

KLFunction KLFunction::exp_envelope(KFunction sigma, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidParams, "KLFunction::exp_envelope: lambda must be finite and >= 0");
  }
  return KLFunction(ExpEnvelope{std::move(sigma), lambda});
}

KLFunction KLFunction::tabulated(std::vector<double> s_grid, std::vector<double> t_grid, std::vector<double> values) {
  if (s_grid.size() < 2 || t_grid.empty() || values.size() != s_grid.size() * t_grid.size()) {
    throw Error(ErrorKind::InvalidParams, "KLFunction::tabulated: inconsistent grid sizes");
  }
  if (!std::is_sorted(s_grid.begin(), s_grid.end()) || !std::is_sorted(t_grid.begin(), t_grid.end())) {
    throw Error(ErrorKind::InvalidParams, "KLFunction::tabulated: grids must be increasing");
  }
  return KLFunction(Tabulated{std::move(s_grid), std::move(t_grid), std::move(values)});
}

namespace {
// Index of the segment [g[i], g[i+1]] containing x (clamped).
std::size_t segment(const std::vector<double>& g, double x) {
  if (g.size() < 2) return 0;
  auto it = std::upper_bound(g.begin(), g.end(), x);
  std::size_t i = static_cast<std::size_t>(it - g.begin());
  if (i == 0) return 0;
  return std::min(i - 1, g.size() - 2);
}
}  // namespace

double KLFunction::eval(double s, double t) const {
  require_nonnegative(s, "KLFunction::eval");
  require_nonnegative(t, "KLFunction::eval(t)");
  return std::visit(
      [s, t](const auto& rep) -> double {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, ExpEnvelope>) {
          return rep.sigma.eval(s) * std::exp(-rep.lambda * t);
        } else {
          const auto& sg = rep.s_grid;
          const auto& tg = rep.t_grid;
          const std::size_t nt = tg.size();
          auto at = [&](std::size_t i, std::size_t j) { return rep.values[i * nt + j]; };
          std::size_t i = segment(sg, s);
          double ws = (s - sg[i]) / (sg[i + 1] - sg[i]);  // may exceed 1: linear extrapolation in s
          auto column = [&](std::size_t j) { return at(i, j) + ws * (at(i + 1, j) - at(i, j)); };
          if (nt == 1 || t <= tg.front()) return column(0);
          if (t >= tg.back()) return column(nt - 1);
          std::size_t j = segment(tg, t);
          double wt = (t - tg[j]) / (tg[j + 1] - tg[j]);
          return column(j) + wt * (column(j + 1) - column(j));
        }
      },
      rep_);
}

KLFunction tabulate(const KLFunction& beta, const std::vector<double>& s_grid, const std::vector<double>& t_grid) {
  std::vector<double> values;
  values.reserve(s_grid.size() * t_grid.size());
  for (double s : s_grid) {
    for (double t : t_grid) values.push_back(beta.eval(s, t));
  }
  return KLFunction::tabulated(s_grid, t_grid, std::move(values));
}

// Envelope checks ------------------------------------------------------------------

EnvelopeReport check_envelope(const std::vector<Trajectory>& trajs,
                              const std::function<double(std::size_t, std::size_t)>& bound, Execution exec) {
  struct Partial {
    std::vector<Violation> violations;
    double max_ratio{0.0};
  };
  auto partials = map_indices<Partial>(trajs.size(), exec, [&](std::size_t k) {
    Partial p;
    const Trajectory& tr = trajs[k];
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double b = bound(k, i);
      const double tol = 1e-9 * (1.0 + std::abs(b));
      const double norm = tr.state_norm(i);
      p.max_ratio = std::max(p.max_ratio, norm / (b + tol));
      if (norm > b + tol) p.violations.push_back({k, tr.times[i], norm, b});
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

EnvelopeReport check_kl_estimate(const std::vector<Trajectory>& trajs, const KLFunction& beta, double eps,
                                 Execution exec) {
  std::vector<double> s0;
  for (const auto& tr : trajs) s0.push_back(tr.initial_norm());
  return check_envelope(
      trajs,
      [&](std::size_t k, std::size_t i) {
        const double t = trajs[k].times[i] - trajs[k].times.front();
        return std::max(beta.eval(s0[k], t), eps);
      },
      exec);
}

KLFunction fit_kl_envelope(const std::vector<Trajectory>& trajs, double floor_eps) {
  if (trajs.empty()) throw Error(ErrorKind::InvalidParams, "fit_kl_envelope: empty bundle");
  struct Point {
    double s, t, norm;
  };
  std::vector<Point> pts;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const Trajectory& tr = trajs[k];
    if (tr.escaped) {
      throw Error(ErrorKind::UnboundedBundle, "fit_kl_envelope: trajectory " + std::to_string(k) + " escaped");
    }
    const double s = tr.initial_norm();
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double norm = tr.state_norm(i);
      if (!std::isfinite(norm)) throw Error(ErrorKind::UnboundedBundle, "fit_kl_envelope: non-finite state");
      if (norm <= floor_eps) continue;
      if (s == 0.0) {
        throw Error(ErrorKind::UnboundedBundle,
                    "fit_kl_envelope: trajectory from the origin leaves the floor; no KL envelope exists");
      }
      pts.push_back({s, tr.times[i] - tr.times.front(), norm});
    }
  }
  if (pts.empty()) return KLFunction::exp_envelope(KFunction::identity(), 0.0);

  // least squares of log(|x|/s) against t
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (const auto& p : pts) {
    const double y = std::log(p.norm / p.s);
    st += p.t;
    sy += y;
    stt += p.t * p.t;
    sty += p.t * y;
  }
  const double count = static_cast<double>(pts.size());
  const double denom = count * stt - st * st;
  double lambda = 0.0;
  if (denom > 1e-12 * std::max(1.0, count * stt)) {
    const double slope = (count * sty - st * sy) / denom;
    lambda = std::max(0.0, -slope);
  }
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, p.norm / p.s * std::exp(lambda * p.t));
  scale *= 1.0 + 1e-12;
  return KLFunction::exp_envelope(KFunction::power(scale, 1.0), lambda);
}

// JSON -----------------------------------------------------------------------

nlohmann::json to_json(const KFunction& f) {
  nlohmann::json j = std::visit(
      [](const auto& rep) -> nlohmann::json {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, KFunction::Power>) {
          return {{"kind", "power"}, {"a", rep.a}, {"p", rep.p}};
        } else if constexpr (std::is_same_v<T, KFunction::PiecewiseLinear>) {
          nlohmann::json knots = nlohmann::json::array();
          for (const auto& [s, v] : rep.knots) knots.push_back({s, v});
          return {{"kind", "piecewise_linear"}, {"knots", knots}};
        } else {
          return {{"kind", "composite"}, {"outer", to_json(*rep.outer)}, {"inner", to_json(*rep.inner)}};
        }
      },
      f.representation());
  if (f.domain_bound()) j["domain_bound"] = *f.domain_bound();
  return j;
}

KFunction k_function_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    std::optional<KFunction> out;
    if (kind == "power") {
      out = KFunction::power(j.at("a").get<double>(), j.at("p").get<double>());
    } else if (kind == "piecewise_linear") {
      std::vector<std::pair<double, double>> knots;
      for (const auto& k : j.at("knots")) knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
      out = KFunction::piecewise_linear(std::move(knots));
    } else if (kind == "composite") {
      out = k_compose(k_function_from_json(j.at("outer")), k_function_from_json(j.at("inner")));
    } else {
      throw Error(ErrorKind::Validation, "unknown K-function kind '" + kind + "'");
    }
    if (j.contains("domain_bound")) out = out->with_domain_bound(j.at("domain_bound").get<double>());
    return *out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Validation, std::string("malformed K-function JSON: ") + e.what());
  }
}

nlohmann::json to_json(const KLFunction& f) {
  return std::visit(
      [](const auto& rep) -> nlohmann::json {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, KLFunction::ExpEnvelope>) {
          return {{"kind", "exp_envelope"}, {"sigma", to_json(rep.sigma)}, {"lambda", rep.lambda}};
        } else {
          return {{"kind", "tabulated"}, {"s_grid", rep.s_grid}, {"t_grid", rep.t_grid}, {"values", rep.values}};
        }
      },
      f.representation());
}

KLFunction kl_function_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "exp_envelope") {
      return KLFunction::exp_envelope(k_function_from_json(j.at("sigma")), j.at("lambda").get<double>());
    }
    if (kind == "tabulated") {
      return KLFunction::tabulated(j.at("s_grid").get<std::vector<double>>(), j.at("t_grid").get<std::vector<double>>(),
                                   j.at("values").get<std::vector<double>>());
    }
    throw Error(ErrorKind::Validation, "unknown KL-function kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Validation, std::string("malformed KL-function JSON: ") + e.what());
  }
}

nlohmann::json to_json(const EnvelopeReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& v : r.violations) {
    rows.push_back({{"trajectory", v.trajectory}, {"time", v.time}, {"norm", v.norm}, {"bound", v.bound}});
  }
  return {{"violations", rows}, {"max_ratio", r.max_ratio}, {"ok", r.ok()}};
}

EnvelopeReport envelope_report_from_json(const nlohmann::json& j) {
  try {
    EnvelopeReport r;
    r.max_ratio = j.at("max_ratio").get<double>();
    for (const auto& row : j.at("violations")) {
      r.violations.push_back({row.at("trajectory").get<std::size_t>(), row.at("time").get<double>(),
                              row.at("norm").get<double>(), row.at("bound").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Validation, std::string("malformed envelope report JSON: ") + e.what());
  }
}

}  // namespace clfstab
