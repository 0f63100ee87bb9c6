#include "clfstab/clf_smooth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace clfstab {

// Builders -------------------------------------------------------------------

SmoothCLF quadratic_clf(int n, double scale) {
  SmoothCLF clf;
  clf.name = "quadratic";
  clf.n = n;
  clf.V = [scale](const Vec& x) { return scale * x.squaredNorm(); };
  clf.grad = [scale](const Vec& x) -> Vec { return 2.0 * scale * x; };
  clf.W = [scale](const Vec& x) { return scale * x.squaredNorm(); };
  clf.lower = KFunction::power(scale, 2.0);
  clf.upper = KFunction::power(scale, 2.0);
  clf.small_control_property = true;
  return clf;
}

SmoothCLF oscillator_clf() {
  SmoothCLF clf;
  clf.name = "oscillator";
  clf.n = 2;
  clf.V = [](const Vec& x) { return 1.5 * x[0] * x[0] + x[0] * x[1] + x[1] * x[1]; };
  clf.grad = [](const Vec& x) -> Vec { return make_vec({3.0 * x[0] + x[1], x[0] + 2.0 * x[1]}); };
  clf.W = [](const Vec& x) { return x.squaredNorm(); };
  // eigenvalues of [[1.5, 0.5], [0.5, 1]]
  const double lo = 1.25 - std::sqrt(0.0625 + 0.25);
  const double hi = 1.25 + std::sqrt(0.0625 + 0.25);
  clf.lower = KFunction::power(lo, 2.0);
  clf.upper = KFunction::power(hi, 2.0);
  return clf;
}

SmoothCLF log_quadratic_clf(int n) {
  SmoothCLF clf;
  clf.name = "log-quadratic";
  clf.n = n;
  clf.V = [](const Vec& x) { return std::log1p(x.squaredNorm()); };
  clf.grad = [](const Vec& x) -> Vec { return 2.0 * x / (1.0 + x.squaredNorm()); };
  clf.W = [](const Vec& x) { return x.squaredNorm() / (1.0 + x.squaredNorm()); };
  // chords of the concave t -> log(1 + t) lie below it; compose with s^2
  std::vector<std::pair<double, double>> knots;
  for (int k = -2; k <= 8; ++k) {
    const double t = std::pow(10.0, k);
    knots.emplace_back(t, std::log1p(t) * (1.0 - 1e-9));
  }
  clf.lower = k_compose(KFunction::piecewise_linear(knots), KFunction::power(1.0, 2.0));
  clf.upper = KFunction::power(1.0, 2.0);
  return clf;
}

double artstein_value(const Vec& x) {
  const double r2 = x.squaredNorm();
  if (r2 == 0.0) return 0.0;
  const double r = std::sqrt(r2);
  return r2 / (r + std::abs(x[0]));
}

Vec artstein_gradient(const Vec& x) {
  const double r2 = x.squaredNorm();
  if (r2 == 0.0) return Vec::Zero(2);
  const double r = std::sqrt(r2);
  const double s = (x[0] > 0.0) - (x[0] < 0.0);
  const double d = r + std::abs(x[0]);
  const double d2 = d * d;
  return make_vec({(2.0 * x[0] * d - r2 * (x[0] / r + s)) / d2, x[1] * (2.0 * d - r) / d2});
}

SmoothCLF artstein_smooth_view() {
  SmoothCLF clf;
  clf.name = "artstein";
  clf.n = 2;
  clf.V = artstein_value;
  clf.grad = artstein_gradient;
  clf.W = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  clf.lower = KFunction::power(0.5, 1.0);
  clf.upper = KFunction::power(1.0, 1.0);
  return clf;
}

Vec fd_gradient(const ScalarField& V, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x[j]));
    Vec xp = x;
    Vec xm = x;
    xp[j] += step;
    xm[j] -= step;
    g[j] = (V(xp) - V(xm)) / (xp[j] - xm[j]);
  }
  return g;
}

SmoothCLF clf_from_value(std::string name, int n, ScalarField V, VectorField grad, ScalarField W) {
  SmoothCLF clf;
  clf.name = std::move(name);
  clf.n = n;
  clf.V = V;
  clf.grad = grad ? std::move(grad) : VectorField([V](const Vec& x) { return fd_gradient(V, x); });
  clf.W = std::move(W);
  return clf;
}

ClfValidation validate_clf(const SmoothCLF& clf, double radius, int samples, std::uint64_t seed) {
  ClfValidation out;
  out.zero_at_origin = std::abs(clf.V(Vec::Zero(clf.n))) <= 1e-12;
  out.positive_off_origin = true;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < samples; ++s) {
    Vec dir(clf.n);
    for (int j = 0; j < clf.n; ++j) dir[j] = gauss(rng);
    const double rho = radius * (0.05 + 0.95 * unit(rng));
    Vec x = dir.normalized() * rho;
    const double v = clf.V(x);
    if (!(v > 0.0)) out.positive_off_origin = false;
    const double nx = x.norm();
    if (clf.lower && clf.lower->eval(nx) > v * (1 + 1e-12) + 1e-12) out.sandwich_holds = false;
    if (clf.upper && clf.upper->eval(nx) * (1 + 1e-12) + 1e-12 < v) out.sandwich_holds = false;
    Vec g = clf.grad(x);
    Vec g_fd = fd_gradient(clf.V, x);
    const double err = (g - g_fd).norm() / std::max(1e-8, g_fd.norm());
    out.max_gradient_rel_error = std::max(out.max_gradient_rel_error, err);
  }
  return out;
}

// Feedback laws -----------------------------------------------------------------

std::string_view to_string(Continuity c) {
  switch (c) {
    case Continuity::Smooth: return "smooth";
    case Continuity::Continuous: return "continuous";
    case Continuity::MeasurableDiscontinuous: return "measurable-discontinuous";
  }
  return "unknown";
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::UniversalFormula: return "universal-formula";
    case Provenance::PointwiseMin: return "pointwise-min";
    case Provenance::Proximal: return "proximal";
    case Provenance::User: return "user";
  }
  return "unknown";
}

FeedbackLaw zero_feedback(int n, int m) {
  FeedbackLaw k;
  k.name = "zero";
  k.n = n;
  k.m = m;
  k.k = [m](const Vec&) -> Vec { return Vec::Zero(m); };
  k.continuity = Continuity::Smooth;
  return k;
}

FeedbackLaw user_feedback(std::string name, int n, int m, std::function<Vec(const Vec&)> fn, Continuity continuity) {
  FeedbackLaw k;
  k.name = std::move(name);
  k.n = n;
  k.m = m;
  k.k = std::move(fn);
  k.continuity = continuity;
  return k;
}

FeedbackLaw universal_formula_feedback(const SmoothCLF& clf, const ControlSystem& sys) {
  if (!sys.affine) {
    throw Error(ErrorKind::NotAffine, "universal formula needs a control-affine system; '" + sys.name + "' is not");
  }
  if (clf.n != sys.n) throw Error(ErrorKind::DimensionMismatch, "CLF and system dimensions differ");
  FeedbackLaw law;
  law.name = "universal(" + clf.name + ")";
  law.n = sys.n;
  law.m = sys.m;
  law.continuity = Continuity::Continuous;
  law.provenance = Provenance::UniversalFormula;
  if (!clf.small_control_property) {
    law.notes.push_back("no small control property declared: continuity at the origin is not guaranteed");
  }
  law.k = [clf, sys](const Vec& x) -> Vec {
    const int m = sys.m;
    if (x.isZero(0.0)) return Vec::Zero(m);
    const Vec grad = clf.grad(x);
    const auto parts = affine_parts(sys, x);
    const double a = grad.dot(parts.drift);
    const Vec b = parts.input_matrix.transpose() * grad;
    const double b2 = b.squaredNorm();
    if (b2 == 0.0) {
      if (a >= 0.0) {
        throw Error(ErrorKind::CLFPremiseViolated,
                    "universal formula: a(x) >= 0 with b(x) = 0 at a nonzero state; V is not a CLF there");
      }
      return Vec::Zero(m);
    }
    const double root = std::sqrt(a * a + b2 * b2);
    // for a < 0 use the cancellation-free form (a + root) / b2 = b2 / (root - a)
    const double coeff = a > 0.0 ? (a + root) / b2 : b2 / (root - a);
    return -coeff * b;
  };
  return law;
}

std::size_t argmin_on_grid(const std::vector<Vec>& grid, const std::function<double(const Vec&)>& objective) {
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = objective(grid[i]);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  return best;
}

FeedbackLaw pointwise_min_feedback(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls) {
  if (controls.dim() != sys.m) throw Error(ErrorKind::DimensionMismatch, "control set dimension differs from system");
  FeedbackLaw law;
  law.name = "pointwise-min(" + clf.name + ")";
  law.n = sys.n;
  law.m = sys.m;
  law.continuity = Continuity::MeasurableDiscontinuous;
  law.provenance = Provenance::PointwiseMin;
  law.controls = controls;
  law.k = [clf, sys, grid = controls.grid()](const Vec& x) -> Vec {
    if (x.isZero(0.0)) return Vec::Zero(sys.m);
    const Vec grad = clf.grad(x);
    return grid[argmin_on_grid(grid, [&](const Vec& u) { return grad.dot(sys.f(x, u)); })];
  };
  return law;
}

double clf_decrease_margin(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls, const Vec& x) {
  require_dim(x, sys.n, "clf_decrease_margin state");
  if (x.isZero(0.0)) throw Error(ErrorKind::InvalidParams, "clf_decrease_margin: x = 0 is excluded");
  const Vec grad = clf.grad(x);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& u : controls.grid()) best = std::min(best, grad.dot(eval_dynamics(sys, x, u)));
  return best;
}

std::vector<Vec> region_grid(int n, const Region& region, int resolution) {
  if (resolution < 2 || !(region.outer > region.inner) || region.inner < 0.0) {
    throw Error(ErrorKind::InvalidParams, "region_grid: need resolution >= 2 and 0 <= inner < outer");
  }
  const double R = region.outer;
  const int last = resolution - 1;
  std::vector<double> axis;
  for (int i = 0; i <= last; ++i) axis.push_back(R * static_cast<double>(2 * i - last) / last);
  std::vector<Vec> out;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    Vec x(n);
    for (int j = 0; j < n; ++j) x[j] = axis[static_cast<std::size_t>(idx[j])];
    const double r = x.norm();
    if (r >= region.inner && r <= region.outer && r > 0.0 && !(region.exclude && region.exclude(x))) {
      out.push_back(x);
    }
    int j = n - 1;
    while (j >= 0 && ++idx[j] == resolution) {
      idx[j] = 0;
      --j;
    }
    if (j < 0) break;
  }
  return out;
}

RegionReport verify_clf_on_region(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls,
                                  const Region& region, int resolution, double tol, Execution exec) {
  if (!clf.W) throw Error(ErrorKind::InvalidParams, "verify_clf_on_region: CLF carries no decrease rate W");
  const double step = 2.0 * region.outer / (resolution - 1);
  if (region.inner < step && !region.exclude) {
    throw Error(ErrorKind::InvalidParams, "verify_clf_on_region: region must exclude a ball of radius >= grid step");
  }
  const auto grid = region_grid(sys.n, region, resolution);
  struct Cell {
    double margin;
    double bound;
  };
  auto cells = map_indices<Cell>(grid.size(), exec, [&](std::size_t i) {
    return Cell{clf_decrease_margin(clf, sys, controls, grid[i]), -clf.W(grid[i])};
  });
  RegionReport report;
  report.points_checked = grid.size();
  report.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double excess = cells[i].margin - cells[i].bound;
    report.worst_excess = std::max(report.worst_excess, excess);
    if (excess > tol) report.violations.push_back({grid[i], cells[i].margin, cells[i].bound});
  }
  return report;
}

double estimate_decrease_coefficient(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls,
                                     const Region& region, int resolution) {
  double c = std::numeric_limits<double>::infinity();
  for (const Vec& x : region_grid(sys.n, region, resolution)) {
    c = std::min(c, -clf_decrease_margin(clf, sys, controls, x) / x.squaredNorm());
  }
  return std::isfinite(c) ? std::max(c, 0.0) : 0.0;
}

SmoothCLF with_default_rate(SmoothCLF clf, const ControlSystem& sys, const ControlSet& controls, const Region& region,
                            int resolution) {
  if (clf.W) return clf;
  const double c = estimate_decrease_coefficient(clf, sys, controls, region, resolution);
  clf.W = [c](const Vec& x) { return c * x.squaredNorm(); };
  return clf;
}

std::vector<Vec> sphere_points(int n, double r, int count) {
  std::vector<Vec> pts;
  if (n == 1) {
    pts.push_back(make_vec({-r}));
    pts.push_back(make_vec({r}));
    return pts;
  }
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      const double th = 2.0 * std::numbers::pi * k / count;
      pts.push_back(make_vec({r * std::cos(th), r * std::sin(th)}));
    }
    return pts;
  }
  for (int j = 0; j < n; ++j) {
    for (double sgn : {1.0, -1.0}) {
      Vec e = Vec::Zero(n);
      e[j] = sgn * r;
      pts.push_back(e);
    }
  }
  if (n == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / count;
      const double rho = std::sqrt(1.0 - z * z);
      pts.push_back(make_vec({r * rho * std::cos(golden * k), r * rho * std::sin(golden * k), r * z}));
    }
  } else {
    std::mt19937_64 rng(0x5eedULL + static_cast<std::uint64_t>(n));
    std::normal_distribution<double> gauss;
    for (int k = 0; k < count; ++k) {
      Vec d(n);
      for (int j = 0; j < n; ++j) d[j] = gauss(rng);
      pts.push_back(d.normalized() * r);
    }
  }
  return pts;
}

std::vector<double> small_control_profile(const FeedbackLaw& k, const std::vector<double>& deltas, int directions) {
  std::vector<double> out;
  for (double d : deltas) {
    double worst = 0.0;
    for (const Vec& x : sphere_points(k.n, d, directions)) worst = std::max(worst, k(x).norm());
    out.push_back(worst);
  }
  return out;
}

std::vector<double> origin_lipschitz_ratios(const FeedbackLaw& k, const std::vector<double>& deltas, int directions) {
  auto profile = small_control_profile(k, deltas, directions);
  for (std::size_t i = 0; i < deltas.size(); ++i) profile[i] /= deltas[i];
  return profile;
}

// JSON ----------------------------------------------------------------------

nlohmann::json to_json(const RegionReport& report) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& r : report.violations) {
    v.push_back({{"x", std::vector<double>(r.x.data(), r.x.data() + r.x.size())}, {"margin", r.margin}, {"bound", r.bound}});
  }
  return {{"points_checked", report.points_checked},
          {"worst_excess", report.worst_excess},
          {"violations", v},
          {"ok", report.ok()}};
}

RegionReport region_report_from_json(const nlohmann::json& j) {
  RegionReport r;
  r.points_checked = j.at("points_checked").get<std::size_t>();
  r.worst_excess = j.at("worst_excess").get<double>();
  for (const auto& v : j.at("violations")) {
    const auto x = v.at("x").get<std::vector<double>>();
    Vec xv(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) xv[static_cast<Eigen::Index>(i)] = x[i];
    r.violations.push_back({xv, v.at("margin").get<double>(), v.at("bound").get<double>()});
  }
  return r;
}

}  // namespace clfstab
