#include "clfstab/nonsmooth_clf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <random>

namespace clfstab {

ContinuousCLF artstein_clf() {
  ContinuousCLF clf;
  clf.name = "artstein";
  clf.n = 2;
  clf.V = artstein_value;
  clf.W = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  clf.lower = KFunction::power(0.5, 1.0);
  clf.upper = KFunction::power(1.0, 1.0);
  clf.rate_infimum = [](double s, double) { return 0.5 * s * s; };
  return clf;
}

ContinuousCLF continuous_from_smooth(const SmoothCLF& clf) {
  ContinuousCLF out;
  out.name = clf.name;
  out.n = clf.n;
  out.V = clf.V;
  out.W = clf.W;
  out.lower = clf.lower;
  out.upper = clf.upper;
  return out;
}

ContinuousCLF norm_clf(int n) {
  ContinuousCLF clf;
  clf.name = "norm";
  clf.n = n;
  clf.V = [](const Vec& x) { return x.norm(); };
  clf.W = [](const Vec& x) { return x.norm(); };
  clf.lower = KFunction::identity();
  clf.upper = KFunction::identity();
  clf.rate_infimum = [](double s, double) { return s; };
  return clf;
}

double rate_infimum(const ContinuousCLF& clf, double s, double outer, int radii, int directions) {
  if (clf.rate_infimum) return clf.rate_infimum(s, outer);
  if (!clf.W) throw Error(ErrorKind::InvalidParams, "rate_infimum: CLF carries no decrease rate W");
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < radii; ++i) {
    const double rho = radii == 1 ? s : s + (outer - s) * i / (radii - 1);
    for (const Vec& x : sphere_points(clf.n, rho, directions)) best = std::min(best, clf.W(x));
  }
  return best;
}

// MoreauEnvelope ----------------------------------------------------------------

namespace {

constexpr std::size_t kCacheCapacity = 1 << 16;

std::vector<Vec> poll_directions(int n) {
  std::vector<Vec> dirs;
  for (int j = 0; j < n; ++j) {
    for (double s : {1.0, -1.0}) {
      Vec e = Vec::Zero(n);
      e[j] = s;
      dirs.push_back(e);
    }
  }
  if (n <= 4) {
    const double c = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        for (double si : {1.0, -1.0}) {
          for (double sj : {1.0, -1.0}) {
            Vec e = Vec::Zero(n);
            e[i] = si * c;
            e[j] = sj * c;
            dirs.push_back(e);
          }
        }
      }
    }
  }
  return dirs;
}

struct SearchState {
  Vec y;
  double value;
  double step;
};

// Compass search with step halving, confined to the ball |y - center| <= radius.
// Returns false when the iteration budget runs out first.
template <typename Objective>
bool compass_search(const Objective& phi, const Vec& center, double radius, const std::vector<Vec>& dirs,
                    double step_floor, int& budget, SearchState& st) {
  while (st.step > step_floor) {
    if (--budget < 0) return false;
    Vec best_y = st.y;
    double best_v = st.value;
    for (const Vec& d : dirs) {
      Vec y = st.y + st.step * d;
      Vec off = y - center;
      const double dist = off.norm();
      if (dist > radius) y = center + off * (radius / dist);
      const double v = phi(y);
      if (v < best_v) {
        best_v = v;
        best_y = y;
      }
    }
    if (best_v < st.value) {
      st.value = best_v;
      st.y = best_y;
    } else {
      st.step *= 0.5;
    }
  }
  return true;
}

}  // namespace

std::size_t MoreauEnvelope::KeyHash::operator()(const std::vector<double>& key) const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : key) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h ^= bits + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

MoreauEnvelope::MoreauEnvelope(ContinuousCLF base, double alpha, EnvelopeOptions options)
    : base_(std::move(base)), alpha_(alpha), options_(options) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorKind::InvalidParams, "MoreauEnvelope: alpha must be > 0");
  if (!base_.V) throw Error(ErrorKind::InvalidParams, "MoreauEnvelope: base CLF has no value function");
  if (options_.restarts < 0) throw Error(ErrorKind::InvalidParams, "MoreauEnvelope: restarts must be >= 0");
}

std::size_t MoreauEnvelope::cache_size() const {
  std::shared_lock lock(cache_mutex_);
  return cache_.size();
}

InfConvolution MoreauEnvelope::evaluate(const Vec& x) const {
  require_dim(x, base_.n, "MoreauEnvelope state");
  if (!options_.cache) return minimize(x);
  std::vector<double> key(x.data(), x.data() + x.size());
  {
    std::shared_lock lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  InfConvolution result = minimize(x);
  std::unique_lock lock(cache_mutex_);
  if (cache_.size() >= kCacheCapacity) cache_.clear();
  cache_.emplace(std::move(key), result);
  return result;
}

InfConvolution MoreauEnvelope::minimize(const Vec& x) const {
  const double vx = base_.V(x);
  if (!std::isfinite(vx) || vx < 0.0) {
    throw Error(ErrorKind::NonFinite, "MoreauEnvelope: base V must be finite and >= 0");
  }
  if (vx == 0.0) return {0.0, x};
  const int n = base_.n;
  const double inv2a2 = 0.5 / (alpha_ * alpha_);
  const double radius = std::sqrt(2.0 * vx) * alpha_;
  auto phi = [&](const Vec& y) {
    const double v = base_.V(y);
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "MoreauEnvelope: base V returned a non-finite value");
    return v + (x - y).squaredNorm() * inv2a2;
  };
  static thread_local std::vector<Vec> dirs_cache;
  static thread_local int dirs_dim = -1;
  if (dirs_dim != n) {
    dirs_cache = poll_directions(n);
    dirs_dim = n;
  }
  const auto& dirs = dirs_cache;

  // seeds: x itself plus `restarts` deterministic points in the ball
  std::vector<SearchState> starts;
  starts.push_back({x, vx, 0.5 * radius});
  std::mt19937_64 rng(options_.seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < options_.restarts; ++k) {
    Vec d(n);
    for (int j = 0; j < n; ++j) d[j] = gauss(rng);
    const double rho = radius * std::pow(unit(rng), 1.0 / n);
    Vec y = x + d.normalized() * rho;
    starts.push_back({y, phi(y), 0.5 * radius});
  }

  int budget = options_.max_iterations;
  const double coarse_floor = 1e-4 * radius;
  // the step floor sits well below the value tolerance so kinks of V resolve too
  const double fine_floor = 1e-5 * options_.tolerance * std::max(1.0, x.norm());
  auto fail = [&] {
    return Error(ErrorKind::NonConvergence, "inf_convolve: iteration budget exhausted before meeting tolerance");
  };
  for (auto& st : starts) {
    if (!compass_search(phi, x, radius, dirs, coarse_floor, budget, st)) throw fail();
  }
  // best start wins; exact ties go to the minimizer closest to x
  std::size_t best = 0;
  for (std::size_t i = 1; i < starts.size(); ++i) {
    const double vi = starts[i].value;
    const double vb = starts[best].value;
    if (vi < vb || (vi == vb && (starts[i].y - x).norm() < (starts[best].y - x).norm())) best = i;
  }
  SearchState st = starts[best];
  if (!compass_search(phi, x, radius, dirs, fine_floor, budget, st)) throw fail();
  return {std::min(st.value, vx), st.value <= vx ? st.y : x};
}

Vec MoreauEnvelope::aim(const Vec& x) const {
  const auto r = evaluate(x);
  return (x - r.minimizer) / (alpha_ * alpha_);
}

FeedbackLaw proximal_feedback(std::shared_ptr<const MoreauEnvelope> env, const ControlSystem& sys,
                              const ControlSet& controls) {
  if (!env) throw Error(ErrorKind::InvalidParams, "proximal_feedback: null envelope");
  if (controls.dim() != sys.m) throw Error(ErrorKind::DimensionMismatch, "control set dimension differs from system");
  if (env->base().n != sys.n) throw Error(ErrorKind::DimensionMismatch, "envelope and system dimensions differ");
  FeedbackLaw law;
  law.name = "proximal(" + env->base().name + ")";
  law.n = sys.n;
  law.m = sys.m;
  law.continuity = Continuity::MeasurableDiscontinuous;
  law.provenance = Provenance::Proximal;
  law.controls = controls;
  law.k = [env, sys, grid = controls.grid()](const Vec& x) -> Vec {
    if (x.isZero(0.0)) return Vec::Zero(sys.m);
    const Vec zeta = env->aim(x);
    return grid[argmin_on_grid(grid, [&](const Vec& u) { return zeta.dot(sys.f(x, u)); })];
  };
  return law;
}

SubgradientTest proximal_subgradient_test(const ScalarField& V, const Vec& x, const Vec& zeta, double mu,
                                          double radius, int samples) {
  if (!(radius > 0.0) || samples < 100) {
    throw Error(ErrorKind::InvalidParams, "proximal_subgradient_test: need radius > 0 and samples >= 100");
  }
  const int n = static_cast<int>(x.size());
  const double vx = V(x);
  SubgradientTest out{true, std::numeric_limits<double>::infinity()};
  auto probe = [&](const Vec& y) {
    const Vec h = y - x;
    const double slack = V(y) - vx - zeta.dot(h) + mu * h.squaredNorm();
    out.worst_slack = std::min(out.worst_slack, slack);
  };
  if (n == 1) {
    for (int i = 0; i < samples; ++i) {
      // two-sided geometric spacing reaches all scales down to 1e-6 radius
      const double frac = std::pow(1e-6, 1.0 - static_cast<double>(i % (samples / 2)) / (samples / 2 - 1));
      const double sgn = i < samples / 2 ? 1.0 : -1.0;
      probe(x + make_vec({sgn * radius * frac}));
    }
  } else {
    const int shells = 10;
    const int per_shell = std::max(8, samples / shells);
    for (int s = 0; s < shells; ++s) {
      const double rho = radius * std::pow(1e-4, static_cast<double>(s) / (shells - 1));
      for (const Vec& d : sphere_points(n, 1.0, per_shell)) probe(x + rho * d);
    }
  }
  out.holds = out.worst_slack >= -1e-9;
  return out;
}

EnvelopeDecreaseReport envelope_decrease_check(const MoreauEnvelope& env, const ControlSystem& sys,
                                               const ControlSet& controls, double r, double R, int resolution,
                                               double decrease_fraction, Execution exec) {
  if (!(0.0 < r && r < R)) throw Error(ErrorKind::InvalidParams, "envelope_decrease_check: need 0 < r < R");
  EnvelopeDecreaseReport rep;
  rep.gamma_r = rate_infimum(env.base(), r, R);
  rep.threshold = -decrease_fraction * rep.gamma_r;
  const auto grid = region_grid(sys.n, Region{r, R, {}}, resolution);
  const auto& ugrid = controls.grid();
  auto margins = map_indices<double>(grid.size(), exec, [&](std::size_t i) {
    const Vec& x = grid[i];
    const Vec zeta = env.aim(x);
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& u : ugrid) best = std::min(best, zeta.dot(sys.f(x, u)));
    return best;
  });
  rep.points_checked = grid.size();
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rep.worst_margin = std::max(rep.worst_margin, margins[i]);
    if (margins[i] > rep.threshold) rep.violations.push_back({grid[i], margins[i], rep.threshold});
  }
  return rep;
}

}  // namespace clfstab
