#include "clfstab/systems.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace clfstab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NotAffine: return "NotAffine";
    case ErrorKind::UnknownName: return "UnknownName";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::InversionOutOfRange: return "InversionOutOfRange";
    case ErrorKind::UnboundedBundle: return "UnboundedBundle";
    case ErrorKind::CLFPremiseViolated: return "CLFPremiseViolated";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::RefusedDiscontinuous: return "RefusedDiscontinuous";
    case ErrorKind::PreconditionFailed: return "PreconditionFailed";
    case ErrorKind::NotHurwitz: return "NotHurwitz";
    case ErrorKind::InverseConsistency: return "InverseConsistency";
    case ErrorKind::InvalidCandidate: return "InvalidCandidate";
    case ErrorKind::Validation: return "Validation";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

// ControlSet ---------------------------------------------------------------

namespace {

std::vector<double> axis_points(double lo, double hi, int resolution) {
  std::vector<double> pts;
  if (resolution <= 1 || hi == lo) {
    pts.push_back(0.5 * (lo + hi));
    return pts;
  }
  const int last = resolution - 1;
  pts.reserve(static_cast<std::size_t>(resolution));
  for (int i = 0; i <= last; ++i) {
    // symmetric form keeps the midpoint exact
    double w = static_cast<double>(2 * i - last) / last;
    pts.push_back(0.5 * (lo + hi) + 0.5 * (hi - lo) * w);
  }
  return pts;
}

std::vector<Vec> tensor_grid(const Vec& lo, const Vec& hi, int resolution) {
  const int m = static_cast<int>(lo.size());
  std::vector<std::vector<double>> axes;
  for (int j = 0; j < m; ++j) axes.push_back(axis_points(lo[j], hi[j], resolution));
  std::vector<Vec> out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
  while (true) {
    Vec u(m);
    for (int j = 0; j < m; ++j) u[j] = axes[j][idx[j]];
    out.push_back(u);
    int j = m - 1;
    while (j >= 0 && ++idx[j] == axes[j].size()) {
      idx[j] = 0;
      --j;
    }
    if (j < 0) break;
  }
  return out;
}

bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    if (a[j] != b[j]) return a[j] < b[j];
  }
  return false;
}

}  // namespace

ControlSet ControlSet::ball(int m, double radius, int resolution) {
  if (m < 1 || m > kMaxDim || !(radius > 0.0) || !std::isfinite(radius) || resolution < 2) {
    throw Error(ErrorKind::InvalidParams, "ControlSet::ball: need m in [1,8], finite radius > 0, resolution >= 2");
  }
  ControlSet s;
  s.kind_ = Kind::Ball;
  s.m_ = m;
  s.radius_ = radius;
  s.lo_ = Vec::Constant(m, -radius);
  s.hi_ = Vec::Constant(m, radius);
  s.resolution_ = resolution;
  for (const Vec& u : tensor_grid(s.lo_, s.hi_, resolution)) {
    double r = u.norm();
    // points outside the ball are projected onto the boundary shell
    s.grid_.push_back(r <= radius ? u : Vec(u * (radius / r)));
  }
  s.finalize();
  return s;
}

ControlSet ControlSet::box(Vec lo, Vec hi, int resolution) {
  if (lo.size() != hi.size() || lo.size() < 1 || resolution < 1) {
    throw Error(ErrorKind::InvalidParams, "ControlSet::box: bad bounds or resolution");
  }
  for (Eigen::Index j = 0; j < lo.size(); ++j) {
    if (!std::isfinite(lo[j]) || !std::isfinite(hi[j]) || lo[j] > 0.0 || hi[j] < 0.0) {
      throw Error(ErrorKind::InvalidParams, "ControlSet::box: bounds must be finite and bracket 0");
    }
  }
  ControlSet s;
  s.kind_ = Kind::Box;
  s.m_ = static_cast<int>(lo.size());
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  s.radius_ = std::max(s.lo_.cwiseAbs().maxCoeff(), s.hi_.cwiseAbs().maxCoeff());
  s.resolution_ = resolution;
  s.grid_ = tensor_grid(s.lo_, s.hi_, resolution);
  s.grid_.push_back(Vec::Zero(s.m_));
  s.finalize();
  return s;
}

ControlSet ControlSet::interval(double lo, double hi, int resolution) {
  return box(make_vec({lo}), make_vec({hi}), resolution);
}

ControlSet ControlSet::finite(std::vector<Vec> points) {
  if (points.empty()) throw Error(ErrorKind::InvalidParams, "ControlSet::finite: empty point list");
  const auto m = points.front().size();
  bool has_zero = false;
  for (const Vec& p : points) {
    if (p.size() != m || !p.allFinite()) {
      throw Error(ErrorKind::InvalidParams, "ControlSet::finite: inconsistent or non-finite point");
    }
    has_zero = has_zero || p.isZero(0.0);
  }
  if (!has_zero) throw Error(ErrorKind::InvalidParams, "ControlSet::finite: must contain the zero control");
  ControlSet s;
  s.kind_ = Kind::Finite;
  s.m_ = static_cast<int>(m);
  s.grid_ = std::move(points);
  s.lo_ = s.grid_.front();
  s.hi_ = s.grid_.front();
  for (const Vec& p : s.grid_) {
    s.lo_ = s.lo_.cwiseMin(p);
    s.hi_ = s.hi_.cwiseMax(p);
  }
  s.radius_ = 0.0;
  for (const Vec& p : s.grid_) s.radius_ = std::max(s.radius_, p.norm());
  s.resolution_ = static_cast<int>(s.grid_.size());
  s.finalize();
  return s;
}

void ControlSet::finalize() {
  std::sort(grid_.begin(), grid_.end(), [](const Vec& a, const Vec& b) {
    double na = a.squaredNorm();
    double nb = b.squaredNorm();
    if (na != nb) return na < nb;
    return lex_less(a, b);
  });
  grid_.erase(std::unique(grid_.begin(), grid_.end(),
                          [](const Vec& a, const Vec& b) { return a == b; }),
              grid_.end());
}

bool ControlSet::contains(const Vec& u, double tol) const {
  if (u.size() != m_) return false;
  switch (kind_) {
    case Kind::Ball: return u.norm() <= radius_ + tol;
    case Kind::Box: return ((u - lo_).array() >= -tol).all() && ((hi_ - u).array() >= -tol).all();
    case Kind::Finite:
      for (const Vec& p : grid_) {
        if ((p - u).norm() <= tol) return true;
      }
      return false;
  }
  return false;
}

std::string ControlSet::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Ball: os << "ball:" << radius_ << ":" << resolution_; break;
    case Kind::Box:
      os << "box:";
      for (Eigen::Index j = 0; j < lo_.size(); ++j) os << (j ? "," : "") << lo_[j];
      os << ":";
      for (Eigen::Index j = 0; j < hi_.size(); ++j) os << (j ? "," : "") << hi_[j];
      os << ":" << resolution_;
      break;
    case Kind::Finite: os << "finite:" << grid_.size(); break;
  }
  return os.str();
}

// Trajectory ---------------------------------------------------------------

Vec Trajectory::state(std::size_t i) const {
  return Eigen::Map<const Eigen::VectorXd>(states.data() + i * static_cast<std::size_t>(n), n);
}

Vec Trajectory::control(std::size_t i) const {
  return Eigen::Map<const Eigen::VectorXd>(controls.data() + i * static_cast<std::size_t>(m), m);
}

void Trajectory::push(double t, const Vec& x, const Vec& u) {
  times.push_back(t);
  states.insert(states.end(), x.data(), x.data() + x.size());
  controls.insert(controls.end(), u.data(), u.data() + u.size());
}

// Evaluation -----------------------------------------------------------------

Vec eval_dynamics(const ControlSystem& sys, const Vec& x, const Vec& u) {
  require_dim(x, sys.n, sys.name + " state");
  require_dim(u, sys.m, sys.name + " control");
  Vec dx = sys.f(x, u);
  require_dim(dx, sys.n, sys.name + " dynamics output");
  if (!dx.allFinite()) {
    throw Error(ErrorKind::NonFinite, sys.name + ": dynamics returned a non-finite value");
  }
  return dx;
}

AffineEval affine_parts(const ControlSystem& sys, const Vec& x) {
  if (!sys.affine) throw Error(ErrorKind::NotAffine, sys.name + " has no control-affine decomposition");
  require_dim(x, sys.n, sys.name + " state");
  AffineEval out{sys.affine->drift(x), sys.affine->input_matrix(x)};
  if (out.drift.size() != sys.n || out.input_matrix.rows() != sys.n || out.input_matrix.cols() != sys.m) {
    throw Error(ErrorKind::DimensionMismatch, sys.name + ": affine parts have wrong shape");
  }
  return out;
}

ControlSystem linear_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::string name) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || n < 1 || n > kMaxDim || B.cols() < 1 || B.cols() > kMaxDim) {
    throw Error(ErrorKind::DimensionMismatch, "linear_system: inconsistent A, B shapes");
  }
  Mat a = A;
  Mat b = B;
  ControlSystem sys;
  sys.name = std::move(name);
  sys.n = static_cast<int>(n);
  sys.m = static_cast<int>(B.cols());
  sys.f = [a, b](const Vec& x, const Vec& u) -> Vec { return a * x + b * u; };
  sys.affine = AffineParts{[a](const Vec& x) -> Vec { return a * x; },
                           [b](const Vec&) -> Mat { return b; }};
  sys.lipschitz_hint = A.norm();
  return sys;
}

double affine_consistency_error(const ControlSystem& sys, int samples, std::uint64_t seed,
                                double x_scale, double u_scale) {
  if (!sys.affine) throw Error(ErrorKind::NotAffine, sys.name + " has no control-affine decomposition");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vec x(sys.n);
    Vec u(sys.m);
    for (int j = 0; j < sys.n; ++j) x[j] = x_scale * unit(rng);
    for (int j = 0; j < sys.m; ++j) u[j] = u_scale * unit(rng);
    Vec fx = eval_dynamics(sys, x, u);
    auto parts = affine_parts(sys, x);
    Vec aff = parts.drift + parts.input_matrix * u;
    worst = std::max(worst, (fx - aff).norm() / (1.0 + fx.norm()));
  }
  return worst;
}

// Zoo ----------------------------------------------------------------------

namespace {

ControlSystem affine_system(std::string name, int n, int m, VectorField drift,
                            std::function<Mat(const Vec&)> input) {
  ControlSystem sys;
  sys.name = std::move(name);
  sys.n = n;
  sys.m = m;
  sys.f = [drift, input](const Vec& x, const Vec& u) -> Vec { return drift(x) + input(x) * u; };
  sys.affine = AffineParts{std::move(drift), std::move(input)};
  return sys;
}

ParamMap merge_params(const ZooEntry& entry, const ParamMap& given) {
  ParamMap out = entry.default_params;
  for (const auto& [key, value] : given) {
    if (!out.count(key)) {
      throw Error(ErrorKind::InvalidParams, "zoo system '" + entry.name + "' has no parameter '" + key + "'");
    }
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::InvalidParams, "parameter '" + key + "' must be finite");
    }
    out[key] = value;
  }
  return out;
}

}  // namespace

const std::vector<ZooEntry>& zoo_catalog() {
  static const std::vector<ZooEntry> catalog = {
      {"cubic-1d", "x' = x + u^3", {}},
      {"scalar-two-regions",
       "x' = x [(u+1)^2 - (2-x)] [(u-1)^2 - (x-1)]  (reconstructed from the region inequalities)", {}},
      {"scalar-linear", "x' = a x + b u", {{"a", 1.0}, {"b", 1.0}}},
      {"integrator", "x' = u, n = m = dim", {{"dim", 1.0}}},
      {"double-integrator", "x1' = x2, x2' = u", {}},
      {"forced-oscillator", "x1' = x2, x2' = -x1 - u", {}},
      {"shopping-cart", "x1' = u1 cos(th), x2' = u1 sin(th), th' = u2", {}},
      {"nonholonomic-integrator", "z1' = v1, z2' = v2, z3' = z1 v2", {}},
      {"artstein-circles", "x' = (x1^2 - x2^2, 2 x1 x2) u", {}},
      {"diagonal-scaling", "x1' = x1 u, x2' = x2 u", {}},
      {"rigid-body-reduced", "x1' = x2 x3, x2' = u1, x3' = u2", {}},
      {"gas-not-iss", "x' = -x + (x^2 + 1) u", {}},
      {"gas-not-iss-redesigned", "x' = -2x - x^3 + (x^2 + 1) u", {}},
      {"unstable-1d", "x' = x + (x^2 + 1) u", {}},
      {"arctan-iiss", "x' = -atan(x) + u", {}},
      {"uuu", "x1' = u2 u3, x2' = u1 u3, x3' = u1 u2", {}},
  };
  return catalog;
}

ControlSystem zoo_build(const std::string& name, const ParamMap& params) {
  const auto& catalog = zoo_catalog();
  auto it = std::find_if(catalog.begin(), catalog.end(), [&](const ZooEntry& e) { return e.name == name; });
  if (it == catalog.end()) throw Error(ErrorKind::UnknownName, "unknown zoo system '" + name + "'");
  const ParamMap p = merge_params(*it, params);

  ControlSystem sys;
  if (name == "cubic-1d") {
    sys.name = name;
    sys.n = 1;
    sys.m = 1;
    sys.f = [](const Vec& x, const Vec& u) -> Vec { return make_vec({x[0] + u[0] * u[0] * u[0]}); };
    sys.default_controls = ControlSet::interval(-3.0, 3.0);
  } else if (name == "scalar-two-regions") {
    sys.name = name;
    sys.n = 1;
    sys.m = 1;
    sys.f = [](const Vec& x, const Vec& u) -> Vec {
      const double s = x[0];
      const double v = u[0];
      return make_vec({s * ((v + 1) * (v + 1) - (2 - s)) * ((v - 1) * (v - 1) - (s - 1))});
    };
    sys.default_controls = ControlSet::interval(-3.0, 3.0);
    sys.notes = "right-hand side reconstructed so that x f(x,u) < 0 exactly on the two regions "
                "(u+1)^2 < 2-x and (u-1)^2 < x-1";
  } else if (name == "scalar-linear") {
    const double a = p.at("a");
    const double b = p.at("b");
    sys = affine_system(name, 1, 1, [a](const Vec& x) -> Vec { return make_vec({a * x[0]}); },
                        [b](const Vec&) -> Mat { return Mat::Constant(1, 1, b); });
    sys.lipschitz_hint = std::abs(a);
    sys.default_controls = ControlSet::interval(-3.0, 3.0);
  } else if (name == "integrator") {
    const double d = p.at("dim");
    if (d != std::floor(d) || d < 1 || d > kMaxDim) {
      throw Error(ErrorKind::InvalidParams, "integrator: dim must be an integer in [1, 8]");
    }
    const int n = static_cast<int>(d);
    sys = affine_system(name, n, n, [n](const Vec&) -> Vec { return Vec::Zero(n); },
                        [n](const Vec&) -> Mat { return Mat::Identity(n, n); });
    sys.lipschitz_hint = 0.0;
    sys.default_controls = ControlSet::box(Vec::Constant(n, -1.0), Vec::Constant(n, 1.0), n == 1 ? 101 : 21);
  } else if (name == "double-integrator") {
    sys = affine_system(name, 2, 1, [](const Vec& x) -> Vec { return make_vec({x[1], 0.0}); },
                        [](const Vec&) -> Mat {
                          Mat g(2, 1);
                          g << 0.0, 1.0;
                          return g;
                        });
    sys.default_controls = ControlSet::interval(-10.0, 10.0);
  } else if (name == "forced-oscillator") {
    sys = affine_system(name, 2, 1, [](const Vec& x) -> Vec { return make_vec({x[1], -x[0]}); },
                        [](const Vec&) -> Mat {
                          Mat g(2, 1);
                          g << 0.0, -1.0;
                          return g;
                        });
    sys.default_controls = ControlSet::interval(-10.0, 10.0);
  } else if (name == "shopping-cart") {
    sys = affine_system(name, 3, 2, [](const Vec&) -> Vec { return Vec::Zero(3); },
                        [](const Vec& x) -> Mat {
                          Mat g = Mat::Zero(3, 2);
                          g(0, 0) = std::cos(x[2]);
                          g(1, 0) = std::sin(x[2]);
                          g(2, 1) = 1.0;
                          return g;
                        });
    sys.default_controls = ControlSet::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 21);
  } else if (name == "nonholonomic-integrator") {
    sys = affine_system(name, 3, 2, [](const Vec&) -> Vec { return Vec::Zero(3); },
                        [](const Vec& z) -> Mat {
                          Mat g = Mat::Zero(3, 2);
                          g(0, 0) = 1.0;
                          g(1, 1) = 1.0;
                          g(2, 1) = z[0];
                          return g;
                        });
    sys.default_controls = ControlSet::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 21);
  } else if (name == "artstein-circles") {
    sys = affine_system(name, 2, 1, [](const Vec&) -> Vec { return Vec::Zero(2); },
                        [](const Vec& x) -> Mat {
                          Mat g(2, 1);
                          g << x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1];
                          return g;
                        });
    sys.default_controls = ControlSet::interval(-1.0, 1.0);
  } else if (name == "diagonal-scaling") {
    sys = affine_system(name, 2, 1, [](const Vec&) -> Vec { return Vec::Zero(2); },
                        [](const Vec& x) -> Mat {
                          Mat g(2, 1);
                          g << x[0], x[1];
                          return g;
                        });
    sys.default_controls = ControlSet::interval(-1.0, 1.0);
  } else if (name == "rigid-body-reduced") {
    sys = affine_system(name, 3, 2, [](const Vec& x) -> Vec { return make_vec({x[1] * x[2], 0.0, 0.0}); },
                        [](const Vec&) -> Mat {
                          Mat g = Mat::Zero(3, 2);
                          g(1, 0) = 1.0;
                          g(2, 1) = 1.0;
                          return g;
                        });
    sys.default_controls = ControlSet::box(Vec::Constant(2, -5.0), Vec::Constant(2, 5.0), 21);
    sys.notes = "reduced angular-velocity coordinates after inertia rescaling";
  } else if (name == "gas-not-iss" || name == "gas-not-iss-redesigned" || name == "unstable-1d") {
    VectorField drift;
    if (name == "gas-not-iss") {
      drift = [](const Vec& x) -> Vec { return make_vec({-x[0]}); };
    } else if (name == "gas-not-iss-redesigned") {
      drift = [](const Vec& x) -> Vec { return make_vec({-2.0 * x[0] - x[0] * x[0] * x[0]}); };
    } else {
      drift = [](const Vec& x) -> Vec { return make_vec({x[0]}); };
    }
    sys = affine_system(name, 1, 1, drift,
                        [](const Vec& x) -> Mat { return Mat::Constant(1, 1, x[0] * x[0] + 1.0); });
    sys.default_controls = ControlSet::interval(-3.0, 3.0);
  } else if (name == "arctan-iiss") {
    sys = affine_system(name, 1, 1, [](const Vec& x) -> Vec { return make_vec({-std::atan(x[0])}); },
                        [](const Vec&) -> Mat { return Mat::Constant(1, 1, 1.0); });
    sys.lipschitz_hint = 1.0;
    sys.default_controls = ControlSet::interval(-3.0, 3.0);
  } else if (name == "uuu") {
    sys.name = name;
    sys.n = 3;
    sys.m = 3;
    sys.f = [](const Vec&, const Vec& u) -> Vec { return make_vec({u[1] * u[2], u[0] * u[2], u[0] * u[1]}); };
    sys.default_controls = ControlSet::box(Vec::Constant(3, -1.0), Vec::Constant(3, 1.0), 11);
  }
  sys.name = name;
  return sys;
}

}  // namespace clfstab
