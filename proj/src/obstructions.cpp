#include "clfstab/obstructions.hpp"

#include "clfstab/clf_smooth.hpp"
#include "clfstab/sampling_sim.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>

namespace clfstab {

std::string_view to_string(BrockettStatus s) {
  return s == BrockettStatus::FailsNecessaryCondition ? "fails_necessary_condition" : "inconclusive";
}

std::string_view to_string(Evidence e) { return e == Evidence::Exact ? "exact" : "EMPIRICAL"; }

BrockettStatus brockett_status_from_string(std::string_view s) {
  if (s == "fails_necessary_condition") return BrockettStatus::FailsNecessaryCondition;
  if (s == "inconclusive") return BrockettStatus::Inconclusive;
  throw Error(ErrorKind::UnknownName, "unknown Brockett status '" + std::string(s) + "'");
}

namespace {

constexpr double kRankThreshold = 1e-10;

// Largest-magnitude entry made positive.
Eigen::VectorXd canonical_sign(Eigen::VectorXd v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v[idx] < 0.0) v = -v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) < 1e-14) v[i] = 0.0;
  }
  return v;
}

int numerical_rank(const Eigen::MatrixXd& M) {
  if (M.size() == 0 || M.cwiseAbs().maxCoeff() == 0.0) return 0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  qr.setThreshold(kRankThreshold);
  return static_cast<int>(qr.rank());
}

// Unit vector orthogonal to the column space of M (rows = n), taken from the
// left singular vectors past `rank`.
Eigen::VectorXd left_null_vector(const Eigen::MatrixXd& M, int rank) {
  const auto n = M.rows();
  if (M.cols() == 0 || M.cwiseAbs().maxCoeff() == 0.0) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[0] = 1.0;
    return e;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU);
  return canonical_sign(svd.matrixU().col(rank));
}

}  // namespace

BrockettVerdict brockett_linear_test(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const auto n = A.rows();
  if (n == 0 || A.cols() != n || B.rows() != n) {
    throw Error(ErrorKind::DimensionMismatch, "brockett_linear_test: need A n x n and B n x m");
  }
  if (!A.allFinite() || !B.allFinite()) throw Error(ErrorKind::NonFinite, "brockett_linear_test: non-finite entries");
  Eigen::MatrixXd M(n, A.cols() + B.cols());
  M << A, B;
  BrockettVerdict v;
  v.test = "linear_rank";
  v.evidence = Evidence::Exact;
  v.rank = numerical_rank(M);
  if (v.rank < n) {
    v.status = BrockettStatus::FailsNecessaryCondition;
    v.witness = left_null_vector(M, v.rank);
    v.detail = "rank [A B] = " + std::to_string(v.rank) + " < n = " + std::to_string(n) +
               "; x' = Ax + Bu never points along the witness";
  } else {
    v.status = BrockettStatus::Inconclusive;
    v.detail = "rank [A B] = n";
  }
  return v;
}

bool is_driftless_affine(const ControlSystem& sys, int samples, std::uint64_t seed) {
  if (!sys.affine) return false;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  for (int s = 0; s < samples; ++s) {
    Vec x(sys.n);
    for (int j = 0; j < sys.n; ++j) x[j] = s == 0 ? 0.0 : unit(rng);
    if (affine_parts(sys, x).drift.norm() > 1e-12 * (1.0 + x.norm())) return false;
  }
  return true;
}

BrockettVerdict brockett_driftless_test(const ControlSystem& sys) {
  if (!sys.affine) throw Error(ErrorKind::NotAffine, "brockett_driftless_test: '" + sys.name + "' is not control-affine");
  if (!is_driftless_affine(sys)) {
    throw Error(ErrorKind::PreconditionFailed, "brockett_driftless_test: '" + sys.name + "' has a nonzero drift");
  }
  const Mat G0 = affine_parts(sys, Vec::Zero(sys.n)).input_matrix;
  const Eigen::MatrixXd G = G0;
  BrockettVerdict v;
  v.test = "driftless_rank";
  v.evidence = Evidence::Exact;
  v.rank = numerical_rank(G);
  if (sys.m < sys.n && v.rank == sys.m) {
    v.status = BrockettStatus::FailsNecessaryCondition;
    v.witness = left_null_vector(G, v.rank);
    v.detail = "m = " + std::to_string(sys.m) + " < n = " + std::to_string(sys.n) +
               " and rank G(0) = m; near 0 the image of f misses the witness direction";
  } else {
    v.status = BrockettStatus::Inconclusive;
    v.detail = "rank G(0) = " + std::to_string(v.rank) + ", m = " + std::to_string(sys.m) + ", n = " +
               std::to_string(sys.n);
  }
  return v;
}

Linearization linearize_at_origin(const ControlSystem& sys, double h) {
  Linearization lin{Eigen::MatrixXd(sys.n, sys.n), Eigen::MatrixXd(sys.n, sys.m)};
  const Vec x0 = Vec::Zero(sys.n);
  const Vec u0 = Vec::Zero(sys.m);
  for (int j = 0; j < sys.n; ++j) {
    Vec xp = x0, xm = x0;
    xp[j] = h;
    xm[j] = -h;
    lin.A.col(j) = (eval_dynamics(sys, xp, u0) - eval_dynamics(sys, xm, u0)) / (2.0 * h);
  }
  for (int j = 0; j < sys.m; ++j) {
    Vec up = u0, um = u0;
    up[j] = h;
    um[j] = -h;
    lin.B.col(j) = (eval_dynamics(sys, x0, up) - eval_dynamics(sys, x0, um)) / (2.0 * h);
  }
  return lin;
}

// Probe -----------------------------------------------------------------------

namespace {

struct BoxLeastSquares {
  const ControlSystem& sys;
  Eigen::VectorXd target;
  double x_radius;
  double u_radius;

  int dim() const { return sys.n + sys.m; }

  Eigen::VectorXd residual(const Eigen::VectorXd& z) const {
    const Vec x = z.head(sys.n);
    const Vec u = z.tail(sys.m);
    return Eigen::VectorXd(eval_dynamics(sys, x, u)) - target;
  }

  void clamp(Eigen::VectorXd& z) const {
    for (int j = 0; j < dim(); ++j) {
      const double bound = j < sys.n ? x_radius : u_radius;
      z[j] = std::clamp(z[j], -bound, bound);
    }
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd J(sys.n, dim());
    const double h = 1e-7 * std::max(x_radius, u_radius);
    for (int j = 0; j < dim(); ++j) {
      Eigen::VectorXd zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      J.col(j) = (residual(zp) - residual(zm)) / (2.0 * h);
    }
    return J;
  }
};

// Projected Levenberg-Marquardt; returns the best residual norm reached.
double solve_from(const BoxLeastSquares& problem, Eigen::VectorXd z, int max_iterations, double goal) {
  problem.clamp(z);
  Eigen::VectorXd r = problem.residual(z);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int it = 0; it < max_iterations && std::sqrt(cost) > goal; ++it) {
    const Eigen::MatrixXd J = problem.jacobian(z);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 12 && !improved; ++tries) {
      Eigen::MatrixXd H = JtJ;
      H.diagonal().array() += lambda * (1.0 + JtJ.diagonal().array());
      Eigen::VectorXd z_new = z - H.ldlt().solve(g);
      problem.clamp(z_new);
      const Eigen::VectorXd r_new = problem.residual(z_new);
      const double cost_new = r_new.squaredNorm();
      if (cost_new < cost) {
        z = std::move(z_new);
        r = r_new;
        cost = cost_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) break;
  }
  return std::sqrt(cost);
}

}  // namespace

BrockettVerdict onto_neighborhood_probe(const ControlSystem& sys, double x_radius, double u_radius, int n_targets,
                                        const ProbeOptions& options) {
  if (!(x_radius > 0.0) || !(u_radius > 0.0) || n_targets < 1) {
    throw Error(ErrorKind::InvalidParams, "onto_neighborhood_probe: need positive radii and at least one target");
  }
  const double target_radius = 0.1 * x_radius;
  const std::vector<Vec> targets = sphere_points(sys.n, target_radius, n_targets);

  std::vector<Eigen::VectorXd> starts;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  starts.push_back(Eigen::VectorXd::Zero(sys.n + sys.m));
  for (int s = 1; s < options.starts; ++s) {
    Eigen::VectorXd z(sys.n + sys.m);
    for (int j = 0; j < z.size(); ++j) z[j] = unit(rng) * (j < sys.n ? x_radius : u_radius);
    starts.push_back(z);
  }

  const auto residuals = map_indices<double>(targets.size(), options.exec, [&](std::size_t i) {
    BoxLeastSquares problem{sys, Eigen::VectorXd(targets[i]), x_radius, u_radius};
    const double goal = options.relative_tolerance * target_radius;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& z0 : starts) {
      best = std::min(best, solve_from(problem, z0, options.max_iterations, goal));
      if (best <= goal) break;
    }
    return best;
  });

  BrockettVerdict v;
  v.test = "onto_neighborhood_probe";
  v.evidence = Evidence::Empirical;
  v.targets = targets.size();
  const double goal = options.relative_tolerance * target_radius;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    if (residuals[i] <= goal) ++v.targets_hit;
    if (residuals[i] > residuals[worst]) worst = i;
  }
  v.worst_residual = residuals[worst];
  if (v.targets_hit < v.targets) {
    v.status = BrockettStatus::FailsNecessaryCondition;
    v.witness = Eigen::VectorXd(targets[worst]);
    v.detail = "EMPIRICAL: " + std::to_string(v.targets - v.targets_hit) + " of " + std::to_string(v.targets) +
               " targets on |p| = " + format_double(target_radius) + " not reached";
  } else {
    v.status = BrockettStatus::Inconclusive;
    v.detail = "EMPIRICAL: all targets reached";
  }
  return v;
}

bool is_linear(const ControlSystem& sys, int samples, std::uint64_t seed) {
  const Linearization lin = linearize_at_origin(sys);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  for (int s = 0; s < samples; ++s) {
    Vec x(sys.n), u(sys.m);
    for (int j = 0; j < sys.n; ++j) x[j] = unit(rng);
    for (int j = 0; j < sys.m; ++j) u[j] = unit(rng);
    const Eigen::VectorXd f = eval_dynamics(sys, x, u);
    const Eigen::VectorXd lin_f = lin.A * Eigen::VectorXd(x) + lin.B * Eigen::VectorXd(u);
    if ((f - lin_f).norm() > 1e-6 * (1.0 + f.norm())) return false;
  }
  return true;
}

BrockettVerdict brockett_check(const ControlSystem& sys, const ProbeOptions& options) {
  if (is_linear(sys)) {
    // Central differences leave ~1e-10 roundoff in exact zeros.
    Linearization lin = linearize_at_origin(sys);
    lin.A = lin.A.unaryExpr([](double a) { return std::abs(a) < 1e-8 ? 0.0 : a; });
    lin.B = lin.B.unaryExpr([](double a) { return std::abs(a) < 1e-8 ? 0.0 : a; });
    return brockett_linear_test(lin.A, lin.B);
  }
  if (sys.affine && is_driftless_affine(sys)) return brockett_driftless_test(sys);
  return onto_neighborhood_probe(sys, 1.0, 1.0, 32, options);
}

nlohmann::json to_json(const BrockettVerdict& v) {
  nlohmann::json j{{"test", v.test},
                   {"status", std::string(to_string(v.status))},
                   {"evidence", std::string(to_string(v.evidence))},
                   {"rank", v.rank},
                   {"detail", v.detail}};
  if (v.witness) j["witness"] = std::vector<double>(v.witness->data(), v.witness->data() + v.witness->size());
  else j["witness"] = nullptr;
  if (v.evidence == Evidence::Empirical) {
    j["targets"] = v.targets;
    j["targets_hit"] = v.targets_hit;
    j["worst_residual"] = v.worst_residual;
  }
  return j;
}

BrockettVerdict brockett_verdict_from_json(const nlohmann::json& j) {
  BrockettVerdict v;
  v.test = j.at("test").get<std::string>();
  v.status = brockett_status_from_string(j.at("status").get<std::string>());
  const auto ev = j.at("evidence").get<std::string>();
  if (ev == "exact") v.evidence = Evidence::Exact;
  else if (ev == "EMPIRICAL") v.evidence = Evidence::Empirical;
  else throw Error(ErrorKind::Validation, "unknown evidence '" + ev + "'");
  v.rank = j.at("rank").get<int>();
  v.detail = j.at("detail").get<std::string>();
  if (!j.at("witness").is_null()) {
    const auto w = j.at("witness").get<std::vector<double>>();
    v.witness = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  }
  if (v.evidence == Evidence::Empirical) {
    v.targets = j.at("targets").get<std::size_t>();
    v.targets_hit = j.at("targets_hit").get<std::size_t>();
    v.worst_residual = j.at("worst_residual").get<double>();
  }
  if (v.fails() && !v.witness) throw Error(ErrorKind::Validation, "failing verdict without witness");
  return v;
}

}  // namespace clfstab
