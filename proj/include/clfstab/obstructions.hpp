#pragma once

#include "clfstab/common.hpp"
#include "clfstab/parallel.hpp"
#include "clfstab/systems.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace clfstab {

enum class BrockettStatus { FailsNecessaryCondition, Inconclusive };
// Exact verdicts come from rank computations; empirical ones from sampling
// the image of f and are evidence only.
enum class Evidence { Exact, Empirical };

std::string_view to_string(BrockettStatus s);
std::string_view to_string(Evidence e);
BrockettStatus brockett_status_from_string(std::string_view s);

struct BrockettVerdict {
  std::string test;
  BrockettStatus status{BrockettStatus::Inconclusive};
  Evidence evidence{Evidence::Exact};
  std::optional<Eigen::VectorXd> witness;  // direction (or target) that is not reached
  int rank{-1};
  double worst_residual{0.0};  // probe only
  std::size_t targets{0};      // probe only
  std::size_t targets_hit{0};  // probe only
  std::string detail;

  bool fails() const { return status == BrockettStatus::FailsNecessaryCondition; }
};

// Fails iff rank [A B] < n (column-pivoted QR, threshold 1e-10 relative to
// the largest pivot); witness is a unit left null vector of [A B].
BrockettVerdict brockett_linear_test(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Driftless control-affine systems x' = G(x) u: fails iff m < n and
// rank G(0) = m; witness spans part of the complement of Im G(0).
BrockettVerdict brockett_driftless_test(const ControlSystem& sys);

struct ProbeOptions {
  int starts{8};
  int max_iterations{200};  // per start
  double relative_tolerance{1e-6};
  std::uint64_t seed{7};
  Execution exec{Execution::Parallel};
};

// Targets p on the sphere of radius 0.1 x_radius; least-squares solve of
// f(x, u) = p over |x_j| <= x_radius, |u_j| <= u_radius. Fails when some
// target keeps a residual above 1e-6 |p|.
BrockettVerdict onto_neighborhood_probe(const ControlSystem& sys, double x_radius, double u_radius, int n_targets,
                                        const ProbeOptions& options = {});

// Jacobians of f at (0, 0) by central differences.
struct Linearization {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};
Linearization linearize_at_origin(const ControlSystem& sys, double h = 1e-6);

bool is_driftless_affine(const ControlSystem& sys, int samples = 64, std::uint64_t seed = 3);
// True when f(x, u) = Ax + Bu (linearization at the origin) at seeded samples.
bool is_linear(const ControlSystem& sys, int samples = 64, std::uint64_t seed = 3);

// Linear systems use the rank test, driftless affine systems the G(0) test,
// everything else the onto-neighborhood probe with unit radii.
BrockettVerdict brockett_check(const ControlSystem& sys, const ProbeOptions& options = {});

nlohmann::json to_json(const BrockettVerdict& v);
BrockettVerdict brockett_verdict_from_json(const nlohmann::json& j);

}  // namespace clfstab
