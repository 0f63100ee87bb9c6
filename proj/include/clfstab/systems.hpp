#pragma once

#include "clfstab/common.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace clfstab {

// Compact control set containing 0. The argmin-based feedbacks enumerate
// `grid()`, which is pre-sorted by (|u|, lexicographic) so that the first
// strict minimizer found is also the tie-break winner.
class ControlSet {
 public:
  enum class Kind { Ball, Box, Finite };

  static ControlSet ball(int m, double radius, int resolution = 101);
  static ControlSet box(Vec lo, Vec hi, int resolution = 101);
  static ControlSet interval(double lo, double hi, int resolution = 101);
  static ControlSet finite(std::vector<Vec> points);

  Kind kind() const { return kind_; }
  int dim() const { return m_; }
  double radius() const { return radius_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  int resolution() const { return resolution_; }
  const std::vector<Vec>& grid() const { return grid_; }
  bool contains(const Vec& u, double tol = 1e-12) const;
  std::string describe() const;

 private:
  ControlSet() = default;
  void finalize();

  Kind kind_{Kind::Box};
  int m_{0};
  double radius_{0.0};
  Vec lo_, hi_;
  int resolution_{0};
  std::vector<Vec> grid_;
};

struct AffineParts {
  VectorField drift;                          // f0
  std::function<Mat(const Vec&)> input_matrix;  // G, n x m
};

using Dynamics = std::function<Vec(const Vec& x, const Vec& u)>;

struct ControlSystem {
  std::string name;
  int n{0};
  int m{0};
  Dynamics f;
  std::optional<AffineParts> affine;
  std::optional<double> lipschitz_hint;
  std::optional<ControlSet> default_controls;
  std::string notes;
};

struct Trajectory {
  int n{0};
  int m{0};
  std::vector<double> times;
  std::vector<double> states;    // row-major, n per time
  std::vector<double> controls;  // row-major, m per time (value applied from that time on)
  bool escaped{false};
  double escape_time{0.0};

  std::size_t size() const { return times.size(); }
  Vec state(std::size_t i) const;
  Vec control(std::size_t i) const;
  double state_norm(std::size_t i) const { return state(i).norm(); }
  double initial_norm() const { return times.empty() ? 0.0 : state_norm(0); }
  void push(double t, const Vec& x, const Vec& u);
};

inline constexpr double kDefaultBlowup = 1e6;

Vec eval_dynamics(const ControlSystem& sys, const Vec& x, const Vec& u);

struct AffineEval {
  Vec drift;
  Mat input_matrix;
};
AffineEval affine_parts(const ControlSystem& sys, const Vec& x);

// Closed-form linear system x' = A x + B u.
ControlSystem linear_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            std::string name = "linear");

// Max |f(x,u) - f0(x) - G(x) u| / (1 + |f(x,u)|) over seeded samples, x in a
// box of half-width `x_scale`, u in a box of half-width `u_scale`.
double affine_consistency_error(const ControlSystem& sys, int samples, std::uint64_t seed,
                                double x_scale = 2.0, double u_scale = 2.0);

// Zoo catalog ------------------------------------------------------------

using ParamMap = std::map<std::string, double>;

struct ZooEntry {
  std::string name;
  std::string description;
  ParamMap default_params;
};

const std::vector<ZooEntry>& zoo_catalog();
ControlSystem zoo_build(const std::string& name, const ParamMap& params = {});

}  // namespace clfstab
