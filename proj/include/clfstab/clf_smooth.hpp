#pragma once

#include "clfstab/common.hpp"
#include "clfstab/comparison.hpp"
#include "clfstab/parallel.hpp"
#include "clfstab/systems.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace clfstab {

struct SmoothCLF {
  std::string name;
  int n{0};
  ScalarField V;
  VectorField grad;
  ScalarField W;  // decrease rate; positive definite
  std::optional<KFunction> lower;
  std::optional<KFunction> upper;
  bool small_control_property{false};
};

SmoothCLF quadratic_clf(int n, double scale = 0.5);
// V = 3/2 x1^2 + x1 x2 + x2^2, the oscillator example; W = |x|^2.
SmoothCLF oscillator_clf();
SmoothCLF log_quadratic_clf(int n);
// Artstein's CLF with its almost-everywhere gradient (the |x1| term is
// differentiated with sign(0) = 0), W = |x|^2 / 2.
SmoothCLF artstein_smooth_view();
// Wraps an arbitrary V; gradient by central differences when `grad` is empty.
SmoothCLF clf_from_value(std::string name, int n, ScalarField V, VectorField grad = {}, ScalarField W = {});

Vec fd_gradient(const ScalarField& V, const Vec& x, double h = 1e-6);

struct ClfValidation {
  bool zero_at_origin{false};
  bool positive_off_origin{false};
  bool sandwich_holds{true};
  double max_gradient_rel_error{0.0};
  bool ok(double grad_tol = 1e-4) const {
    return zero_at_origin && positive_off_origin && sandwich_holds && max_gradient_rel_error <= grad_tol;
  }
};
// Seeded samples in the ball of radius `radius`.
ClfValidation validate_clf(const SmoothCLF& clf, double radius, int samples, std::uint64_t seed = 1);

enum class Continuity { Smooth, Continuous, MeasurableDiscontinuous };
enum class Provenance { UniversalFormula, PointwiseMin, Proximal, User };

std::string_view to_string(Continuity c);
std::string_view to_string(Provenance p);

struct FeedbackLaw {
  std::string name;
  int n{0};
  int m{0};
  std::function<Vec(const Vec&)> k;
  Continuity continuity{Continuity::Continuous};
  Provenance provenance{Provenance::User};
  std::optional<ControlSet> controls;
  std::vector<std::string> notes;

  Vec operator()(const Vec& x) const { return k(x); }
};

FeedbackLaw zero_feedback(int n, int m);
FeedbackLaw user_feedback(std::string name, int n, int m, std::function<Vec(const Vec&)> k,
                          Continuity continuity = Continuity::Continuous);

// Universal formula. For m > 1, b = G^T grad V and k = -[(a + sqrt(a^2 + |b|^4)) / |b|^2] b.
FeedbackLaw universal_formula_feedback(const SmoothCLF& clf, const ControlSystem& sys);

// Index of the first strict minimum of objective over the (pre-sorted) grid.
std::size_t argmin_on_grid(const std::vector<Vec>& grid, const std::function<double(const Vec&)>& objective);

FeedbackLaw pointwise_min_feedback(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls);

// min over the control grid of grad V(x) . f(x,u). Rejects x = 0.
double clf_decrease_margin(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls, const Vec& x);

struct Region {
  double inner{0.0};
  double outer{1.0};
  // Grid points for which this returns true are skipped.
  std::function<bool(const Vec&)> exclude;
};

// Cartesian grid on [-outer, outer]^n with `resolution` points per axis,
// restricted to inner <= |x| <= outer. The axis midpoint is exactly 0 for
// odd resolutions.
std::vector<Vec> region_grid(int n, const Region& region, int resolution);

struct RegionViolation {
  Vec x;
  double margin{0.0};
  double bound{0.0};  // -W(x)
};

struct RegionReport {
  std::size_t points_checked{0};
  std::vector<RegionViolation> violations;
  double worst_excess{0.0};  // max over grid of margin + W(x)
  bool ok() const { return violations.empty(); }
};

nlohmann::json to_json(const RegionReport& report);
RegionReport region_report_from_json(const nlohmann::json& j);

RegionReport verify_clf_on_region(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls,
                                  const Region& region, int resolution, double tol = 1e-9,
                                  Execution exec = Execution::Parallel);

// Largest c with margin(x) <= -c |x|^2 on the region grid (0 if none).
double estimate_decrease_coefficient(const SmoothCLF& clf, const ControlSystem& sys, const ControlSet& controls,
                                     const Region& region, int resolution);
// Fills clf.W = c |x|^2 from the estimate when clf carries no W.
SmoothCLF with_default_rate(SmoothCLF clf, const ControlSystem& sys, const ControlSet& controls,
                            const Region& region, int resolution);

// max |k(x)| over `directions` points on each sphere |x| = delta.
std::vector<double> small_control_profile(const FeedbackLaw& k, const std::vector<double>& deltas, int directions = 64);
// |k(x)|/|x| on the same spheres; growth as delta -> 0 flags a feedback that
// is not Lipschitz at the origin.
std::vector<double> origin_lipschitz_ratios(const FeedbackLaw& k, const std::vector<double>& deltas,
                                            int directions = 64);

double artstein_value(const Vec& x);
Vec artstein_gradient(const Vec& x);

// Points on the sphere of radius r: exact angles for n = 2, +-r for n = 1,
// Fibonacci plus the axis directions otherwise.
std::vector<Vec> sphere_points(int n, double r, int count);

}  // namespace clfstab
