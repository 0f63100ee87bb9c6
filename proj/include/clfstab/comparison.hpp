#pragma once

#include "clfstab/common.hpp"
#include "clfstab/parallel.hpp"
#include "clfstab/systems.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace clfstab {

// Class-K function. Piecewise-linear representations are extended past the
// last knot with the final slope, so they are class-K-infinity as well.
class KFunction {
 public:
  struct Power {
    double a;
    double p;
  };
  struct PiecewiseLinear {
    std::vector<std::pair<double, double>> knots;  // starts at (0,0)
  };
  struct Composite {
    std::shared_ptr<const KFunction> outer;
    std::shared_ptr<const KFunction> inner;
  };

  static KFunction power(double a, double p);
  static KFunction identity() { return power(1.0, 1.0); }
  // Knots need not include (0,0); it is prepended. Slopes below 1e-12 are
  // lifted so the function stays strictly increasing.
  static KFunction piecewise_linear(std::vector<std::pair<double, double>> knots);

  double operator()(double s) const { return eval(s); }
  double eval(double s) const;
  // Inverse on the range; throws InversionOutOfRange for v < 0.
  double inverse(double v) const;

  std::optional<double> domain_bound() const { return domain_bound_; }
  KFunction with_domain_bound(double bound) const;

  const auto& representation() const { return rep_; }
  RealFn as_fn() const;

 private:
  explicit KFunction(std::variant<Power, PiecewiseLinear, Composite> rep) : rep_(std::move(rep)) {}
  friend KFunction k_compose(const KFunction& outer, const KFunction& inner);

  std::variant<Power, PiecewiseLinear, Composite> rep_;
  std::optional<double> domain_bound_;
};

inline double k_eval(const KFunction& f, double s) { return f.eval(s); }
inline double k_inverse(const KFunction& f, double v) { return f.inverse(v); }
// (outer o inner)(s) = outer(inner(s)).
KFunction k_compose(const KFunction& outer, const KFunction& inner);

// Sampled class-K / K-infinity checks for plain functions (used to validate
// user-supplied rates). `s_max` bounds the grid; K-infinity additionally
// requires growth beyond `growth_factor * f(1)` at s_max.
bool sampled_class_k(const RealFn& f, double s_max, int points = 400);
bool sampled_class_k_infinity(const RealFn& f, double s_max = 1e6, int points = 400,
                              double growth_factor = 10.0);
bool sampled_positive_definite(const RealFn& f, double s_max, int points = 400);

class KLFunction {
 public:
  struct ExpEnvelope {
    KFunction sigma;
    double lambda;
  };
  struct Tabulated {
    std::vector<double> s_grid;
    std::vector<double> t_grid;
    std::vector<double> values;  // row-major [s][t]
  };

  static KLFunction exp_envelope(KFunction sigma, double lambda);
  static KLFunction tabulated(std::vector<double> s_grid, std::vector<double> t_grid, std::vector<double> values);

  double operator()(double s, double t) const { return eval(s, t); }
  double eval(double s, double t) const;
  const auto& representation() const { return rep_; }

 private:
  explicit KLFunction(std::variant<ExpEnvelope, Tabulated> rep) : rep_(std::move(rep)) {}
  std::variant<ExpEnvelope, Tabulated> rep_;
};

KLFunction tabulate(const KLFunction& beta, const std::vector<double>& s_grid, const std::vector<double>& t_grid);

struct Violation {
  std::size_t trajectory{0};
  double time{0.0};
  double norm{0.0};
  double bound{0.0};
};

struct EnvelopeReport {
  std::vector<Violation> violations;
  double max_ratio{0.0};
  bool ok() const { return violations.empty(); }
};

// Flags every sample with |x(t)| > max{beta(|x0|,t), eps} + 1e-9 (1 + bound).
EnvelopeReport check_kl_estimate(const std::vector<Trajectory>& trajs, const KLFunction& beta, double eps,
                                 Execution exec = Execution::Serial);

// Fits beta(s,t) = a s exp(-lambda t): lambda from log-domain least squares
// over samples above the floor, then `a` inflated to the smallest value that
// envelopes the bundle.
KLFunction fit_kl_envelope(const std::vector<Trajectory>& trajs, double floor_eps);

// Report-building helper shared with the ISS checks: `bound(traj, sample)`.
EnvelopeReport check_envelope(const std::vector<Trajectory>& trajs,
                              const std::function<double(std::size_t, std::size_t)>& bound, Execution exec);

// JSON forms.
nlohmann::json to_json(const KFunction& f);
KFunction k_function_from_json(const nlohmann::json& j);
nlohmann::json to_json(const KLFunction& f);
KLFunction kl_function_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnvelopeReport& r);
EnvelopeReport envelope_report_from_json(const nlohmann::json& j);

}  // namespace clfstab
