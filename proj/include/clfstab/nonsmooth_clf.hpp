#pragma once

#include "clfstab/clf_smooth.hpp"
#include "clfstab/common.hpp"
#include "clfstab/comparison.hpp"
#include "clfstab/parallel.hpp"
#include "clfstab/systems.hpp"

#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace clfstab {

struct ContinuousCLF {
  std::string name;
  int n{0};
  ScalarField V;
  ScalarField W;
  std::optional<KFunction> lower;
  std::optional<KFunction> upper;
  std::optional<KFunction> sigma;  // control magnitude bound in the decrease condition
  // Closed form for inf { W(x) : s <= |x| <= outer }, when known.
  std::function<double(double s, double outer)> rate_infimum;
};

ContinuousCLF artstein_clf();
ContinuousCLF continuous_from_smooth(const SmoothCLF& clf);
ContinuousCLF norm_clf(int n);  // V = |x|, W = |x|

// inf W over s <= |x| <= outer; uses the closed form when the CLF has one,
// otherwise samples spheres.
double rate_infimum(const ContinuousCLF& clf, double s, double outer, int radii = 64, int directions = 128);

struct EnvelopeOptions {
  int restarts{3};
  double tolerance{1e-8};  // target accuracy of successive objective values
  int max_iterations{20000};
  std::uint64_t seed{0x2545F4914F6CDD1DULL};
  bool cache{true};
};

struct InfConvolution {
  double value{0.0};
  Vec minimizer;
};

// V_alpha(x) = inf_y [ V(y) + |x - y|^2 / (2 alpha^2) ], searched in the
// ball |y - x| <= sqrt(2 V(x)) alpha, which contains every minimizer.
class MoreauEnvelope {
 public:
  MoreauEnvelope(ContinuousCLF base, double alpha, EnvelopeOptions options = {});

  const ContinuousCLF& base() const { return base_; }
  double alpha() const { return alpha_; }
  const EnvelopeOptions& options() const { return options_; }

  InfConvolution evaluate(const Vec& x) const;
  double value(const Vec& x) const { return evaluate(x).value; }
  // zeta_alpha(x) = (x - y_alpha(x)) / alpha^2
  Vec aim(const Vec& x) const;

  std::size_t cache_size() const;

 private:
  InfConvolution minimize(const Vec& x) const;

  ContinuousCLF base_;
  double alpha_;
  EnvelopeOptions options_;

  struct KeyHash {
    std::size_t operator()(const std::vector<double>& key) const noexcept;
  };
  mutable std::shared_mutex cache_mutex_;
  mutable std::unordered_map<std::vector<double>, InfConvolution, KeyHash> cache_;
};

inline InfConvolution inf_convolve(const MoreauEnvelope& env, const Vec& x) { return env.evaluate(x); }
inline Vec proximal_aim(const MoreauEnvelope& env, const Vec& x) { return env.aim(x); }

// k_alpha(x) = argmin over the control grid of zeta_alpha(x) . f(x,u).
FeedbackLaw proximal_feedback(std::shared_ptr<const MoreauEnvelope> env, const ControlSystem& sys,
                              const ControlSet& controls);

struct SubgradientTest {
  bool holds{false};
  double worst_slack{0.0};
};

// Checks V(y) >= V(x) + zeta.(y - x) - mu |y - x|^2 (slack >= -1e-9) on
// deterministic samples of the ball of the given radius around x.
SubgradientTest proximal_subgradient_test(const ScalarField& V, const Vec& x, const Vec& zeta, double mu,
                                          double radius, int samples = 200);

struct EnvelopeDecreaseReport {
  double gamma_r{0.0};
  double threshold{0.0};  // -c_dec * gamma(r)
  std::size_t points_checked{0};
  double worst_margin{0.0};
  std::vector<RegionViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Checks min_u zeta_alpha(x).f(x,u) <= -c_dec * gamma(r) on the annulus grid.
EnvelopeDecreaseReport envelope_decrease_check(const MoreauEnvelope& env, const ControlSystem& sys,
                                               const ControlSet& controls, double r, double R, int resolution,
                                               double decrease_fraction = 0.5,
                                               Execution exec = Execution::Parallel);

}  // namespace clfstab
