#include <doctest.h>

#include "clfstab/clf_smooth.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace clfstab;

namespace {

bool throws_kind(ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

Vec random_state(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> unit(-scale, scale);
  Vec x(n);
  for (int j = 0; j < n; ++j) x[j] = unit(rng);
  return x;
}

}  // namespace

TEST_CASE("universal formula examples") {
  const auto sys = zoo_build("scalar-linear");
  const auto k = universal_formula_feedback(quadratic_clf(1), sys);
  CHECK(k(make_vec({1.0}))[0] == doctest::Approx(-(1.0 + std::sqrt(2.0))).epsilon(1e-14));
  CHECK(k(make_vec({-0.5}))[0] == doctest::Approx(0.5 * (1.0 + std::sqrt(2.0))).epsilon(1e-14));
  CHECK(k(make_vec({0.0}))[0] == 0.0);
  CHECK(k.continuity == Continuity::Continuous);
  CHECK(k.provenance == Provenance::UniversalFormula);

  // b(x) = 0 with a(x) = -1 at x = (1, 0)
  Eigen::MatrixXd A = -Eigen::MatrixXd::Identity(2, 2), B(2, 1);
  B << 0, 1;
  const auto lin = linear_system(A, B);
  const auto kl = universal_formula_feedback(quadratic_clf(2), lin);
  CHECK(kl(make_vec({1.0, 0.0}))[0] == 0.0);
  CHECK(clf_decrease_margin(quadratic_clf(2), lin, ControlSet::interval(-1, 1), make_vec({1.0, 0.0})) == -1.0);

  CHECK(throws_kind(ErrorKind::NotAffine, [] { universal_formula_feedback(quadratic_clf(1), zoo_build("cubic-1d")); }));
  CHECK(throws_kind(ErrorKind::DimensionMismatch,
                    [] { universal_formula_feedback(quadratic_clf(2), zoo_build("scalar-linear")); }));
}

TEST_CASE("universal formula rejects states where V is not a CLF") {
  // x' = x with no usable input at x: a > 0, b = 0
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2), B(2, 1);
  B << 0, 1;
  const auto k = universal_formula_feedback(quadratic_clf(2), linear_system(A, B));
  CHECK(throws_kind(ErrorKind::CLFPremiseViolated, [&] { k(make_vec({1.0, 0.0})); }));
}

TEST_CASE("pointwise minimization examples") {
  const auto sys = zoo_build("scalar-linear");
  const auto U = ControlSet::interval(-3, 3, 61);
  const auto k = pointwise_min_feedback(quadratic_clf(1), sys, U);
  CHECK(k(make_vec({1.0}))[0] == -3.0);
  CHECK(k(make_vec({0.0}))[0] == 0.0);
  CHECK(k.continuity == Continuity::MeasurableDiscontinuous);

  // artstein: objective grad V . g(x) u is linear in u
  const auto art = zoo_build("artstein-circles");
  const auto clf = artstein_smooth_view();
  const auto ka = pointwise_min_feedback(clf, art, ControlSet::interval(-1, 1, 21));
  for (const Vec& x : {make_vec({0.3, 1.0}), make_vec({-0.7, 0.2}), make_vec({1.0, -1.0})}) {
    const Vec fd = fd_gradient(clf.V, x);
    const double slope = fd.dot(eval_dynamics(art, x, make_vec({1.0})));
    CHECK(ka(x)[0] == (slope > 0 ? -1.0 : 1.0));
  }
  // x1 = 0: the slope vanishes and the tie rule picks u = 0
  CHECK(ka(make_vec({0.0, 1.0}))[0] == 0.0);
}

TEST_CASE("decrease margins") {
  const auto sys = zoo_build("scalar-linear");
  const auto U = ControlSet::interval(-3, 3, 61);
  CHECK(clf_decrease_margin(quadratic_clf(1), sys, U, make_vec({1.0})) == doctest::Approx(-2.0));
  CHECK(throws_kind(ErrorKind::InvalidParams, [&] { clf_decrease_margin(quadratic_clf(1), sys, U, make_vec({0.0})); }));

  // flat spot at |x| = 1
  const auto flat = clf_from_value("flat", 1, [](const Vec& x) { return std::pow(x.squaredNorm() - 1.0, 2); },
                                   [](const Vec& x) -> Vec { return 4.0 * (x.squaredNorm() - 1.0) * x; });
  CHECK(clf_decrease_margin(flat, sys, U, make_vec({1.0})) == 0.0);

  // V = 3/2 x1^2 + x1 x2 + x2^2 at (-2, 1): Vdot = -5 for every u on both readings
  const auto wide = ControlSet::interval(-10, 10, 201);
  const Vec x = make_vec({-2.0, 1.0});
  CHECK(clf_decrease_margin(oscillator_clf(), zoo_build("double-integrator"), wide, x) == doctest::Approx(-5.0));
  CHECK(clf_decrease_margin(oscillator_clf(), zoo_build("forced-oscillator"), wide, x) == doctest::Approx(-5.0));
  // forced oscillator Vdot = -x1^2 + x1 x2 + x2^2 - (x1 + 2 x2) u at a generic point
  const Vec y = make_vec({1.0, 0.5});
  const double expected = -1.0 + 0.5 + 0.25 - (1.0 + 1.0) * 10.0;
  CHECK(clf_decrease_margin(oscillator_clf(), zoo_build("forced-oscillator"), wide, y) == doctest::Approx(expected));
}

TEST_CASE("artstein region check") {
  const auto art = zoo_build("artstein-circles");
  const auto clf = artstein_smooth_view();
  const auto U = ControlSet::interval(-1, 1, 101);
  Region off_axis{0.1, 2.0, [](const Vec& x) { return x[0] == 0.0; }};
  CHECK(verify_clf_on_region(clf, art, U, off_axis, 41).ok());

  const auto rep = verify_clf_on_region(clf, art, U, Region{0.1, 2.0, {}}, 41);
  CHECK_FALSE(rep.ok());
  std::size_t axis_points = 0;
  for (const Vec& x : region_grid(2, Region{0.1, 2.0, {}}, 41)) axis_points += x[0] == 0.0 ? 1 : 0;
  CHECK(rep.violations.size() == axis_points);
  for (const auto& v : rep.violations) CHECK(v.x[0] == 0.0);

  const auto back = region_report_from_json(to_json(rep));
  CHECK(back.violations.size() == rep.violations.size());
  CHECK(back.worst_excess == rep.worst_excess);
  CHECK(back.points_checked == rep.points_checked);

  CHECK(throws_kind(ErrorKind::InvalidParams, [&] { verify_clf_on_region(clf, art, U, Region{0.05, 2.0, {}}, 41); }));
}

TEST_CASE("integrator region check with a small rate") {
  const auto sys = zoo_build("integrator", {{"dim", 2.0}});
  auto clf = quadratic_clf(2);
  clf.W = [](const Vec& x) { return 0.5 * x.norm() * std::min(1.0, x.norm()); };
  const auto U = ControlSet::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 21);
  CHECK(verify_clf_on_region(clf, sys, U, Region{0.2, 2.0, {}}, 21).ok());
}

TEST_CASE("universal formula closed loop decreases V") {
  struct Case {
    ControlSystem sys;
    SmoothCLF clf;
  };
  std::vector<Case> cases{{zoo_build("scalar-linear"), quadratic_clf(1)},
                          {zoo_build("scalar-linear", {{"a", -2.0}, {"b", 0.5}}), quadratic_clf(1)},
                          {zoo_build("integrator", {{"dim", 3.0}}), quadratic_clf(3)},
                          {zoo_build("forced-oscillator"), oscillator_clf()},
                          {zoo_build("unstable-1d"), quadratic_clf(1)},
                          {zoo_build("gas-not-iss-redesigned"), quadratic_clf(1)}};
  std::mt19937_64 rng(21);
  for (const auto& c : cases) {
    const auto k = universal_formula_feedback(c.clf, c.sys);
    for (int s = 0; s < 50; ++s) {
      const Vec x = random_state(rng, c.sys.n, 2.0);
      CAPTURE(c.sys.name);
      CHECK(c.clf.grad(x).dot(eval_dynamics(c.sys, x, k(x))) < 0.0);
    }
  }
}

TEST_CASE("argmin is invariant under scaling V") {
  const auto sys = zoo_build("forced-oscillator");
  const auto V = oscillator_clf();
  auto V2 = V;
  V2.V = [f = V.V](const Vec& x) { return 2.0 * f(x); };
  V2.grad = [g = V.grad](const Vec& x) -> Vec { return 2.0 * g(x); };
  const auto U = ControlSet::interval(-2, 2, 41);
  const auto k1 = pointwise_min_feedback(V, sys, U);
  const auto k2 = pointwise_min_feedback(V2, sys, U);
  for (const Vec& x : region_grid(2, Region{0.0, 2.0, {}}, 21)) CHECK(k1(x) == k2(x));
}

TEST_CASE("universal formula is continuous away from the origin") {
  const auto sys = zoo_build("forced-oscillator");
  const auto k = universal_formula_feedback(oscillator_clf(), sys);
  const Vec x = make_vec({0.7, -0.4});
  const Vec dir = make_vec({0.6, 0.8});
  double prev = std::numeric_limits<double>::infinity();
  for (double h : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const double jump = (k(Vec(x + h * dir)) - k(x)).norm();
    CHECK(jump < prev);
    prev = jump;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("small control property and the non-Lipschitz warning") {
  const auto k = universal_formula_feedback(quadratic_clf(1), zoo_build("scalar-linear"));
  const auto profile = small_control_profile(k, {1e-1, 1e-2, 1e-3, 1e-4});
  for (std::size_t i = 1; i < profile.size(); ++i) CHECK(profile[i] < 0.2 * profile[i - 1]);
  CHECK(k.notes.empty());

  // k(x) = -cbrt(2x) on x' = x + u^3: |k(x)|/|x| blows up at 0
  const auto cubic = user_feedback("cubic", 1, 1, [](const Vec& x) -> Vec { return make_vec({-std::cbrt(2.0 * x[0])}); });
  const auto ratios = origin_lipschitz_ratios(cubic, {1e-1, 1e-2, 1e-3});
  CHECK(ratios[1] == doctest::Approx(ratios[0] * std::pow(10.0, 2.0 / 3.0)).epsilon(1e-9));
  CHECK(ratios[2] > ratios[1]);

  const auto uq = universal_formula_feedback(oscillator_clf(), zoo_build("forced-oscillator"));
  CHECK_FALSE(uq.notes.empty());
}

TEST_CASE("CLF builders and validation") {
  CHECK(artstein_value(make_vec({1, 0})) == 0.5);
  CHECK(artstein_value(make_vec({0, 1})) == 1.0);
  CHECK(artstein_value(make_vec({0, 0})) == 0.0);
  CHECK(validate_clf(quadratic_clf(3), 2.0, 200).ok());
  CHECK(validate_clf(oscillator_clf(), 2.0, 200).ok());
  CHECK(validate_clf(log_quadratic_clf(2), 2.0, 200).ok());
  const auto bad = clf_from_value("shifted", 1, [](const Vec& x) { return x.squaredNorm() + 1.0; });
  CHECK_FALSE(validate_clf(bad, 2.0, 50).zero_at_origin);
  const auto wrong_grad =
      clf_from_value("wrong", 1, [](const Vec& x) { return x.squaredNorm(); }, [](const Vec& x) -> Vec { return x; });
  CHECK(validate_clf(wrong_grad, 2.0, 50).max_gradient_rel_error > 0.1);

  const auto sys = zoo_build("forced-oscillator");
  const auto plain = clf_from_value("plain", 2, oscillator_clf().V);
  const auto filled = with_default_rate(plain, sys, ControlSet::interval(-3, 3), Region{0.2, 2.0, {}}, 21);
  REQUIRE(filled.W);
  CHECK(verify_clf_on_region(filled, sys, ControlSet::interval(-3, 3), Region{0.2, 2.0, {}}, 21, 1e-6).ok());
}

TEST_CASE("sphere points and region grids") {
  const auto ring = sphere_points(2, 1.0, 16);
  CHECK(ring.size() == 16);
  CHECK(ring[4][0] == doctest::Approx(0.0).epsilon(1e-12));
  for (const Vec& x : ring) CHECK(x.norm() == doctest::Approx(1.0));
  const auto shell = sphere_points(3, 2.0, 20);
  for (const Vec& x : shell) CHECK(x.norm() == doctest::Approx(2.0));
  const auto grid = region_grid(2, Region{0.5, 1.0, {}}, 11);
  for (const Vec& x : grid) CHECK((x.norm() >= 0.5 && x.norm() <= 1.0));
}
