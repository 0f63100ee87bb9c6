#include <doctest.h>

#include "clfstab/iss_analysis.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
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

ControlSystem stable_linear() { return zoo_build("scalar-linear", {{"a", -1.0}}); }

InputTrajectory run(const ControlSystem& sys, const Signal& v, double x0, double T, double step = 0.01) {
  return simulate_with_input(sys, v, make_vec({x0}), T, step);
}

LyapunovCandidate young_candidate() {
  LyapunovCandidate c;
  c.name = "young";
  c.n = 1;
  c.V = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  c.grad = [](const Vec& x) { return Vec(x); };
  c.form = DissipationForm::ISS;
  c.alpha = [](double r) { return 0.5 * r * r; };
  c.gamma = [](double r) { return 0.5 * r * r; };
  return c;
}

LyapunovCandidate arctan_candidate(DissipationForm form) {
  LyapunovCandidate c;
  c.name = "log";
  c.n = 1;
  c.V = [](const Vec& x) { return std::log1p(x[0] * x[0]); };
  c.grad = [](const Vec& x) { return make_vec({2.0 * x[0] / (1.0 + x[0] * x[0])}); };
  c.form = form;
  c.alpha = [](double r) { return 2.0 * r * std::atan(r) / (1.0 + r * r); };
  c.gamma = [](double r) { return r; };
  return c;
}

FeedbackLaw rigid_body_feedback() {
  return user_feedback("rigid-body", 3, 2, [](const Vec& x) {
    return make_vec({-x[0] - x[1] - x[1] * x[2], -x[2] + x[0] * x[0] + 2.0 * x[0] * x[1] * x[2]});
  });
}

// x = T(z) = (z1, z2 - z1, z3 + z1^2), i.e. z2 = x1 + x2, z3 = x3 - x1^2
Diffeomorphism rigid_body_change() {
  Diffeomorphism d;
  d.name = "rigid-body";
  d.dim = 3;
  d.forward = [](const Vec& z) { return make_vec({z[0], z[1] - z[0], z[2] + z[0] * z[0]}); };
  d.inverse = [](const Vec& x) { return make_vec({x[0], x[0] + x[1], x[2] - x[0] * x[0]}); };
  d.inverse_jacobian = [](const Vec& x) {
    Mat J(3, 3);
    J << 1, 0, 0, 1, 1, 0, -2 * x[0], 0, 1;
    return J;
  };
  return d;
}

}  // namespace

TEST_CASE("ISS estimate examples") {
  const auto sys = stable_linear();
  const ISSEstimate est{KLFunction::exp_envelope(KFunction::identity(), 1.0), KFunction::identity(), EstimateForm::Max};
  CHECK(check_iss_estimate({run(sys, Signal::zero(1), 1.0, 10)}, est).ok());

  std::vector<InputTrajectory> forced;
  for (double x0 : {-1.0, 0.0, 0.5, 1.0}) forced.push_back(run(sys, Signal::constant(make_vec({1.0})), x0, 10));
  CHECK(check_iss_estimate(forced, est).ok());
  auto sum = est;
  sum.form = EstimateForm::Sum;
  CHECK(check_iss_estimate(forced, sum).ok());
  // x = 1 + 2 e^-t from x0 = 3 beats max{3 e^-t, 1} but not the sum
  const auto far = run(sys, Signal::constant(make_vec({1.0})), 3.0, 10);
  CHECK_FALSE(check_iss_estimate({far}, est).ok());
  CHECK(check_iss_estimate({far}, sum).ok());

  auto half = est;
  half.gamma = KFunction::power(0.5, 1.0);
  const auto rep = check_iss_estimate(forced, half);
  CHECK_FALSE(rep.ok());
  // the steady state x = 1 exceeds 1/2 late in every run
  bool late = false;
  for (const auto& v : rep.violations) late = late || v.time > 9.0;
  CHECK(late);
}

TEST_CASE("max form pass implies sum form pass") {
  const auto sys = stable_linear();
  std::vector<InputTrajectory> trajs;
  for (double x0 : {-1.0, 2.0})
    for (const auto& v : {Signal::sinusoid(make_vec({0.7}), 0.3), Signal::piecewise_constant(1, 4, 0.5, 0.8)})
      trajs.push_back(run(sys, v, x0, 8));
  for (double g : {0.5, 1.0, 2.0}) {
    for (double lam : {0.5, 1.0, 2.0}) {
      const ISSEstimate mx{KLFunction::exp_envelope(KFunction::identity(), lam), KFunction::power(g, 1.0), EstimateForm::Max};
      ISSEstimate sm = mx;
      sm.form = EstimateForm::Sum;
      if (check_iss_estimate(trajs, mx).ok()) CHECK(check_iss_estimate(trajs, sm).ok());
      CHECK(check_iss_estimate(trajs, sm).violations.size() <= check_iss_estimate(trajs, mx).violations.size());
    }
  }
}

TEST_CASE("iISS estimate examples") {
  const auto sys = zoo_build("arctan-iiss");
  const auto beta = KLFunction::exp_envelope(KFunction::power(2.0, 1.0), 0.5);
  const auto zero = run(sys, Signal::zero(1), 1.0, 10);
  const auto kl = fit_kl_envelope({zero.traj}, 0.0);
  CHECK(check_iiss_estimate({zero}, kl, KFunction::identity()).ok());
  CHECK(check_kl_estimate({zero.traj}, kl, 0.0).ok());

  std::vector<InputTrajectory> pulses;
  for (double x0 : {0.0, 0.5, -1.0}) pulses.push_back(run(sys, Signal::pulse(make_vec({0.1}), 0.0, 1.0), x0, 20));
  CHECK(check_iiss_estimate(pulses, beta, KFunction::identity()).ok());

  // u = 2: x' >= 2 - pi/2 > 0, so x grows like 0.43 t; int gamma(|u|) = 0.2 t for gamma = r/10
  const auto drive = run(sys, Signal::constant(make_vec({2.0})), 0.0, 100);
  CHECK(drive.traj.state_norm(drive.traj.size() - 1) > (2.0 - std::numbers::pi / 2) * 100 * 0.95);
  CHECK_FALSE(check_iiss_estimate({drive}, beta, KFunction::power(0.1, 1.0)).ok());
  CHECK(check_iiss_estimate({drive}, beta, KFunction::identity()).ok());
  // bounded input, unbounded state: no ISS estimate survives
  const ISSEstimate iss{beta, KFunction::power(10.0, 1.0), EstimateForm::Sum};
  CHECK_FALSE(check_iss_estimate({drive}, iss).ok());
}

TEST_CASE("integral estimate") {
  const auto sys = stable_linear();
  std::vector<InputTrajectory> trajs;
  for (double x0 : {0.0, 1.0}) trajs.push_back(run(sys, Signal::sinusoid(make_vec({1.0}), 0.2), x0, 20));
  // H-infinity norm of 1/(s+1) is 1; int x^2 <= x0^2/2 + int u^2
  IntegralEstimate est;
  est.initial = KFunction::power(0.5, 2.0);
  CHECK(check_integral_estimate(trajs, est).ok());
  est.input_gain = 0.1;
  CHECK_FALSE(check_integral_estimate(trajs, est).ok());
}

TEST_CASE("Lyapunov candidates") {
  const auto sys = stable_linear();
  const auto states = box_grid(1, 5.0, 41);
  const auto inputs = box_grid(1, 2.0, 21);
  const auto young = verify_lyapunov_candidate(young_candidate(), sys, states, inputs);
  CHECK(young.ok());
  CHECK(young.pairs_checked == 41 * 21);
  CHECK(young.worst_excess <= 1e-12);

  auto greedy = young_candidate();
  greedy.alpha = [](double r) { return r * r; };
  CHECK_FALSE(verify_lyapunov_candidate(greedy, sys, states, inputs).ok());

  const auto arct = zoo_build("arctan-iiss");
  CHECK(verify_lyapunov_candidate(arctan_candidate(DissipationForm::IISS), arct, states, inputs).ok());
  CHECK(throws_kind(ErrorKind::InvalidCandidate, [&] {
    verify_lyapunov_candidate(arctan_candidate(DissipationForm::ISS), arct, states, inputs);
  }));

  auto implication = young_candidate();
  implication.form = DissipationForm::Implication;
  implication.alpha = [](double r) { return 0.5 * r * r; };
  implication.gamma = [](double r) { return 2.0 * r; };
  // |x| >= 2|u| gives -x^2 + xu <= -x^2 / 2
  CHECK(verify_lyapunov_candidate(implication, sys, states, inputs).ok());
  implication.gamma = [](double r) { return 0.5 * r; };
  CHECK_FALSE(verify_lyapunov_candidate(implication, sys, states, inputs).ok());

  const auto rep = verify_lyapunov_candidate(greedy, sys, states, inputs);
  const auto back = lyapunov_report_from_json(to_json(rep));
  CHECK(to_json(back) == to_json(rep));
  CHECK(back.violations.size() == rep.violations.size());
}

TEST_CASE("comparison spot check for a verified ISS candidate") {
  // V' <= -V + u^2 / 2 gives V(t) <= e^-t V0 + sup u^2 / 2
  const auto sys = stable_linear();
  for (double x0 : {-5.0, 5.0}) {
    for (double u : {-2.0, 2.0}) {
      const auto tr = run(sys, Signal::constant(make_vec({u})), x0, 10);
      for (std::size_t i = 0; i < tr.traj.size(); i += 10) {
        const double V = 0.5 * std::pow(tr.traj.states[i], 2);
        CHECK(V <= 1.05 * (std::exp(-tr.traj.times[i]) * 0.5 * x0 * x0 + 0.5 * u * u));
      }
    }
  }
}

TEST_CASE("asymptotic gain probe") {
  const auto sys = stable_linear();
  std::vector<InputSignal> inputs;
  for (double c : {0.0, 0.1, 0.5, 1.0}) inputs.push_back(Signal::constant(make_vec({c})));
  const auto probe = asymptotic_gain_probe(sys, nullptr, inputs, {make_vec({-1.0}), make_vec({1.0})}, 50, 0.01);
  REQUIRE(probe.rows.size() == 4);
  for (const auto& row : probe.rows) {
    CHECK_FALSE(row.escaped);
    CHECK(std::abs(row.limsup - row.amplitude) < 1e-4);
  }
  CHECK(probe.estimate(0.5) == doctest::Approx(0.5).epsilon(1e-4));
  // linear gain bounds the empirical estimate
  Eigen::MatrixXd A(1, 1), B(1, 1);
  A << -1;
  B << 1;
  for (const auto& row : probe.rows) CHECK(row.limsup <= linear_gain(A, B) * row.amplitude + 1e-3);

  const auto bad = asymptotic_gain_probe(zoo_build("gas-not-iss"), nullptr,
                                         {Signal::constant(make_vec({0.1})), Signal::constant(make_vec({1.0}))},
                                         {make_vec({0.0})}, 20, 0.01);
  REQUIRE(bad.rows.size() == 2);
  CHECK_FALSE(bad.rows[0].escaped);
  CHECK(bad.rows[1].escaped);
  CHECK(std::isinf(bad.rows[1].limsup));
  CHECK(throws_kind(ErrorKind::InversionOutOfRange, [&] { bad.estimate(1.0); }));
  const auto back = gain_probe_from_json(to_json(bad));
  CHECK(to_json(back) == to_json(bad));
  CHECK(back.rows[1].escaped);

  CHECK(throws_kind(ErrorKind::InvalidParams,
                    [&] { asymptotic_gain_probe(sys, nullptr, inputs, {make_vec({1.0})}, 10, 0.01, 0.1); }));
}

TEST_CASE("linear gain") {
  Eigen::MatrixXd A(1, 1), B(1, 1);
  A << -1;
  B << 1;
  CHECK(linear_gain(A, B) == doctest::Approx(1.0).epsilon(1e-4));
  A << -2;
  B << 3;
  CHECK(linear_gain(A, B) == doctest::Approx(1.5).epsilon(1e-4));
  A << 1;
  CHECK(throws_kind(ErrorKind::NotHurwitz, [&] { linear_gain(A, B); }));
  // diagonal A: |e^{tA}| = e^{-t}
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2), B2(2, 1);
  D << -1, 0, 0, -3;
  B2 << 1, 1;
  CHECK(linear_gain(D, B2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-4));
}

TEST_CASE("coordinate changes") {
  const auto sys = stable_linear();
  Eigen::MatrixXd two(1, 1);
  two << 2.0;
  const auto z = conjugate_system(sys, linear_map(two), identity_map(1));
  // z' = -z + u / 2
  CHECK(eval_dynamics(z, make_vec({0.3}), make_vec({1.0}))[0] == doctest::Approx(-0.3 + 0.5));
  const auto xt = simulate_with_input(sys, Signal::sinusoid(make_vec({1.0}), 0.5), make_vec({1.0}), 5, 0.01).traj;
  const auto zt = simulate_with_input(z, Signal::sinusoid(make_vec({1.0}), 0.5), make_vec({0.5}), 5, 0.01).traj;
  for (std::size_t i = 0; i < xt.size(); i += 50) CHECK(xt.states[i] == doctest::Approx(2.0 * zt.states[i]).epsilon(1e-9));

  const auto art = zoo_build("artstein-circles");
  const auto same = conjugate_system(art, identity_map(2), identity_map(1));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(-1, 1);
  for (int i = 0; i < 20; ++i) {
    const Vec x = make_vec({unit(rng), unit(rng)});
    const Vec u = make_vec({unit(rng)});
    CHECK((eval_dynamics(same, x, u) - eval_dynamics(art, x, u)).norm() < 1e-12);
  }

  Diffeomorphism broken = rigid_body_change();
  broken.inverse = [](const Vec& x) { return Vec(x); };
  CHECK(throws_kind(ErrorKind::InverseConsistency,
                    [&] { conjugate_system(zoo_build("rigid-body-reduced"), broken, identity_map(2)); }));
}

TEST_CASE("pointwise-min selection is invariant under a linear change") {
  const auto sys = zoo_build("double-integrator");
  const auto U = ControlSet::interval(-1, 1, 41);
  const auto clf = oscillator_clf();
  Eigen::MatrixXd T(2, 2);
  T << 1, 0.5, 0, 2;
  const Eigen::MatrixXd Ti = T.inverse();
  const auto zsys = conjugate_system(sys, linear_map(T), identity_map(1));
  const auto zclf = clf_from_value("pulled", 2, [&](const Vec& z) { return clf.V(T * z); },
                                   [&](const Vec& z) { return Vec(T.transpose() * clf.grad(T * z)); });
  const auto kx = pointwise_min_feedback(clf, sys, U);
  const auto kz = pointwise_min_feedback(zclf, zsys, U);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(-2, 2);
  for (int i = 0; i < 30; ++i) {
    const Vec x = make_vec({unit(rng), unit(rng)});
    CHECK(kz(Ti * x)[0] == doctest::Approx(kx(x)[0]));
  }
}

TEST_CASE("rigid body conjugation") {
  const auto loop = closed_loop(zoo_build("rigid-body-reduced"), rigid_body_feedback());
  const auto zsys = conjugate_system(loop, rigid_body_change(), identity_map(2));
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(-2, 2);
  for (int i = 0; i < 100; ++i) {
    const Vec z = make_vec({unit(rng), unit(rng), unit(rng)});
    const Vec dz = eval_dynamics(zsys, z, Vec::Zero(2));
    CHECK(std::abs(dz[1] + z[1]) <= 1e-9);
    CHECK(std::abs(dz[2] + z[2]) <= 1e-9);
    const Vec x = rigid_body_change().forward(z);
    CHECK(std::abs(dz[0] - x[1] * x[2]) <= 1e-9);
  }
}

TEST_CASE("cascades") {
  const auto driven = zoo_build("scalar-linear", {{"a", -1.0}});
  const auto driver = stable_linear();
  std::vector<Vec> grid;
  for (double a : {-2.0, 0.0, 2.0})
    for (double b : {-2.0, 0.0, 2.0}) grid.push_back(make_vec({a, b}));
  const auto rep = cascade_check(driven, driver, grid, 30, 0.01, 1e-4);
  CHECK(rep.ok());
  CHECK(rep.max_final_norm < 1e-4);
  CHECK(rep.runs == 9);
  const CascadeCandidates cand{young_candidate(), box_grid(1, 3, 31), box_grid(1, 3, 31)};
  CHECK(cascade_check(driven, driver, grid, 30, 0.01, 1e-4, cand).ok());

  const auto composite = cascade_system(driven, driver);
  CHECK(composite.n == 2);
  CHECK(eval_dynamics(composite, make_vec({1, 3}), Vec::Zero(composite.m))[0] == doctest::Approx(2.0));

  const auto fragile = zoo_build("gas-not-iss");
  const auto bad = cascade_check(fragile, driver, {make_vec({0.0, 0.1}), make_vec({0.0, 5.0})}, 30, 0.01, 1e-3);
  CHECK(bad.escaped == 1);
  REQUIRE(bad.diverging_runs.size() == 1);
  CHECK(bad.diverging_runs[0] == 1);
  CHECK_FALSE(bad.ok());
  const auto back = cascade_report_from_json(to_json(bad));
  CHECK(to_json(back) == to_json(bad));

  auto greedy = young_candidate();
  greedy.alpha = [](double r) { return r * r; };
  CHECK(throws_kind(ErrorKind::PreconditionFailed, [&] {
    cascade_check(driven, driver, grid, 30, 0.01, 1e-4, CascadeCandidates{greedy, box_grid(1, 3, 31), box_grid(1, 3, 31)});
  }));
}

TEST_CASE("rigid body cascade trend") {
  const auto loop = closed_loop(zoo_build("rigid-body-reduced"), rigid_body_feedback());
  const auto zsys = conjugate_system(loop, rigid_body_change(), identity_map(2));
  const auto tr = simulate_with_input(zsys, Signal::zero(2), make_vec({1.0, 2.0, 0.0}), 20, 1e-3).traj;
  REQUIRE_FALSE(tr.escaped);
  const Vec end = tr.state(tr.size() - 1);
  CHECK(end[1] == doctest::Approx(2.0 * std::exp(-20.0)).epsilon(1e-6));
  CHECK(std::abs(end[2]) < 1e-12);
  // the z1 = x1 mode ends on the slow x1' = -x1^3 manifold
  CHECK(std::abs(end[0]) < 0.25);
  for (std::size_t i = 5000; i < tr.size(); i += 1000) CHECK(std::abs(tr.states[3 * i]) < std::abs(tr.states[3 * (i - 1000)]));
}
