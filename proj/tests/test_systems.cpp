#include <doctest.h>

#include "clfstab/systems.hpp"

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
}  // namespace

TEST_CASE("zoo evaluation examples") {
  const auto cubic = zoo_build("cubic-1d");
  CHECK(cubic.n == 1);
  CHECK(cubic.m == 1);
  CHECK(eval_dynamics(cubic, make_vec({0.0}), make_vec({0.0}))[0] == 0.0);
  CHECK(eval_dynamics(cubic, make_vec({2.0}), make_vec({-1.5}))[0] == doctest::Approx(2.0 - 3.375));

  const auto nh = zoo_build("nonholonomic-integrator");
  const Vec f = eval_dynamics(nh, make_vec({1, 0, 0}), make_vec({0, 1}));
  CHECK(f[0] == 0.0);
  CHECK(f[1] == 1.0);
  CHECK(f[2] == 1.0);

  const auto art = zoo_build("artstein-circles");
  const Vec g = eval_dynamics(art, make_vec({1, 0}), make_vec({1}));
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);

  const auto rb = zoo_build("rigid-body-reduced");
  CHECK(rb.n == 3);
  CHECK(rb.m == 2);
  const Vec r = eval_dynamics(rb, make_vec({0.5, 2, 3}), make_vec({-1, 4}));
  CHECK(r[0] == 6.0);
  CHECK(r[1] == -1.0);
  CHECK(r[2] == 4.0);
}

TEST_CASE("affine parts") {
  const auto cart = zoo_build("shopping-cart");
  const auto p = affine_parts(cart, Vec::Zero(3));
  CHECK(p.drift.norm() == 0.0);
  Mat expected(3, 2);
  expected << 1, 0, 0, 0, 0, 1;
  CHECK((p.input_matrix - expected).norm() < 1e-15);

  const auto art = affine_parts(zoo_build("artstein-circles"), Vec::Zero(2));
  CHECK(art.drift.norm() == 0.0);
  CHECK(art.input_matrix.norm() == 0.0);

  CHECK(throws_kind(ErrorKind::NotAffine, [] { affine_parts(zoo_build("uuu"), Vec::Zero(3)); }));
  CHECK(throws_kind(ErrorKind::NotAffine, [] { affine_parts(zoo_build("cubic-1d"), Vec::Zero(1)); }));
}

TEST_CASE("zoo errors") {
  CHECK(throws_kind(ErrorKind::UnknownName, [] { zoo_build("nope"); }));
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { zoo_build("scalar-linear", {{"c", 1.0}}); }));
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { zoo_build("integrator", {{"dim", 9.0}}); }));
  CHECK(throws_kind(ErrorKind::DimensionMismatch,
                    [] { eval_dynamics(zoo_build("cubic-1d"), make_vec({1, 2}), make_vec({0})); }));
}

TEST_CASE("every zoo system vanishes at the origin") {
  for (const auto& entry : zoo_catalog()) {
    const auto sys = zoo_build(entry.name);
    CAPTURE(entry.name);
    CHECK(eval_dynamics(sys, Vec::Zero(sys.n), Vec::Zero(sys.m)).norm() <= 1e-12);
  }
}

TEST_CASE("affine decompositions are consistent") {
  for (const auto& entry : zoo_catalog()) {
    const auto sys = zoo_build(entry.name);
    if (!sys.affine) continue;
    CAPTURE(entry.name);
    CHECK(affine_consistency_error(sys, 100, 42) <= 1e-9);
  }
}

TEST_CASE("zoo_build is deterministic") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  for (const auto& entry : zoo_catalog()) {
    const auto a = zoo_build(entry.name);
    const auto b = zoo_build(entry.name);
    for (int s = 0; s < 20; ++s) {
      Vec x(a.n), u(a.m);
      for (int j = 0; j < a.n; ++j) x[j] = unit(rng);
      for (int j = 0; j < a.m; ++j) u[j] = unit(rng);
      CHECK(eval_dynamics(a, x, u) == eval_dynamics(b, x, u));
    }
  }
}

TEST_CASE("control sets") {
  const auto I = ControlSet::interval(-3, 3, 61);
  CHECK(I.grid().size() == 61);
  CHECK(I.grid().front()[0] == 0.0);
  // (|u|, lexicographic): -0.1 precedes 0.1
  CHECK(I.grid()[1][0] == doctest::Approx(-0.1));
  CHECK(I.grid()[2][0] == doctest::Approx(0.1));
  CHECK(I.contains(make_vec({3.0})));
  CHECK_FALSE(I.contains(make_vec({3.1})));

  const auto B = ControlSet::ball(2, 1.0, 11);
  for (const Vec& u : B.grid()) CHECK(u.norm() <= 1.0 + 1e-12);

  CHECK(throws_kind(ErrorKind::InvalidParams, [] { ControlSet::interval(1, 2); }));
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { ControlSet::finite({make_vec({1.0})}); }));
}

TEST_CASE("linear_system") {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0, 1, -2, -3;
  B << 0, 1;
  const auto sys = linear_system(A, B);
  const Vec f = eval_dynamics(sys, make_vec({1, 2}), make_vec({5}));
  CHECK(f[0] == 2.0);
  CHECK(f[1] == -2.0 - 6.0 + 5.0);
  CHECK(throws_kind(ErrorKind::DimensionMismatch, [] { linear_system(Eigen::MatrixXd(2, 3), Eigen::MatrixXd(2, 1)); }));
}
