#include <doctest.h>

#include "clfstab/signals.hpp"

#include <cmath>

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

TEST_CASE("basic generators") {
  const auto z = Signal::zero(3);
  CHECK(z.is_zero());
  CHECK(z(1.0).norm() == 0.0);
  CHECK(z.sup_norm() == 0.0);

  const auto c = Signal::constant(make_vec({3, 4}));
  CHECK(c(7.0) == make_vec({3, 4}));
  CHECK(c.sup_norm() == 5.0);

  const auto s = Signal::sinusoid(make_vec({3, 4}), 1.0);
  CHECK((s(0.25) - make_vec({3, 4})).norm() < 1e-12);
  CHECK(s(0.0).norm() < 1e-15);
  CHECK(s.sup_norm() == 5.0);
  const auto shifted = Signal::sinusoid(make_vec({2}), 0.5, M_PI / 2);
  CHECK(shifted(0.0)[0] == doctest::Approx(2.0));

  const auto p = Signal::pulse(make_vec({1, -1}), 1.0, 2.0);
  CHECK(p(0.5).norm() == 0.0);
  CHECK(p(1.0) == make_vec({1, -1}));
  CHECK(p(2.0).norm() == 0.0);
}

TEST_CASE("piecewise constant signal") {
  const auto a = Signal::piecewise_constant(2, 11, 0.5, 0.3);
  const auto b = Signal::piecewise_constant(2, 11, 0.5, 0.3);
  const auto other = Signal::piecewise_constant(2, 12, 0.5, 0.3);
  CHECK(a.sup_norm() == doctest::Approx(0.3 * std::sqrt(2.0)));
  CHECK(a(0.1) == a(0.4));
  CHECK(a(0.1) != a(0.6));
  CHECK(a(0.1) != other(0.1));
  for (int i = 0; i < 200; ++i) {
    const double t = 0.05 * i;
    CHECK(a(t) == b(t));
    CHECK(a(t).cwiseAbs().maxCoeff() <= 0.3);
  }
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { Signal::piecewise_constant(1, 0, 0.0, 1.0); }));
}

TEST_CASE("callback signals are clipped to their bound") {
  const auto cb = Signal::callback(2, 0.5, [](double, const Vec& x) { return Vec(x * 10.0); }, "outward");
  CHECK(cb.kind() == Signal::Kind::Callback);
  const Vec v = cb(0.0, make_vec({0.3, 0.4}));
  CHECK(v.norm() == doctest::Approx(0.5));
  CHECK(v[1] / v[0] == doctest::Approx(4.0 / 3.0));
  CHECK(cb(0.0, make_vec({0.01, 0.0}))[0] == doctest::Approx(0.1));
  CHECK(cb.describe() == "outward(bound=0.5)");
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { Signal::callback(1, -1.0, [](double, const Vec& x) { return x; }); }));
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { Signal::constant(make_vec({NAN})); }));
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { Signal::pulse(make_vec({1}), 2.0, 1.0); }));
}
