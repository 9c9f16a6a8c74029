#include <cmath>
#include <cstring>
#include <limits>

#include "core/diff.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/toy_fns.hpp"
#include "doctest.h"

using namespace strucgrad;

namespace {

ParamVector theta2(std::initializer_list<double> v) { return flat_params("theta", Vector(v)); }
ParamVector phi2(std::initializer_list<double> v) { return flat_params("phi", Vector(v)); }

Matrix random_spd(std::size_t n, Rng& rng, double shift) {
  Matrix b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = rng.uniform(-1.0, 1.0);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += b(k, i) * b(k, j);
      a(i, j) = s;
    }
  for (std::size_t i = 0; i < n; ++i) a(i, i) += shift;
  return a;
}

}  // namespace

TEST_CASE("vector and matrix arithmetic checks shapes") {
  Vector a{1.0, 2.0};
  Vector b{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(a += b, ShapeError);
  CHECK_THROWS_AS((void)a.dot(b), ShapeError);
  Matrix m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  CHECK_THROWS_AS((void)m.matvec(b), ShapeError);
  Vector mv = m.matvec(a);
  CHECK(mv[0] == doctest::Approx(5.0));
  CHECK(mv[1] == doctest::Approx(11.0));
  Vector mt = m.tmatvec(a);
  CHECK(mt[0] == doctest::Approx(7.0));
  CHECK(mt[1] == doctest::Approx(10.0));
}

TEST_CASE("param vector segments are disjoint and cover the buffer") {
  ParamVector p({{"a", 2, 3}, {"b", 4, 1}});
  CHECK(p.size() == 10);
  CHECK(p.seg("a").size() == 6);
  CHECK(p.seg_offset("b") == 6);
  CHECK_THROWS_AS(p.seg("missing"), ShapeError);
  CHECK_THROWS_AS(ParamVector({{"x", 2, 2}, {"x", 1, 1}}), ShapeError);
}

TEST_CASE("param vector flatten round-trip is bit-exact") {
  ParamVector p({{"w", 3, 2}, {"b", 3, 1}});
  Rng rng(7);
  for (double& x : p.values()) x = rng.normal() * std::pow(10.0, rng.uniform(-20.0, 20.0));
  p.values()[0] = -0.0;
  p.values()[1] = std::numeric_limits<double>::denorm_min();
  Vector flat = p.flatten();
  ParamVector q({{"w", 3, 2}, {"b", 3, 1}});
  q.assign_flat(flat);
  Vector again = q.flatten();
  REQUIRE(again.size() == flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i)
    CHECK(std::memcmp(&again[i], &flat[i], sizeof(double)) == 0);
  CHECK_THROWS_AS(q.assign_flat(Vector(3)), ShapeError);
}

TEST_CASE("grad on closed-form objectives") {
  ParamVector phi;
  SUBCASE("identity quadratic") {
    QuadraticForm f(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), ParamGroup::Theta);
    Vector g = grad(f, ParamGroup::Theta, theta2({3.0, -2.0}), phi);
    CHECK(g[0] == doctest::Approx(3.0));
    CHECK(g[1] == doctest::Approx(-2.0));
  }
  SUBCASE("constant") {
    ConstFn f(4.5);
    Vector g = grad(f, ParamGroup::Theta, theta2({1.0, 2.0}), phi);
    CHECK(g.norm() == 0.0);
  }
  SUBCASE("diagonal quadratic") {
    QuadraticForm f(Matrix::from_rows({{2.0, 0.0}, {0.0, 4.0}}), ParamGroup::Theta);
    Vector g = grad(f, ParamGroup::Theta, theta2({1.0, 1.0}), phi);
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(4.0));
  }
}

TEST_CASE("hvp matches the analytic Hessian on quadratics") {
  ParamVector phi;
  QuadraticForm f(Matrix::from_rows({{2.0, 0.0}, {0.0, 4.0}}), ParamGroup::Theta);
  ParamVector th = theta2({0.3, -0.7});
  SUBCASE("diagonal") {
    Vector hv = hvp(f, ParamGroup::Theta, th, phi, Vector{1.0, 1.0});
    CHECK(hv[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(hv[1] == doctest::Approx(4.0).epsilon(1e-6));
  }
  SUBCASE("zero direction") {
    Vector hv = hvp(f, ParamGroup::Theta, th, phi, Vector{0.0, 0.0});
    CHECK(hv.norm() == 0.0);
  }
  SUBCASE("linear function has zero Hessian") {
    LinearFn lin(Vector{2.0, -3.0});
    Vector hv = hvp(lin, ParamGroup::Theta, th, phi, Vector{1.0, 2.0});
    CHECK(hv.norm() < 1e-8);
  }
}

TEST_CASE("hvp symmetry and linearity") {
  Rng rng(11);
  Matrix a = random_spd(4, rng, 0.5);
  QuadraticForm f(a, ParamGroup::Theta);
  ParamVector phi;
  Vector pt(4);
  for (std::size_t i = 0; i < 4; ++i) pt[i] = rng.normal();
  ParamVector th = flat_params("theta", pt);
  Vector u(4), v(4);
  for (std::size_t i = 0; i < 4; ++i) {
    u[i] = rng.normal();
    v[i] = rng.normal();
  }
  Vector hu = hvp(f, ParamGroup::Theta, th, phi, u);
  Vector hv = hvp(f, ParamGroup::Theta, th, phi, v);
  CHECK(v.dot(hu) == doctest::Approx(u.dot(hv)).epsilon(1e-5));
  Vector combo = 2.0 * u;
  combo.axpy(-3.0, v);
  Vector hc = hvp(f, ParamGroup::Theta, th, phi, combo);
  Vector expect = 2.0 * hu;
  expect.axpy(-3.0, hv);
  CHECK(grad_rel_err(hc, expect) < 1e-5);
}

TEST_CASE("hvp reports non-finite perturbed evaluations") {
  struct BadFn : ScalarFn {
    double value(const ParamVector&, const ParamVector&) const override { return 0.0; }
    Vector grad(ParamGroup, const ParamVector& theta, const ParamVector&) const override {
      Vector g(theta.size());
      g[0] = std::numeric_limits<double>::infinity();
      return g;
    }
  } bad;
  ParamVector phi;
  CHECK_THROWS_AS(hvp(bad, ParamGroup::Theta, theta2({1.0, 1.0}), phi, Vector{1.0, 0.0}),
                  NumericError);
}

TEST_CASE("cross_hvp on bilinear and separable objectives") {
  Matrix m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  SUBCASE("bilinear: C = M^T") {
    BilinearFn f(m);
    Vector c = cross_hvp(f, theta2({0.4, 0.6}), phi2({-0.2, 0.9}), Vector{1.0, 0.0});
    CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(c[1] == doctest::Approx(2.0).epsilon(1e-8));
  }
  SUBCASE("separable: zero cross-Hessian") {
    SeparableFn f;
    Vector c = cross_hvp(f, theta2({0.4, 0.6}), phi2({-0.2, 0.9}), Vector{1.0, 2.0});
    CHECK(c.norm() < 1e-10);
  }
  SUBCASE("inner quadratic: C = -M^T") {
    BilevelQuadAux f(m);
    Vector c = cross_hvp(f, theta2({0.4, 0.6}), phi2({-0.2, 0.9}), Vector{3.0, 7.0});
    CHECK(c[0] == doctest::Approx(-24.0).epsilon(1e-8));
    CHECK(c[1] == doctest::Approx(-34.0).epsilon(1e-8));
  }
}

TEST_CASE("toy closed forms pass the finite-difference contract") {
  Rng rng(3);
  Matrix a = random_spd(3, rng, 0.3);
  QuadraticForm quad(a, ParamGroup::Theta);
  Matrix m = Matrix::from_rows({{0.5, -1.0, 2.0}, {1.5, 0.25, -0.75}, {2.0, 1.0, 0.1}});
  BilevelQuadAux aux(m);
  BilinearFn bil(m);
  for (int trial = 0; trial < 10; ++trial) {
    Vector tv(3), pv(3);
    for (int i = 0; i < 3; ++i) {
      tv[i] = rng.normal();
      pv[i] = rng.normal();
    }
    ParamVector th = flat_params("theta", tv);
    ParamVector ph = flat_params("phi", pv);
    for (const ScalarFn* f : {static_cast<const ScalarFn*>(&quad),
                              static_cast<const ScalarFn*>(&aux),
                              static_cast<const ScalarFn*>(&bil)}) {
      for (ParamGroup g : {ParamGroup::Theta, ParamGroup::Phi}) {
        Vector an = f->grad(g, th, ph);
        Vector fd = finite_diff_grad(*f, g, th, ph);
        CHECK(grad_rel_err(an, fd) < 1e-4);
      }
    }
  }
}
