#include <cmath>
#include <limits>

#include "core/error.hpp"
#include "core/ihvp.hpp"
#include "core/rng.hpp"
#include "core/toy_fns.hpp"
#include "doctest.h"

using namespace strucgrad;

namespace {

// independent dense solve (partial pivoting) used as the iHVP oracle
Vector gauss_solve(Matrix a, Vector b) {
  std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(c, j), a(piv, j));
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      double f = a(r, c) / a(c, c);
      for (std::size_t j = c; j < n; ++j) a(r, j) -= f * a(c, j);
      b[r] -= f * b[c];
    }
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

Matrix random_spd_spectrum(std::size_t n, double lo, double hi, Rng& rng) {
  // random rotation via Gram-Schmidt on a random matrix, then Q diag Q^T
  Matrix q(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) q(i, j) = rng.normal();
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double d = 0.0;
      for (std::size_t r = 0; r < n; ++r) d += q(r, c) * q(r, prev);
      for (std::size_t r = 0; r < n; ++r) q(r, c) -= d * q(r, prev);
    }
    double nrm = 0.0;
    for (std::size_t r = 0; r < n; ++r) nrm += q(r, c) * q(r, c);
    nrm = std::sqrt(nrm);
    for (std::size_t r = 0; r < n; ++r) q(r, c) /= nrm;
  }
  Vector lam(n);
  for (std::size_t i = 0; i < n; ++i) lam[i] = rng.uniform(lo, hi);
  Matrix h(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += q(i, k) * lam[k] * q(j, k);
      h(i, j) = s;
    }
  return h;
}

}  // namespace

TEST_CASE("neumann series basics") {
  SUBCASE("identity Hessian with alpha 1 returns g for any K") {
    auto id = [](const Vector& v) { return v; };
    Vector g{0.4, -1.1, 2.0};
    for (int k : {0, 1, 5, 20}) {
      Vector w = neumann_ihvp(id, g, {.k = k, .alpha = 1.0, .delta = 0.0});
      CHECK(grad_rel_err(w, g) < 1e-14);
    }
  }
  SUBCASE("zero right-hand side") {
    auto id = [](const Vector& v) { return v; };
    Vector w = neumann_ihvp(id, Vector(4), {.k = 10, .alpha = 0.3, .delta = 0.0});
    CHECK(w.norm() == 0.0);
  }
  SUBCASE("diagonal closed form: (1 - (1 - alpha h)^(K+1)) / h") {
    Matrix h = Matrix::from_rows({{2.0, 0.0}, {0.0, 4.0}});
    auto hv = [&](const Vector& v) { return h.matvec(v); };
    Vector g{1.0, 1.0};
    Vector w = neumann_ihvp(hv, g, {.k = 50, .alpha = 0.1, .delta = 0.0});
    CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-3));
    // exact truncation values
    CHECK(w[0] == doctest::Approx((1.0 - std::pow(0.8, 51)) / 2.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx((1.0 - std::pow(0.6, 51)) / 4.0).epsilon(1e-12));
  }
  SUBCASE("invalid config") {
    auto id = [](const Vector& v) { return v; };
    CHECK_THROWS_AS((void)neumann_ihvp(id, Vector{1.0}, {.k = -1, .alpha = 0.5, .delta = 0.0}),
                    ConfigError);
    CHECK_THROWS_AS((void)neumann_ihvp(id, Vector{1.0}, {.k = 1, .alpha = 0.0, .delta = 0.0}),
                    ConfigError);
  }
  SUBCASE("divergence raises a numeric error") {
    auto big = [](const Vector& v) {
      Vector out = v;
      out *= 1e155;
      return out;
    };
    CHECK_THROWS_AS((void)neumann_ihvp(big, Vector{1.0, 1.0}, {.k = 5, .alpha = 1.0, .delta = 0.0}),
                    NumericError);
  }
}

TEST_CASE("neumann matches a direct solve on random SPD systems") {
  Rng rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix h = random_spd_spectrum(10, 0.3, 1.5, rng);
    Vector g(10);
    for (int i = 0; i < 10; ++i) g[i] = rng.normal();
    auto hv = [&](const Vector& v) { return h.matvec(v); };
    Vector direct = gauss_solve(h, g);
    Vector w = neumann_ihvp(hv, g, {.k = 40, .alpha = 1.0, .delta = 0.0});
    CHECK(grad_rel_err(w, direct) < 1e-3);

    // residual is monotonically non-increasing in K
    double prev = std::numeric_limits<double>::infinity();
    for (int k : {0, 2, 5, 10, 20, 40}) {
      Vector wk = neumann_ihvp(hv, g, {.k = k, .alpha = 1.0, .delta = 0.0});
      Vector r = h.matvec(wk);
      r -= g;
      CHECK(r.norm() <= prev + 1e-12);
      prev = r.norm();
    }
  }
}

TEST_CASE("neumann uses exactly K hvp calls") {
  int calls = 0;
  auto counting = [&](const Vector& v) {
    ++calls;
    return v;
  };
  for (int k : {0, 1, 7}) {
    calls = 0;
    (void)neumann_ihvp(counting, Vector{1.0, 2.0}, {.k = k, .alpha = 0.5, .delta = 0.0});
    CHECK(calls == k);
  }
}

TEST_CASE("implicit gradient on the quadratic bi-level family") {
  Matrix m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  BilevelQuadAux aux(m);
  ThetaNormPrim prim;
  ParamVector phi = flat_params("phi", Vector{1.0, 1.0});
  ParamVector theta = flat_params("theta", m.matvec(phi.flatten()));  // theta* = M phi

  SUBCASE("closed form M^T M phi = [24, 34]") {
    HypergradReport rep =
        implicit_grad_phi(prim, aux, theta, phi, {.k = 50, .alpha = 0.5, .delta = 0.0});
    CHECK(rep.total[0] == doctest::Approx(24.0).epsilon(1e-3));
    CHECK(rep.total[1] == doctest::Approx(34.0).epsilon(1e-3));
    CHECK(rep.explicit_term.norm() == 0.0);
    CHECK(rep.inner_grad_norm < 1e-12);
    CHECK(rep.ihvp_residual < 1e-6);
    CHECK(rep.hvp_calls == 52);  // K series + residual + cross product
    // sign convention: total = explicit - implicit_term
    Vector recon = rep.explicit_term;
    recon -= rep.implicit_term;
    CHECK(grad_rel_err(recon, rep.total) < 1e-14);
  }
  SUBCASE("zero map: total vanishes") {
    BilevelQuadAux aux0(Matrix(2, 2, 0.0));
    ParamVector theta0 = flat_params("theta", Vector(2));
    HypergradReport rep =
        implicit_grad_phi(prim, aux0, theta0, phi, {.k = 20, .alpha = 0.5, .delta = 0.0});
    CHECK(rep.total.norm() < 1e-12);
  }
  SUBCASE("aux independent of phi: total is the explicit term") {
    SeparableFn sep;  // theta-Hessian = I, zero cross term
    QuadraticForm prim_phi(Matrix::from_rows({{2.0, 0.0}, {0.0, 2.0}}), ParamGroup::Phi);
    HypergradReport rep =
        implicit_grad_phi(prim_phi, sep, theta, phi, {.k = 20, .alpha = 0.5, .delta = 0.0});
    CHECK(rep.implicit_term.norm() < 1e-9);
    Vector expect = 2.0 * phi.flatten();
    CHECK(grad_rel_err(rep.total, expect) < 1e-9);
  }
}

TEST_CASE("implicit gradient matches M^T M phi for random scaled maps") {
  Rng rng(55);
  for (int trial = 0; trial < 6; ++trial) {
    Matrix m(3, 3);
    double frob = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        m(i, j) = rng.normal();
        frob += m(i, j) * m(i, j);
      }
    // Frobenius bound on the spectral radius keeps it well under 2/alpha.
    double scale = 1.0 / std::sqrt(frob);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) m(i, j) *= scale;
    Vector pv(3);
    for (int i = 0; i < 3; ++i) pv[i] = rng.normal();
    ParamVector phi = flat_params("phi", pv);
    ParamVector theta = flat_params("theta", m.matvec(pv));
    BilevelQuadAux aux(m);
    ThetaNormPrim prim;
    HypergradReport rep =
        implicit_grad_phi(prim, aux, theta, phi, {.k = 50, .alpha = 0.5, .delta = 0.0});
    Vector expect = m.tmatvec(m.matvec(pv));
    CHECK(grad_rel_err(rep.total, expect) < 1e-3);
  }
}

TEST_CASE("biased gradient ignores the implicit term") {
  Matrix m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  ParamVector phi = flat_params("phi", Vector{1.0, 1.0});
  ParamVector theta = flat_params("theta", m.matvec(phi.flatten()));
  SUBCASE("outer objective with no explicit phi dependence gives zero") {
    ThetaNormPrim prim;
    CHECK(biased_grad_phi(prim, theta, phi).norm() == 0.0);
  }
  SUBCASE("pure phi quadratic returns phi") {
    QuadraticForm prim(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), ParamGroup::Phi);
    Vector g = biased_grad_phi(prim, theta, phi);
    CHECK(grad_rel_err(g, phi.flatten()) < 1e-14);
  }
  SUBCASE("constant objective returns zero") {
    ConstFn prim(3.0);
    CHECK(biased_grad_phi(prim, theta, phi).norm() == 0.0);
  }
}
