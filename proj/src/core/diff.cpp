#include "core/diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/error.hpp"

namespace strucgrad {

Vector grad(const ScalarFn& f, ParamGroup g, const ParamVector& theta, const ParamVector& phi) {
  return f.grad(g, theta, phi);
}

namespace {

const ParamVector& pick(ParamGroup g, const ParamVector& theta, const ParamVector& phi) {
  return g == ParamGroup::Theta ? theta : phi;
}

ParamVector perturbed(const ParamVector& p, const Vector& v, double eps) {
  if (p.size() != v.size())
    throw ShapeError("hvp direction length " + std::to_string(v.size()) +
                     " does not match parameter group length " + std::to_string(p.size()));
  ParamVector out = p;
  axpy(out.values(), eps, v.span());
  return out;
}

}  // namespace

Vector hvp(const ScalarFn& f, ParamGroup g, const ParamVector& theta, const ParamVector& phi,
           const Vector& v, double eps0) {
  if (eps0 <= 0.0) throw NumericError("hvp: eps must be positive");
  if (!v.all_finite()) throw NumericError("hvp: non-finite direction");
  const ParamVector& p = pick(g, theta, phi);
  double eps = eps0 / std::max(1.0, v.norm());
  ParamVector plus = perturbed(p, v, eps);
  ParamVector minus = perturbed(p, v, -eps);
  Vector gp = g == ParamGroup::Theta ? f.grad(g, plus, phi) : f.grad(g, theta, plus);
  Vector gm = g == ParamGroup::Theta ? f.grad(g, minus, phi) : f.grad(g, theta, minus);
  gp -= gm;
  gp *= 1.0 / (2.0 * eps);
  if (!gp.all_finite())
    throw NumericError("hvp: non-finite result at perturbation eps=" + std::to_string(eps) +
                       ", ||v||=" + std::to_string(v.norm()));
  return gp;
}

Vector cross_hvp(const ScalarFn& f, const ParamVector& theta, const ParamVector& phi,
                 const Vector& w, double eps0) {
  if (eps0 <= 0.0) throw NumericError("cross_hvp: eps must be positive");
  if (!w.all_finite()) throw NumericError("cross_hvp: non-finite direction");
  double eps = eps0 / std::max(1.0, w.norm());
  ParamVector plus = perturbed(theta, w, eps);
  ParamVector minus = perturbed(theta, w, -eps);
  Vector gp = f.grad(ParamGroup::Phi, plus, phi);
  Vector gm = f.grad(ParamGroup::Phi, minus, phi);
  gp -= gm;
  gp *= 1.0 / (2.0 * eps);
  if (!gp.all_finite())
    throw NumericError("cross_hvp: non-finite result at perturbation eps=" + std::to_string(eps) +
                       ", ||w||=" + std::to_string(w.norm()));
  return gp;
}

Vector finite_diff_grad(const ScalarFn& f, ParamGroup g, const ParamVector& theta,
                        const ParamVector& phi, double step) {
  const ParamVector& p = pick(g, theta, phi);
  Vector out(p.size());
  ParamVector work = p;
  auto eval = [&](const ParamVector& q) {
    return g == ParamGroup::Theta ? f.value(q, phi) : f.value(theta, q);
  };
  for (std::size_t i = 0; i < p.size(); ++i) {
    double x = p.values()[i];
    double h = step * std::max(1.0, std::abs(x));
    work.values()[i] = x + h;
    double fp = eval(work);
    work.values()[i] = x - h;
    double fm = eval(work);
    work.values()[i] = x;
    out[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

double grad_rel_err(const Vector& a, const Vector& b) {
  Vector d = a;
  d -= b;
  double denom = std::max(a.norm(), b.norm());
  if (denom < 1e-10) return 0.0;
  return d.norm() / denom;
}

}  // namespace strucgrad
