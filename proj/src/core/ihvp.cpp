#include "core/ihvp.hpp"

#include <string>

#include "core/error.hpp"

namespace strucgrad {

void IhvpConfig::validate() const {
  if (k < 0) throw ConfigError("ihvp: K must be >= 0");
  if (alpha <= 0.0) throw ConfigError("ihvp: alpha must be > 0");
  if (delta < 0.0) throw ConfigError("ihvp: delta must be >= 0");
}

Vector neumann_ihvp(const std::function<Vector(const Vector&)>& hvp_fn, const Vector& g,
                    const IhvpConfig& cfg) {
  cfg.validate();
  Vector term = g;  // (I - alpha (H + delta I))^i g
  Vector acc = g;
  for (int i = 1; i <= cfg.k; ++i) {
    Vector hv = hvp_fn(term);
    if (hv.size() != term.size()) throw ShapeError("neumann_ihvp: hvp_fn changed dimension");
    if (cfg.delta != 0.0) hv.axpy(cfg.delta, term);
    term.axpy(-cfg.alpha, hv);
    if (!term.all_finite())
      throw NumericError("neumann_ihvp: series diverged at term " + std::to_string(i) +
                         "; use a smaller alpha");
    acc += term;
  }
  acc *= cfg.alpha;
  return acc;
}

HypergradReport implicit_grad_phi(const ScalarFn& prim, const ScalarFn& aux,
                                  const ParamVector& theta, const ParamVector& phi,
                                  const IhvpConfig& cfg, double eps0) {
  cfg.validate();
  HypergradReport rep;
  rep.inner_grad_norm = aux.grad(ParamGroup::Theta, theta, phi).norm();
  rep.explicit_term = prim.grad(ParamGroup::Phi, theta, phi);
  Vector g = prim.grad(ParamGroup::Theta, theta, phi);
  int calls = 0;
  auto aux_hvp = [&](const Vector& v) {
    ++calls;
    return hvp(aux, ParamGroup::Theta, theta, phi, v, eps0);
  };
  Vector w = neumann_ihvp(aux_hvp, g, cfg);
  // residual of the damped solve, one extra product
  {
    Vector hw = aux_hvp(w);
    hw.axpy(cfg.delta, w);
    hw -= g;
    rep.ihvp_residual = hw.norm();
  }
  rep.implicit_term = cross_hvp(aux, theta, phi, w, eps0);
  ++calls;
  rep.total = rep.explicit_term;
  rep.total -= rep.implicit_term;
  rep.hvp_calls = calls;
  if (!rep.total.all_finite()) throw NumericError("implicit_grad_phi: non-finite hypergradient");
  return rep;
}

Vector biased_grad_phi(const ScalarFn& prim, const ParamVector& theta, const ParamVector& phi) {
  return prim.grad(ParamGroup::Phi, theta, phi);
}

}  // namespace strucgrad
