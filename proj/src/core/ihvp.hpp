#pragma once

#include <functional>

#include "core/diff.hpp"

namespace strucgrad {

struct IhvpConfig {
  int k = 5;            // truncation order: series terms beyond the 0th
  double alpha = 0.1;   // preconditioning scale (reciprocal of the divisor)
  double delta = 1e-3;  // Hessian damping, applied as +delta*v inside each product
  void validate() const;
};

// Truncated von Neumann series for H^{-1} g:
//   alpha * sum_{i=0}^{K} (I - alpha (H + delta I))^i g
// computed iteratively; exactly K hvp_fn calls. Convergence requires
// alpha * lambda_max(H + delta I) < 2.
Vector neumann_ihvp(const std::function<Vector(const Vector&)>& hvp_fn, const Vector& g,
                    const IhvpConfig& cfg);

// Eq-style decomposition of the total outer gradient:
//   total = d(prim)/d(phi) - [cross-Hessian of aux] (theta-Hessian of aux)^{-1} d(prim)/d(theta)
struct HypergradReport {
  Vector explicit_term;
  Vector implicit_term;  // the subtracted product term
  Vector total;          // explicit_term - implicit_term
  double ihvp_residual = 0.0;   // ||(H + delta I) w - g|| of the series solve
  double inner_grad_norm = 0.0;  // ||d(aux)/d(theta)|| at theta*, the inner optimality gap
  int hvp_calls = 0;             // series + residual + cross products
};

HypergradReport implicit_grad_phi(const ScalarFn& prim, const ScalarFn& aux,
                                  const ParamVector& theta, const ParamVector& phi,
                                  const IhvpConfig& cfg, double eps0 = 1e-3);

// The biased baseline update: d(prim)/d(phi) alone.
Vector biased_grad_phi(const ScalarFn& prim, const ParamVector& theta, const ParamVector& phi);

}  // namespace strucgrad
