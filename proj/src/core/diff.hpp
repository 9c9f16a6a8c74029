#pragma once

#include "core/param_vector.hpp"
#include "core/tensor.hpp"

namespace strucgrad {

enum class ParamGroup { Theta, Phi };

// A scalar objective of one or two parameter groups (data batch bound at
// construction), with an analytic gradient per group. Every ScalarFn shipped
// by this library must satisfy the differentiation contract: the analytic
// gradient matches central finite differences of value() to 1e-4 relative
// error at random points.
class ScalarFn {
 public:
  virtual ~ScalarFn() = default;
  virtual double value(const ParamVector& theta, const ParamVector& phi) const = 0;
  virtual Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const = 0;
};

Vector grad(const ScalarFn& f, ParamGroup g, const ParamVector& theta, const ParamVector& phi);

// Central divided difference of gradients:
//   (grad f(p + eps v) - grad f(p - eps v)) / (2 eps)  ~=  H v
// with the perturbation applied to `g`'s parameter group. The step is
// eps0 / max(1, ||v||), keeping the actual parameter change scale-invariant.
Vector hvp(const ScalarFn& f, ParamGroup g, const ParamVector& theta, const ParamVector& phi,
           const Vector& v, double eps0 = 1e-3);

// Mixed second derivative product: perturbs theta by +-eps w and differences
// the phi-gradient, yielding C w with C_ij = d2 f / dphi_i dtheta_j.
Vector cross_hvp(const ScalarFn& f, const ParamVector& theta, const ParamVector& phi,
                 const Vector& w, double eps0 = 1e-3);

// Central finite differences of value() per coordinate. This is the contract
// reference: it never touches the analytic gradient path.
Vector finite_diff_grad(const ScalarFn& f, ParamGroup g, const ParamVector& theta,
                        const ParamVector& phi, double step = 1e-5);

// ||a-b|| / max(||a||, ||b||); 0 when both are tiny.
double grad_rel_err(const Vector& a, const Vector& b);

}  // namespace strucgrad
