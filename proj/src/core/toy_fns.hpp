#pragma once

// Small closed-form objectives used by the gradcheck harness and tests.

#include "core/diff.hpp"

namespace strucgrad {

inline ParamVector flat_params(std::string_view name, const Vector& values) {
  ParamVector p({{std::string(name), values.size(), 1}});
  p.assign_flat(values);
  return p;
}

// f(p) = 1/2 p^T A p on one group; A must be symmetric.
class QuadraticForm : public ScalarFn {
 public:
  QuadraticForm(Matrix a, ParamGroup group) : a_(std::move(a)), group_(group) {}

  double value(const ParamVector& theta, const ParamVector& phi) const override {
    const ParamVector& p = group_ == ParamGroup::Theta ? theta : phi;
    Vector x = p.flatten();
    return 0.5 * x.dot(a_.matvec(x));
  }

  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override {
    const ParamVector& p = group_ == ParamGroup::Theta ? theta : phi;
    if (g != group_) {
      const ParamVector& other = g == ParamGroup::Theta ? theta : phi;
      return Vector(other.size());
    }
    return a_.matvec(p.flatten());
  }

 private:
  Matrix a_;
  ParamGroup group_;
};

// f(theta) = c^T theta (zero Hessian).
class LinearFn : public ScalarFn {
 public:
  explicit LinearFn(Vector c) : c_(std::move(c)) {}
  double value(const ParamVector& theta, const ParamVector&) const override {
    return c_.dot(theta.flatten());
  }
  Vector grad(ParamGroup g, const ParamVector&, const ParamVector& phi) const override {
    if (g == ParamGroup::Phi) return Vector(phi.size());
    return c_;
  }

 private:
  Vector c_;
};

class ConstFn : public ScalarFn {
 public:
  explicit ConstFn(double c) : c_(c) {}
  double value(const ParamVector&, const ParamVector&) const override { return c_; }
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override {
    return Vector(g == ParamGroup::Theta ? theta.size() : phi.size());
  }

 private:
  double c_;
};

// f(theta, phi) = theta^T M phi.
class BilinearFn : public ScalarFn {
 public:
  explicit BilinearFn(Matrix m) : m_(std::move(m)) {}
  double value(const ParamVector& theta, const ParamVector& phi) const override {
    return theta.flatten().dot(m_.matvec(phi.flatten()));
  }
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override {
    if (g == ParamGroup::Theta) return m_.matvec(phi.flatten());
    return m_.tmatvec(theta.flatten());
  }

 private:
  Matrix m_;
};

// The quadratic bi-level inner objective: f(theta, phi) = 1/2 ||theta - M phi||^2.
// Its theta-Hessian is the identity and its cross second derivative is -M^T,
// so the total outer gradient of 1/2||theta*||^2 has closed form M^T M phi.
class BilevelQuadAux : public ScalarFn {
 public:
  explicit BilevelQuadAux(Matrix m) : m_(std::move(m)) {}

  double value(const ParamVector& theta, const ParamVector& phi) const override {
    Vector r = residual(theta, phi);
    return 0.5 * r.dot(r);
  }

  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override {
    Vector r = residual(theta, phi);
    if (g == ParamGroup::Theta) return r;
    Vector out = m_.tmatvec(r);
    out *= -1.0;
    return out;
  }

 private:
  Vector residual(const ParamVector& theta, const ParamVector& phi) const {
    Vector r = theta.flatten();
    r -= m_.matvec(phi.flatten());
    return r;
  }
  Matrix m_;
};

// Outer objective 1/2 ||theta||^2: no explicit phi dependence.
class ThetaNormPrim : public ScalarFn {
 public:
  double value(const ParamVector& theta, const ParamVector&) const override {
    Vector t = theta.flatten();
    return 0.5 * t.dot(t);
  }
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override {
    if (g == ParamGroup::Theta) return theta.flatten();
    return Vector(phi.size());
  }
};

// f(theta, phi) = 1/2 ||theta||^2 + 1/2 ||phi||^2 (zero cross-Hessian).
class SeparableFn : public ScalarFn {
 public:
  double value(const ParamVector& theta, const ParamVector& phi) const override {
    Vector t = theta.flatten(), p = phi.flatten();
    return 0.5 * t.dot(t) + 0.5 * p.dot(p);
  }
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override {
    return g == ParamGroup::Theta ? theta.flatten() : phi.flatten();
  }
};

}  // namespace strucgrad
