#include "core/mlp.hpp"

#include <cmath>

#include "core/error.hpp"

namespace strucgrad {

Mlp::Mlp(std::string prefix, std::vector<std::size_t> widths)
    : prefix_(std::move(prefix)), widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ShapeError("mlp '" + prefix_ + "' needs at least one layer");
  for (std::size_t w : widths_)
    if (w == 0) throw ShapeError("mlp '" + prefix_ + "' has a zero-width layer");
}

std::string Mlp::weight_name(std::size_t layer) const {
  return prefix_ + ".w" + std::to_string(layer);
}

std::string Mlp::bias_name(std::size_t layer) const {
  return prefix_ + ".b" + std::to_string(layer);
}

void Mlp::append_segments(std::vector<SegmentSpec>& out) const {
  for (std::size_t l = 0; l < layers(); ++l) {
    out.push_back({weight_name(l), widths_[l + 1], widths_[l]});
    out.push_back({bias_name(l), widths_[l + 1], 1});
  }
}

void Mlp::init(ParamVector& p, Rng& rng) const {
  for (std::size_t l = 0; l < layers(); ++l) {
    auto w = p.seg(weight_name(l));
    double r = std::sqrt(6.0 / static_cast<double>(widths_[l] + widths_[l + 1]));
    for (double& x : w) x = rng.uniform(-r, r);
    auto b = p.seg(bias_name(l));
    std::fill(b.begin(), b.end(), 0.0);
  }
}

Vector Mlp::run(const ParamVector& p, Vector a0, const SparseVec* sparse, Trace* trace) const {
  if (trace) {
    trace->acts.clear();
    trace->acts.reserve(layers() + 1);
    trace->acts.push_back(sparse ? Vector() : a0);
  }
  Vector a = std::move(a0);
  for (std::size_t l = 0; l < layers(); ++l) {
    auto w = p.seg(weight_name(l));
    auto b = p.seg(bias_name(l));
    Vector z(widths_[l + 1]);
    std::copy(b.begin(), b.end(), z.data());
    if (l == 0 && sparse) {
      std::size_t c = widths_[0];
      for (const auto& [idx, val] : *sparse) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= c)
          throw ShapeError("sparse feature index " + std::to_string(idx) +
                           " outside input dim " + std::to_string(c));
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += w[i * c + idx] * val;
      }
    } else {
      if (a.size() != widths_[l])
        throw ShapeError("mlp '" + prefix_ + "' input size " + std::to_string(a.size()) +
                         " vs expected " + std::to_string(widths_[l]));
      Vector tmp(widths_[l + 1]);
      matvec(w, widths_[l + 1], widths_[l], a.span(), tmp.span());
      z += tmp;
    }
    if (l + 1 < layers())
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::tanh(z[i]);
    a = std::move(z);
    if (trace) trace->acts.push_back(a);
  }
  return a;
}

Vector Mlp::forward(const ParamVector& p, const Vector& x, Trace* trace) const {
  return run(p, x, nullptr, trace);
}

Vector Mlp::forward(const ParamVector& p, const SparseVec& x, Trace* trace) const {
  return run(p, Vector(), &x, trace);
}

Vector Mlp::backprop_to_first(const ParamVector& p, const Trace& trace, const Vector& dout,
                              Vector& grad) const {
  if (trace.acts.size() != layers() + 1) throw ShapeError("mlp backward: stale trace");
  if (grad.size() != p.size()) throw ShapeError("mlp backward: grad buffer length mismatch");
  Vector delta = dout;  // gradient at layer output (pre-activation for linear output)
  for (std::size_t l = layers(); l-- > 1;) {
    const Vector& ain = trace.acts[l];
    std::size_t off_w = p.seg_offset(weight_name(l));
    std::size_t off_b = p.seg_offset(bias_name(l));
    add_outer({grad.data() + off_w, widths_[l + 1] * widths_[l]}, delta.span(), ain.span(), 1.0);
    axpy({grad.data() + off_b, widths_[l + 1]}, 1.0, delta.span());
    Vector din(widths_[l]);
    tmatvec(p.seg(weight_name(l)), widths_[l + 1], widths_[l], delta.span(), din.span());
    // through tanh of the previous layer
    for (std::size_t i = 0; i < din.size(); ++i) din[i] *= 1.0 - ain[i] * ain[i];
    delta = std::move(din);
  }
  return delta;
}

Vector Mlp::backward(const ParamVector& p, const Trace& trace, const Vector& dout,
                     Vector& grad) const {
  if (grad.size() != p.size()) throw ShapeError("mlp backward: grad buffer length mismatch");
  Vector delta = layers() == 1 ? dout : backprop_to_first(p, trace, dout, grad);
  const Vector& a0 = trace.acts[0];
  if (a0.size() != widths_[0]) throw ShapeError("mlp backward: trace has no dense input");
  std::size_t off_w = p.seg_offset(weight_name(0));
  std::size_t off_b = p.seg_offset(bias_name(0));
  add_outer({grad.data() + off_w, widths_[1] * widths_[0]}, delta.span(), a0.span(), 1.0);
  axpy({grad.data() + off_b, widths_[1]}, 1.0, delta.span());
  Vector din(widths_[0]);
  tmatvec(p.seg(weight_name(0)), widths_[1], widths_[0], delta.span(), din.span());
  return din;
}

void Mlp::backward(const ParamVector& p, const Trace& trace, const SparseVec& x,
                   const Vector& dout, Vector& grad) const {
  if (grad.size() != p.size()) throw ShapeError("mlp backward: grad buffer length mismatch");
  Vector delta = layers() == 1 ? dout : backprop_to_first(p, trace, dout, grad);
  std::size_t c = widths_[0];
  std::size_t off_w = p.seg_offset(weight_name(0));
  std::size_t off_b = p.seg_offset(bias_name(0));
  for (const auto& [idx, val] : x)
    for (std::size_t i = 0; i < delta.size(); ++i)
      grad[off_w + i * c + static_cast<std::size_t>(idx)] += delta[i] * val;
  axpy({grad.data() + off_b, widths_[1]}, 1.0, delta.span());
}

}  // namespace strucgrad
