#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/param_vector.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace strucgrad {

using SparseVec = std::vector<std::pair<int, double>>;

// Feed-forward stack: affine layers with tanh on hidden layers and a linear
// output layer. Parameters live in named segments "<prefix>.w<i>"/"<prefix>.b<i>"
// of a ParamVector owned by the caller.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, std::vector<std::size_t> widths);

  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  std::size_t layers() const { return widths_.size() - 1; }

  void append_segments(std::vector<SegmentSpec>& out) const;
  // Glorot-uniform weights, zero biases.
  void init(ParamVector& p, Rng& rng) const;

  // Post-activation values per layer; acts[0] is the dense input (empty for
  // the sparse entry point), acts.back() is the linear output.
  struct Trace {
    std::vector<Vector> acts;
  };

  Vector forward(const ParamVector& p, const Vector& x, Trace* trace = nullptr) const;
  Vector forward(const ParamVector& p, const SparseVec& x, Trace* trace = nullptr) const;

  // Backpropagates dout (gradient at the linear output) through the stack,
  // accumulating parameter gradients into `grad` (flat, same length as p).
  // Returns the gradient at the dense input.
  Vector backward(const ParamVector& p, const Trace& trace, const Vector& dout,
                  Vector& grad) const;
  // Sparse-input variant; input gradient is not materialized.
  void backward(const ParamVector& p, const Trace& trace, const SparseVec& x, const Vector& dout,
                Vector& grad) const;

  std::string weight_name(std::size_t layer) const;
  std::string bias_name(std::size_t layer) const;

 private:
  Vector run(const ParamVector& p, Vector a0, const SparseVec* sparse, Trace* trace) const;
  // Shared hidden-layer sweep; returns delta at the first affine layer's output.
  Vector backprop_to_first(const ParamVector& p, const Trace& trace, const Vector& dout,
                           Vector& grad) const;

  std::string prefix_;
  std::vector<std::size_t> widths_;
};

}  // namespace strucgrad
