#pragma once

#include <vector>

#include "core/data.hpp"
#include "core/mlp.hpp"
#include "core/param_vector.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace strucgrad {

// Relaxed label components are kept inside (0,1): clamp applied before logs
// and wherever probabilities are consumed.
constexpr double kProbFloor = 1e-7;
double clamp_prob(double p);

double sigmoid(double z);
void softmax_inplace(std::span<double> row);
// dlogits = p .* (dp - <p, dp>)
void softmax_backward(std::span<const double> p, std::span<const double> dp,
                      std::span<double> dlogits);

struct MlcArch {
  int feature_dim = 0;  // d
  int label_count = 0;  // L
  std::vector<std::size_t> infer_hidden{32};
  std::vector<std::size_t> feature_hidden{32};
  int feature_out = 16;    // d_b
  int energy_hidden = 16;  // rows of M
};

// Multi-label family. Inference net A(theta): MLP d -> L with sigmoid outputs.
// Energy E(phi, x, yhat) = yhat^T W b(x) + v^T sigma(M yhat) with a tanh MLP
// feature net b. theta and phi are disjoint parameter vectors.
class MlcModel {
 public:
  explicit MlcModel(MlcArch arch);

  const MlcArch& arch() const { return arch_; }
  ParamVector make_theta() const;
  ParamVector make_phi() const;
  void init_theta(ParamVector& theta, Rng& rng) const;
  void init_phi(ParamVector& phi, Rng& rng) const;

  struct InferTrace {
    Mlp::Trace mlp;
    Vector probs;  // clamped sigmoid outputs
  };
  Vector infer_forward(const ParamVector& theta, const MlcExample& x,
                       InferTrace* trace = nullptr) const;
  // Accumulates d(loss)/d(theta) into grad given d(loss)/d(yhat).
  void infer_backward(const ParamVector& theta, const MlcExample& x, const InferTrace& trace,
                      const Vector& dyhat, Vector& grad) const;

  double energy(const ParamVector& phi, const MlcExample& x, const Vector& yhat) const;
  // Accumulates scale * dE/dphi into grad.
  void energy_backward_phi(const ParamVector& phi, const MlcExample& x, const Vector& yhat,
                           double scale, Vector& grad) const;
  Vector energy_grad_y(const ParamVector& phi, const MlcExample& x, const Vector& yhat) const;
  // Hessian of the global term v^T sigma(M y) at y: M^T diag(v .* sigma''(M y)) M.
  // The pairwise-linear term contributes nothing.
  Matrix energy_label_hessian(const ParamVector& phi, const Vector& y) const;

 private:
  MlcArch arch_;
  Mlp infer_, feat_;
};

struct SeqArch {
  int vocab = 0;      // V (token id 0 = unknown)
  int tag_count = 0;  // L
  int embed_dim = 8;  // energy feature-net embeddings
  std::vector<std::size_t> feature_hidden{32};
  int feature_out = 16;  // d_b
  int infer_embed_dim = 8;
  std::vector<std::size_t> infer_hidden{32};
};

// Sequence-labeling family over token windows (radius 1). Inference net:
// per-position softmax over tags. Energy:
//   E = sum_t yhat_t^T (U b(x,t)) + sum_{t>=2} yhat_{t-1}^T W yhat_t
// where b(x,t) is a tanh MLP over the concatenated window embeddings.
class SeqModel {
 public:
  explicit SeqModel(SeqArch arch);

  const SeqArch& arch() const { return arch_; }
  ParamVector make_theta() const;
  ParamVector make_phi() const;
  void init_theta(ParamVector& theta, Rng& rng) const;
  void init_phi(ParamVector& phi, Rng& rng) const;

  struct InferTrace {
    std::vector<Mlp::Trace> mlp;  // per position
    Matrix probs;                 // T x L softmax rows
  };
  Matrix infer_forward(const ParamVector& theta, const SeqExample& x,
                       InferTrace* trace = nullptr) const;
  void infer_backward(const ParamVector& theta, const SeqExample& x, const InferTrace& trace,
                      const Matrix& dprobs, Vector& grad) const;

  double energy(const ParamVector& phi, const SeqExample& x, const Matrix& yhat) const;
  void energy_backward_phi(const ParamVector& phi, const SeqExample& x, const Matrix& yhat,
                           double scale, Vector& grad) const;
  Matrix energy_grad_y(const ParamVector& phi, const SeqExample& x, const Matrix& yhat) const;

  static Matrix one_hot(const std::vector<int>& tags, int tag_count);

 private:
  Vector window_embed(const ParamVector& p, std::string_view emb_seg, const SeqExample& x,
                      std::size_t t, int dim) const;
  void scatter_window_grad(const ParamVector& p, std::string_view emb_seg, const SeqExample& x,
                           std::size_t t, int dim, const Vector& dwin, Vector& grad) const;
  std::vector<Vector> features(const ParamVector& phi, const SeqExample& x,
                               std::vector<Mlp::Trace>* traces) const;

  SeqArch arch_;
  Mlp infer_, feat_;
};

}  // namespace strucgrad
