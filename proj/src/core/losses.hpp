#pragma once

#include <memory>
#include <vector>

#include "core/data.hpp"
#include "core/diff.hpp"
#include "core/models.hpp"
#include "core/rng.hpp"

namespace strucgrad {

// ---- elementary pieces ----

// Sum of per-component logistic losses; yhat components are clamped into
// [kProbFloor, 1-kProbFloor] before the logs.
double mbce(std::span<const std::uint8_t> y, const Vector& yhat);
Vector mbce_grad_yhat(std::span<const std::uint8_t> y, const Vector& yhat);

// Per-position categorical cross entropy, summed over the sequence.
double seq_nll(const std::vector<int>& tags, const Matrix& probs);

// F1 of binary vectors; both supports empty -> 1.
double f1_binary(std::span<const std::uint8_t> gold, std::span<const std::uint8_t> pred);

// Task costs s(yhat, y) in [0,1], zero at the gold output.
double mlc_cost(std::span<const std::uint8_t> gold, std::span<const std::uint8_t> pred);  // 1 - F1
double mlc_cost_soft(std::span<const std::uint8_t> gold, const Vector& yhat);
Vector mlc_cost_soft_grad(std::span<const std::uint8_t> gold, const Vector& yhat);
double seq_cost(const std::vector<int>& gold, const std::vector<int>& pred);  // Hamming fraction
double seq_cost_soft(const std::vector<int>& gold, const Matrix& yhat);
Matrix seq_cost_soft_grad(const std::vector<int>& gold, const Matrix& yhat);

// Margin core: [cost - e_pred + e_gold]_+ + lambda_rank [-e_pred + e_gold]_+
double ssvm_core(double cost, double e_pred, double e_gold, double lambda_rank);
// Contrastive-divergence core over terms a_k = -E(x, ybar_k) + s_k (k=0..K,
// ybar_0 = gold so s_0 = 0): logsumexp(a) + e_gold. Non-negative.
double cd_core(std::span<const double> terms, double e_gold);
std::vector<double> cd_softmax(std::span<const double> terms);

// K i.i.d. binary vectors, component j drawn with probability yhat_j.
std::vector<std::vector<std::uint8_t>> sample_bernoulli(const Vector& yhat, int k, Rng& rng);
// Per-position categorical draws from softmax rows.
std::vector<std::vector<int>> sample_categorical(const Matrix& probs, int k, Rng& rng);

// ---- dataset-level scores ----

struct MlcScores {
  double example_f1 = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};
std::vector<std::uint8_t> threshold_labels(const Vector& yhat);  // 0.5
MlcScores mlc_scores(const MlcDataset& ds, const std::vector<std::vector<std::uint8_t>>& preds);
double token_accuracy(const SeqDataset& ds, const std::vector<std::vector<int>>& preds);

// ---- batch objectives (ScalarFns bound to a model + batch) ----

// L_Aux = mean_batch [ MLE(y, A(x)) + lambda E(x, A(x)) ]
class MlcAuxLoss : public ScalarFn {
 public:
  MlcAuxLoss(const MlcModel& model, const MlcDataset& data, std::vector<int> batch, double lambda);
  double value(const ParamVector& theta, const ParamVector& phi) const override;
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override;

 private:
  const MlcModel& model_;
  const MlcDataset& data_;
  std::vector<int> batch_;
  double lambda_;
  std::size_t theta_size_, phi_size_;
};

// L_SSVM = mean_batch [ s(yhat,y) - E(x,yhat) + E(x,y) ]_+  (+ optional
// lambda_rank-weighted ranking hinge), yhat = A(x).
class MlcSsvmPrim : public ScalarFn {
 public:
  MlcSsvmPrim(const MlcModel& model, const MlcDataset& data, std::vector<int> batch,
              double lambda_rank);
  double value(const ParamVector& theta, const ParamVector& phi) const override;
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override;

 private:
  const MlcModel& model_;
  const MlcDataset& data_;
  std::vector<int> batch_;
  double lambda_rank_;
  std::size_t theta_size_, phi_size_;
};

// Cost-augmented contrastive divergence with negatives frozen at
// construction: samples are drawn from A(theta_draw, x) once, so the
// objective is an exactly differentiable function of phi (and constant in
// theta between redraws).
class MlcCdPrim : public ScalarFn {
 public:
  MlcCdPrim(const MlcModel& model, const MlcDataset& data, std::vector<int> batch, int k,
            const ParamVector& theta_draw, Rng& rng);
  double value(const ParamVector& theta, const ParamVector& phi) const override;
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override;
  // candidate vectors per batch example, gold at index 0
  const std::vector<std::vector<Vector>>& candidates() const { return cands_; }

 private:
  const MlcModel& model_;
  const MlcDataset& data_;
  std::vector<int> batch_;
  std::vector<std::vector<Vector>> cands_;
  std::vector<std::vector<double>> costs_;
  std::size_t theta_size_, phi_size_;
};

class SeqAuxLoss : public ScalarFn {
 public:
  SeqAuxLoss(const SeqModel& model, const SeqDataset& data, std::vector<int> batch, double lambda);
  double value(const ParamVector& theta, const ParamVector& phi) const override;
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override;

 private:
  const SeqModel& model_;
  const SeqDataset& data_;
  std::vector<int> batch_;
  double lambda_;
  std::size_t theta_size_, phi_size_;
};

class SeqSsvmPrim : public ScalarFn {
 public:
  SeqSsvmPrim(const SeqModel& model, const SeqDataset& data, std::vector<int> batch,
              double lambda_rank);
  double value(const ParamVector& theta, const ParamVector& phi) const override;
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override;

 private:
  const SeqModel& model_;
  const SeqDataset& data_;
  std::vector<int> batch_;
  double lambda_rank_;
  std::size_t theta_size_, phi_size_;
};

class SeqCdPrim : public ScalarFn {
 public:
  SeqCdPrim(const SeqModel& model, const SeqDataset& data, std::vector<int> batch, int k,
            const ParamVector& theta_draw, Rng& rng);
  double value(const ParamVector& theta, const ParamVector& phi) const override;
  Vector grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const override;

 private:
  const SeqModel& model_;
  const SeqDataset& data_;
  std::vector<int> batch_;
  std::vector<std::vector<Matrix>> cands_;  // one-hot candidate matrices, gold first
  std::vector<std::vector<double>> costs_;
  std::size_t theta_size_, phi_size_;
};

}  // namespace strucgrad
