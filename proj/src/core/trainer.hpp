#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/ihvp.hpp"
#include "core/losses.hpp"

namespace strucgrad {

enum class PrimaryLoss { Ssvm, Cd };
enum class Regime { Implicit, Alternating, Mbce };

PrimaryLoss primary_loss_from_string(const std::string& s);
std::string to_string(PrimaryLoss p);
Regime regime_from_string(const std::string& s);
std::string to_string(Regime r);

struct TrainConfig {
  int t_inner = 5;
  int t_outer = 200;
  double eta_inner = 0.1;
  double eta_outer = 0.1;
  double lambda = 1.0;       // energy weight in the auxiliary loss
  double lambda_rank = 0.0;  // ranking hinge weight in the margin primary
  PrimaryLoss prim = PrimaryLoss::Cd;
  int cd_negatives = 4;
  IhvpConfig ihvp;
  int batch_size = 32;
  std::uint64_t seed = 1;
  int eval_every = 10;
  int patience = 10;  // evals without improvement before stopping; 0 disables
  double momentum = 0.0;
  bool fresh_outer_batch = false;  // draw a separate batch for the primary loss
  double eps0 = 1e-3;              // divided-difference perturbation scale
  void validate() const;
};

// One metrics row per outer iteration. Validation columns hold the most
// recent evaluation (zeros before the first one); baselines leave the
// hypergradient columns at zero.
struct MetricsRecord {
  int outer_iter = 0;
  double aux_loss = 0.0;
  double prim_loss = 0.0;
  double hypergrad_norm = 0.0;
  double explicit_norm = 0.0;
  double implicit_norm = 0.0;
  double ihvp_residual = 0.0;
  double inner_grad_norm = 0.0;
  int theta_updates = 0;
  int phi_updates = 0;
  double valid_example_f1 = 0.0;
  double valid_micro_f1 = 0.0;
  double valid_macro_f1 = 0.0;
  double valid_token_acc = 0.0;
};

struct TrainHooks {
  std::function<void(int, const ParamVector&)> on_outer_begin;  // iter, theta entering
  std::function<void(int, const ParamVector&, const ParamVector&)> on_outer_end;
};

struct TrainResult {
  ParamVector theta, phi;
  std::vector<MetricsRecord> metrics;
  bool aborted = false;
  std::string abort_reason;
  int best_iter = 0;       // 0 when no evaluation happened
  double best_score = 0.0;
  long theta_update_count = 0;
  long phi_update_count = 0;
};

// Binds a model family and its train/valid splits for the generic loops.
class Task {
 public:
  virtual ~Task() = default;
  virtual ParamVector init_theta(Rng& rng) const = 0;
  virtual ParamVector init_phi(Rng& rng) const = 0;
  virtual std::unique_ptr<ScalarFn> aux_loss(std::vector<int> batch, double lambda) const = 0;
  virtual std::unique_ptr<ScalarFn> primary_loss(std::vector<int> batch, const TrainConfig& cfg,
                                                 const ParamVector& theta_now, Rng& rng) const = 0;
  virtual int train_size() const = 0;
  virtual bool has_valid() const = 0;
  // Fills the validation columns and returns the model-selection score.
  virtual double eval_into(const ParamVector& theta, MetricsRecord& rec) const = 0;
};

class MlcTask : public Task {
 public:
  MlcTask(const MlcModel& model, const MlcDataset& train, const MlcDataset& valid);
  ParamVector init_theta(Rng& rng) const override;
  ParamVector init_phi(Rng& rng) const override;
  std::unique_ptr<ScalarFn> aux_loss(std::vector<int> batch, double lambda) const override;
  std::unique_ptr<ScalarFn> primary_loss(std::vector<int> batch, const TrainConfig& cfg,
                                         const ParamVector& theta_now, Rng& rng) const override;
  int train_size() const override { return static_cast<int>(train_.items.size()); }
  bool has_valid() const override { return !valid_.items.empty(); }
  double eval_into(const ParamVector& theta, MetricsRecord& rec) const override;

 private:
  const MlcModel& model_;
  const MlcDataset& train_;
  const MlcDataset& valid_;
};

class SeqTask : public Task {
 public:
  SeqTask(const SeqModel& model, const SeqDataset& train, const SeqDataset& valid);
  ParamVector init_theta(Rng& rng) const override;
  ParamVector init_phi(Rng& rng) const override;
  std::unique_ptr<ScalarFn> aux_loss(std::vector<int> batch, double lambda) const override;
  std::unique_ptr<ScalarFn> primary_loss(std::vector<int> batch, const TrainConfig& cfg,
                                         const ParamVector& theta_now, Rng& rng) const override;
  int train_size() const override { return static_cast<int>(train_.items.size()); }
  bool has_valid() const override { return !valid_.items.empty(); }
  double eval_into(const ParamVector& theta, MetricsRecord& rec) const override;

 private:
  const SeqModel& model_;
  const SeqDataset& train_;
  const SeqDataset& valid_;
};

// T descent steps on aux w.r.t. theta only; throws NumericError with
// iteration diagnostics on a non-finite loss or gradient.
void inner_loop(ParamVector& theta, const ParamVector& phi, const ScalarFn& aux, int steps,
                double eta, double momentum = 0.0, Vector* velocity = nullptr,
                int* updates = nullptr);

// One full outer step on explicit losses (exposed for the closed-form
// bi-level checks): inner loop, hypergradient, phi update.
struct OuterStepInfo {
  HypergradReport hg;
  double aux_loss = 0.0;
  double prim_loss = 0.0;
  int theta_updates = 0;
};
OuterStepInfo outer_step(ParamVector& theta, ParamVector& phi, const ScalarFn& aux,
                         const ScalarFn& prim, const TrainConfig& cfg);

TrainResult train_implicit(const Task& task, const TrainConfig& cfg, const TrainHooks& hooks = {});
TrainResult train_mbce(const Task& task, const TrainConfig& cfg, const TrainHooks& hooks = {});
TrainResult train_alternating(const Task& task, const TrainConfig& cfg,
                              const TrainHooks& hooks = {});

}  // namespace strucgrad
