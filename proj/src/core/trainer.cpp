#include "core/trainer.hpp"

#include <cmath>
#include <numeric>

#include "core/error.hpp"
#include "core/predict.hpp"

namespace strucgrad {

PrimaryLoss primary_loss_from_string(const std::string& s) {
  if (s == "ssvm") return PrimaryLoss::Ssvm;
  if (s == "cd") return PrimaryLoss::Cd;
  throw ConfigError("unknown primary loss '" + s + "' (expected 'ssvm' or 'cd')");
}

std::string to_string(PrimaryLoss p) { return p == PrimaryLoss::Ssvm ? "ssvm" : "cd"; }

Regime regime_from_string(const std::string& s) {
  if (s == "implicit") return Regime::Implicit;
  if (s == "alternating") return Regime::Alternating;
  if (s == "mbce") return Regime::Mbce;
  throw ConfigError("unknown regime '" + s + "' (expected implicit, alternating or mbce)");
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Implicit: return "implicit";
    case Regime::Alternating: return "alternating";
    default: return "mbce";
  }
}

void TrainConfig::validate() const {
  if (t_inner < 1 || t_outer < 1) throw ConfigError("train: iteration counts must be >= 1");
  if (eta_inner <= 0.0 || eta_outer < 0.0) throw ConfigError("train: step sizes must be positive");
  if (lambda < 0.0 || lambda_rank < 0.0) throw ConfigError("train: lambda must be >= 0");
  if (cd_negatives < 1) throw ConfigError("need at least one negative sample");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  if (patience < 0) throw ConfigError("train: patience must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0, 1)");
  if (eps0 <= 0.0) throw ConfigError("train: eps0 must be > 0");
  ihvp.validate();
}

MlcTask::MlcTask(const MlcModel& model, const MlcDataset& train, const MlcDataset& valid)
    : model_(model), train_(train), valid_(valid) {
  if (train_.items.empty()) throw ConfigError("empty dataset");
}

ParamVector MlcTask::init_theta(Rng& rng) const {
  ParamVector p = model_.make_theta();
  model_.init_theta(p, rng);
  return p;
}

ParamVector MlcTask::init_phi(Rng& rng) const {
  ParamVector p = model_.make_phi();
  model_.init_phi(p, rng);
  return p;
}

std::unique_ptr<ScalarFn> MlcTask::aux_loss(std::vector<int> batch, double lambda) const {
  return std::make_unique<MlcAuxLoss>(model_, train_, std::move(batch), lambda);
}

std::unique_ptr<ScalarFn> MlcTask::primary_loss(std::vector<int> batch, const TrainConfig& cfg,
                                                const ParamVector& theta_now, Rng& rng) const {
  if (cfg.prim == PrimaryLoss::Ssvm)
    return std::make_unique<MlcSsvmPrim>(model_, train_, std::move(batch), cfg.lambda_rank);
  return std::make_unique<MlcCdPrim>(model_, train_, std::move(batch), cfg.cd_negatives,
                                     theta_now, rng);
}

double MlcTask::eval_into(const ParamVector& theta, MetricsRecord& rec) const {
  auto preds = mlc_predict_all(model_, theta, valid_);
  MlcScores s = mlc_scores(valid_, preds);
  rec.valid_example_f1 = s.example_f1;
  rec.valid_micro_f1 = s.micro_f1;
  rec.valid_macro_f1 = s.macro_f1;
  return s.example_f1;
}

SeqTask::SeqTask(const SeqModel& model, const SeqDataset& train, const SeqDataset& valid)
    : model_(model), train_(train), valid_(valid) {
  if (train_.items.empty()) throw ConfigError("empty dataset");
}

ParamVector SeqTask::init_theta(Rng& rng) const {
  ParamVector p = model_.make_theta();
  model_.init_theta(p, rng);
  return p;
}

ParamVector SeqTask::init_phi(Rng& rng) const {
  ParamVector p = model_.make_phi();
  model_.init_phi(p, rng);
  return p;
}

std::unique_ptr<ScalarFn> SeqTask::aux_loss(std::vector<int> batch, double lambda) const {
  return std::make_unique<SeqAuxLoss>(model_, train_, std::move(batch), lambda);
}

std::unique_ptr<ScalarFn> SeqTask::primary_loss(std::vector<int> batch, const TrainConfig& cfg,
                                                const ParamVector& theta_now, Rng& rng) const {
  if (cfg.prim == PrimaryLoss::Ssvm)
    return std::make_unique<SeqSsvmPrim>(model_, train_, std::move(batch), cfg.lambda_rank);
  return std::make_unique<SeqCdPrim>(model_, train_, std::move(batch), cfg.cd_negatives,
                                     theta_now, rng);
}

double SeqTask::eval_into(const ParamVector& theta, MetricsRecord& rec) const {
  auto preds = seq_predict_all(model_, theta, valid_);
  rec.valid_token_acc = token_accuracy(valid_, preds);
  return rec.valid_token_acc;
}

void inner_loop(ParamVector& theta, const ParamVector& phi, const ScalarFn& aux, int steps,
                double eta, double momentum, Vector* velocity, int* updates) {
  Vector local_vel;
  Vector* vel = velocity;
  if (momentum != 0.0 && !vel) {
    local_vel = Vector(theta.size());
    vel = &local_vel;
  }
  for (int s = 0; s < steps; ++s) {
    double loss = aux.value(theta, phi);
    Vector g = aux.grad(ParamGroup::Theta, theta, phi);
    if (!std::isfinite(loss) || !g.all_finite())
      throw NumericError("inner loop: non-finite loss at step " + std::to_string(s + 1) +
                         ", ||theta||=" + std::to_string(theta.flatten().norm()) +
                         ", loss=" + std::to_string(loss));
    if (momentum != 0.0) {
      if (vel->size() != g.size()) *vel = Vector(g.size());
      *vel *= momentum;
      *vel += g;
      axpy(theta.values(), -eta, vel->span());
    } else {
      axpy(theta.values(), -eta, g.span());
    }
    if (updates) ++*updates;
  }
}

OuterStepInfo outer_step(ParamVector& theta, ParamVector& phi, const ScalarFn& aux,
                         const ScalarFn& prim, const TrainConfig& cfg) {
  OuterStepInfo info;
  inner_loop(theta, phi, aux, cfg.t_inner, cfg.eta_inner, cfg.momentum, nullptr,
             &info.theta_updates);
  info.aux_loss = aux.value(theta, phi);
  info.prim_loss = prim.value(theta, phi);
  info.hg = implicit_grad_phi(prim, aux, theta, phi, cfg.ihvp, cfg.eps0);
  axpy(phi.values(), -cfg.eta_outer, info.hg.total.span());
  return info;
}

namespace {

// Epoch-shuffled batch stream; wraps (and reshuffles) as needed.
class BatchCycler {
 public:
  BatchCycler(int n, int batch_size, Rng rng)
      : n_(n), bs_(batch_size), rng_(rng), idx_(n), pos_(n) {
    std::iota(idx_.begin(), idx_.end(), 0);
  }
  std::vector<int> next() {
    std::vector<int> out;
    out.reserve(bs_);
    for (int i = 0; i < bs_; ++i) {
      if (pos_ >= n_) {
        rng_.shuffle(idx_);
        pos_ = 0;
      }
      out.push_back(idx_[pos_++]);
    }
    return out;
  }

 private:
  int n_, bs_;
  Rng rng_;
  std::vector<int> idx_;
  int pos_;
};

struct BestTracker {
  double score = -1.0;
  int iter = 0;
  int evals_since = 0;
  ParamVector theta, phi;
  bool improved(double s) { return s > score; }
};

// Shared driver for the three regimes.
template <typename StepFn>
TrainResult run_regime(const Task& task, const TrainConfig& cfg, const TrainHooks& hooks,
                       StepFn&& step) {
  cfg.validate();
  TrainResult res;
  Rng rng_theta(derive_seed(cfg.seed, "theta-init"));
  Rng rng_phi(derive_seed(cfg.seed, "phi-init"));
  Rng rng_cd(derive_seed(cfg.seed, "cd-negatives"));
  BatchCycler batches(task.train_size(), cfg.batch_size, Rng(derive_seed(cfg.seed, "batches")));
  ParamVector theta = task.init_theta(rng_theta);
  ParamVector phi = task.init_phi(rng_phi);
  Vector vel_theta(theta.size()), vel_phi(phi.size());
  BestTracker best;
  MetricsRecord last_eval;  // carries forward validation columns
  bool stop = false;
  for (int t = 1; t <= cfg.t_outer && !stop; ++t) {
    if (hooks.on_outer_begin) hooks.on_outer_begin(t, theta);
    MetricsRecord rec;
    rec.outer_iter = t;
    try {
      step(t, theta, phi, vel_theta, vel_phi, batches, rng_cd, rec);
    } catch (const NumericError& e) {
      res.aborted = true;
      res.abort_reason = e.what();
      res.metrics.push_back(rec);
      break;
    }
    res.theta_update_count += rec.theta_updates;
    res.phi_update_count += rec.phi_updates;
    rec.valid_example_f1 = last_eval.valid_example_f1;
    rec.valid_micro_f1 = last_eval.valid_micro_f1;
    rec.valid_macro_f1 = last_eval.valid_macro_f1;
    rec.valid_token_acc = last_eval.valid_token_acc;
    if (task.has_valid() && (t % cfg.eval_every == 0 || t == cfg.t_outer)) {
      double score = task.eval_into(theta, rec);
      last_eval = rec;
      if (best.improved(score)) {
        best.score = score;
        best.iter = t;
        best.evals_since = 0;
        best.theta = theta;
        best.phi = phi;
      } else if (cfg.patience > 0 && ++best.evals_since >= cfg.patience) {
        stop = true;
      }
    }
    res.metrics.push_back(rec);
    if (hooks.on_outer_end) hooks.on_outer_end(t, theta, phi);
  }
  if (best.iter > 0) {
    res.theta = best.theta;
    res.phi = best.phi;
    res.best_iter = best.iter;
    res.best_score = best.score;
  } else {
    res.theta = theta;
    res.phi = phi;
  }
  return res;
}

}  // namespace

TrainResult train_implicit(const Task& task, const TrainConfig& cfg, const TrainHooks& hooks) {
  return run_regime(task, cfg, hooks,
                    [&](int, ParamVector& theta, ParamVector& phi, Vector& vel_theta,
                        Vector& vel_phi, BatchCycler& batches, Rng& rng_cd, MetricsRecord& rec) {
    auto batch = batches.next();
    auto aux = task.aux_loss(batch, cfg.lambda);
    inner_loop(theta, phi, *aux, cfg.t_inner, cfg.eta_inner, cfg.momentum, &vel_theta,
               &rec.theta_updates);
    auto prim_batch = cfg.fresh_outer_batch ? batches.next() : batch;
    auto prim = task.primary_loss(std::move(prim_batch), cfg, theta, rng_cd);
    rec.aux_loss = aux->value(theta, phi);
    rec.prim_loss = prim->value(theta, phi);
    HypergradReport hg = implicit_grad_phi(*prim, *aux, theta, phi, cfg.ihvp, cfg.eps0);
    rec.hypergrad_norm = hg.total.norm();
    rec.explicit_norm = hg.explicit_term.norm();
    rec.implicit_norm = hg.implicit_term.norm();
    rec.ihvp_residual = hg.ihvp_residual;
    rec.inner_grad_norm = hg.inner_grad_norm;
    if (cfg.momentum != 0.0) {
      vel_phi *= cfg.momentum;
      vel_phi += hg.total;
      axpy(phi.values(), -cfg.eta_outer, vel_phi.span());
    } else {
      axpy(phi.values(), -cfg.eta_outer, hg.total.span());
    }
    rec.phi_updates = 1;
    if (!phi.all_finite()) throw NumericError("outer step: non-finite phi after update");
  });
}

TrainResult train_mbce(const Task& task, const TrainConfig& cfg, const TrainHooks& hooks) {
  return run_regime(task, cfg, hooks,
                    [&](int, ParamVector& theta, ParamVector& phi, Vector& vel_theta, Vector&,
                        BatchCycler& batches, Rng&, MetricsRecord& rec) {
    auto batch = batches.next();
    auto aux = task.aux_loss(std::move(batch), 0.0);
    inner_loop(theta, phi, *aux, cfg.t_inner, cfg.eta_inner, cfg.momentum, &vel_theta,
               &rec.theta_updates);
    rec.aux_loss = aux->value(theta, phi);
  });
}

TrainResult train_alternating(const Task& task, const TrainConfig& cfg, const TrainHooks& hooks) {
  return run_regime(task, cfg, hooks,
                    [&](int, ParamVector& theta, ParamVector& phi, Vector& vel_theta, Vector&,
                        BatchCycler& batches, Rng& rng_cd, MetricsRecord& rec) {
    auto batch = batches.next();
    auto aux = task.aux_loss(batch, cfg.lambda);
    // single-step alternation: one theta step, then one biased phi step
    inner_loop(theta, phi, *aux, 1, cfg.eta_inner, cfg.momentum, &vel_theta, &rec.theta_updates);
    auto prim = task.primary_loss(std::move(batch), cfg, theta, rng_cd);
    rec.aux_loss = aux->value(theta, phi);
    rec.prim_loss = prim->value(theta, phi);
    Vector g = biased_grad_phi(*prim, theta, phi);
    rec.hypergrad_norm = g.norm();
    rec.explicit_norm = g.norm();
    axpy(phi.values(), -cfg.eta_outer, g.span());
    rec.phi_updates = 1;
    if (!phi.all_finite()) throw NumericError("alternating step: non-finite phi after update");
  });
}

}  // namespace strucgrad
