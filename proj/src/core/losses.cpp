#include "core/losses.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace strucgrad {

double mbce(std::span<const std::uint8_t> y, const Vector& yhat) {
  if (y.size() != yhat.size()) throw ShapeError("mbce: length mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    double p = clamp_prob(yhat[j]);
    loss += y[j] ? -std::log(p) : -std::log(1.0 - p);
  }
  return loss;
}

Vector mbce_grad_yhat(std::span<const std::uint8_t> y, const Vector& yhat) {
  if (y.size() != yhat.size()) throw ShapeError("mbce grad: length mismatch");
  Vector out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    double p = clamp_prob(yhat[j]);
    out[j] = y[j] ? -1.0 / p : 1.0 / (1.0 - p);
  }
  return out;
}

double seq_nll(const std::vector<int>& tags, const Matrix& probs) {
  if (tags.size() != probs.rows()) throw ShapeError("seq_nll: length mismatch");
  double loss = 0.0;
  for (std::size_t t = 0; t < tags.size(); ++t)
    loss += -std::log(clamp_prob(probs(t, tags[t])));
  return loss;
}

double f1_binary(std::span<const std::uint8_t> gold, std::span<const std::uint8_t> pred) {
  if (gold.size() != pred.size()) throw ShapeError("f1: length mismatch");
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t j = 0; j < gold.size(); ++j) {
    if (gold[j] && pred[j]) ++tp;
    else if (!gold[j] && pred[j]) ++fp;
    else if (gold[j] && !pred[j]) ++fn;
  }
  if (tp + fp + fn == 0) return 1.0;  // both supports empty
  return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

double mlc_cost(std::span<const std::uint8_t> gold, std::span<const std::uint8_t> pred) {
  return 1.0 - f1_binary(gold, pred);
}

double mlc_cost_soft(std::span<const std::uint8_t> gold, const Vector& yhat) {
  if (gold.size() != yhat.size()) throw ShapeError("soft cost: length mismatch");
  double inner = 0.0, sum = 0.0, gsum = 0.0;
  for (std::size_t j = 0; j < gold.size(); ++j) {
    inner += gold[j] * yhat[j];
    sum += yhat[j];
    gsum += gold[j];
  }
  double denom = sum + gsum;
  if (denom <= 0.0) return 0.0;  // both supports empty
  return 1.0 - 2.0 * inner / denom;
}

Vector mlc_cost_soft_grad(std::span<const std::uint8_t> gold, const Vector& yhat) {
  double inner = 0.0, sum = 0.0, gsum = 0.0;
  for (std::size_t j = 0; j < gold.size(); ++j) {
    inner += gold[j] * yhat[j];
    sum += yhat[j];
    gsum += gold[j];
  }
  double denom = sum + gsum;
  Vector out(yhat.size());
  if (denom <= 0.0) return out;
  for (std::size_t j = 0; j < gold.size(); ++j)
    out[j] = -2.0 * (gold[j] * denom - inner) / (denom * denom);
  return out;
}

double seq_cost(const std::vector<int>& gold, const std::vector<int>& pred) {
  if (gold.size() != pred.size()) throw ShapeError("seq cost: length mismatch");
  if (gold.empty()) throw ShapeError("empty sequence");
  int mism = 0;
  for (std::size_t t = 0; t < gold.size(); ++t) mism += gold[t] != pred[t];
  return static_cast<double>(mism) / static_cast<double>(gold.size());
}

double seq_cost_soft(const std::vector<int>& gold, const Matrix& yhat) {
  if (gold.size() != yhat.rows()) throw ShapeError("seq soft cost: length mismatch");
  double acc = 0.0;
  for (std::size_t t = 0; t < gold.size(); ++t) acc += yhat(t, gold[t]);
  return 1.0 - acc / static_cast<double>(gold.size());
}

Matrix seq_cost_soft_grad(const std::vector<int>& gold, const Matrix& yhat) {
  Matrix out(yhat.rows(), yhat.cols(), 0.0);
  double inv = 1.0 / static_cast<double>(gold.size());
  for (std::size_t t = 0; t < gold.size(); ++t) out(t, gold[t]) = -inv;
  return out;
}

double ssvm_core(double cost, double e_pred, double e_gold, double lambda_rank) {
  double h1 = cost - e_pred + e_gold;
  double h2 = -e_pred + e_gold;
  return std::max(h1, 0.0) + lambda_rank * std::max(h2, 0.0);
}

double cd_core(std::span<const double> terms, double e_gold) {
  if (terms.empty()) throw ShapeError("cd_core: need at least one term");
  double m = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double a : terms) s += std::exp(a - m);
  return m + std::log(s) + e_gold;
}

std::vector<double> cd_softmax(std::span<const double> terms) {
  double m = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  std::vector<double> out(terms.size());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    out[k] = std::exp(terms[k] - m);
    s += out[k];
  }
  for (double& p : out) p /= s;
  return out;
}

std::vector<std::vector<std::uint8_t>> sample_bernoulli(const Vector& yhat, int k, Rng& rng) {
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(k);
  for (int s = 0; s < k; ++s) {
    std::vector<std::uint8_t> y(yhat.size());
    for (std::size_t j = 0; j < yhat.size(); ++j) y[j] = rng.bernoulli(yhat[j]) ? 1 : 0;
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<std::vector<int>> sample_categorical(const Matrix& probs, int k, Rng& rng) {
  std::vector<std::vector<int>> out;
  out.reserve(k);
  for (int s = 0; s < k; ++s) {
    std::vector<int> tags(probs.rows());
    for (std::size_t t = 0; t < probs.rows(); ++t) {
      double u = rng.uniform();
      double acc = 0.0;
      int pick = static_cast<int>(probs.cols()) - 1;
      for (std::size_t j = 0; j < probs.cols(); ++j) {
        acc += probs(t, j);
        if (u < acc) {
          pick = static_cast<int>(j);
          break;
        }
      }
      tags[t] = pick;
    }
    out.push_back(std::move(tags));
  }
  return out;
}

std::vector<std::uint8_t> threshold_labels(const Vector& yhat) {
  std::vector<std::uint8_t> out(yhat.size());
  for (std::size_t j = 0; j < yhat.size(); ++j) out[j] = yhat[j] > 0.5 ? 1 : 0;
  return out;
}

MlcScores mlc_scores(const MlcDataset& ds, const std::vector<std::vector<std::uint8_t>>& preds) {
  if (ds.items.empty()) throw ConfigError("empty dataset");
  if (preds.size() != ds.items.size()) throw ShapeError("mlc_scores: prediction count mismatch");
  MlcScores out;
  long tp = 0, fp = 0, fn = 0;
  std::vector<long> ltp(ds.label_count, 0), lfp(ds.label_count, 0), lfn(ds.label_count, 0);
  double exf1 = 0.0;
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const auto& gold = ds.items[i].labels;
    const auto& pred = preds[i];
    exf1 += f1_binary(gold, pred);
    for (int j = 0; j < ds.label_count; ++j) {
      if (gold[j] && pred[j]) { ++tp; ++ltp[j]; }
      else if (!gold[j] && pred[j]) { ++fp; ++lfp[j]; }
      else if (gold[j] && !pred[j]) { ++fn; ++lfn[j]; }
    }
  }
  out.example_f1 = exf1 / static_cast<double>(ds.items.size());
  out.micro_f1 = (tp + fp + fn) == 0 ? 1.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  double mac = 0.0;
  for (int j = 0; j < ds.label_count; ++j) {
    long d = 2 * ltp[j] + lfp[j] + lfn[j];
    mac += d == 0 ? 1.0 : 2.0 * ltp[j] / static_cast<double>(d);
  }
  out.macro_f1 = mac / static_cast<double>(ds.label_count);
  return out;
}

double token_accuracy(const SeqDataset& ds, const std::vector<std::vector<int>>& preds) {
  if (ds.items.empty()) throw ConfigError("empty dataset");
  if (preds.size() != ds.items.size()) throw ShapeError("token_accuracy: prediction count mismatch");
  long correct = 0, total = 0;
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const auto& gold = ds.items[i].tags;
    if (gold.size() != preds[i].size()) throw ShapeError("token_accuracy: length mismatch");
    for (std::size_t t = 0; t < gold.size(); ++t) {
      correct += gold[t] == preds[i][t];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

// ---- MLC batch objectives ----

namespace {
Vector to_vector(std::span<const std::uint8_t> y) {
  Vector out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = y[j];
  return out;
}

void check_sizes(const char* who, const ParamVector& theta, const ParamVector& phi,
                 std::size_t ts, std::size_t ps) {
  if (theta.size() != ts || phi.size() != ps)
    throw ShapeError(std::string(who) + ": parameter layout mismatch");
}
}  // namespace

MlcAuxLoss::MlcAuxLoss(const MlcModel& model, const MlcDataset& data, std::vector<int> batch,
                       double lambda)
    : model_(model), data_(data), batch_(std::move(batch)), lambda_(lambda) {
  if (batch_.empty()) throw ShapeError("aux loss: empty batch");
  if (lambda_ < 0.0) throw ConfigError("aux loss: lambda must be >= 0");
  theta_size_ = model_.make_theta().size();
  phi_size_ = model_.make_phi().size();
}

double MlcAuxLoss::value(const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("aux", theta, phi, theta_size_, phi_size_);
  double loss = 0.0;
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    Vector yhat = model_.infer_forward(theta, ex);
    loss += mbce(ex.labels, yhat);
    if (lambda_ != 0.0) loss += lambda_ * model_.energy(phi, ex, yhat);
  }
  return loss / static_cast<double>(batch_.size());
}

Vector MlcAuxLoss::grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("aux", theta, phi, theta_size_, phi_size_);
  double inv = 1.0 / static_cast<double>(batch_.size());
  if (g == ParamGroup::Theta) {
    Vector out(theta_size_);
    for (int i : batch_) {
      const auto& ex = data_.items[i];
      MlcModel::InferTrace tr;
      Vector yhat = model_.infer_forward(theta, ex, &tr);
      Vector dyhat = mbce_grad_yhat(ex.labels, yhat);
      if (lambda_ != 0.0) {
        Vector de = model_.energy_grad_y(phi, ex, yhat);
        dyhat.axpy(lambda_, de);
      }
      dyhat *= inv;
      model_.infer_backward(theta, ex, tr, dyhat, out);
    }
    return out;
  }
  Vector out(phi_size_);
  if (lambda_ == 0.0) return out;
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    Vector yhat = model_.infer_forward(theta, ex);
    model_.energy_backward_phi(phi, ex, yhat, lambda_ * inv, out);
  }
  return out;
}

MlcSsvmPrim::MlcSsvmPrim(const MlcModel& model, const MlcDataset& data, std::vector<int> batch,
                         double lambda_rank)
    : model_(model), data_(data), batch_(std::move(batch)), lambda_rank_(lambda_rank) {
  if (batch_.empty()) throw ShapeError("ssvm loss: empty batch");
  if (lambda_rank_ < 0.0) throw ConfigError("ssvm loss: lambda_rank must be >= 0");
  theta_size_ = model_.make_theta().size();
  phi_size_ = model_.make_phi().size();
}

double MlcSsvmPrim::value(const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("ssvm", theta, phi, theta_size_, phi_size_);
  double loss = 0.0;
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    Vector yhat = model_.infer_forward(theta, ex);
    double cost = mlc_cost_soft(ex.labels, yhat);
    double e_pred = model_.energy(phi, ex, yhat);
    double e_gold = model_.energy(phi, ex, to_vector(ex.labels));
    loss += ssvm_core(cost, e_pred, e_gold, lambda_rank_);
  }
  return loss / static_cast<double>(batch_.size());
}

Vector MlcSsvmPrim::grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("ssvm", theta, phi, theta_size_, phi_size_);
  double inv = 1.0 / static_cast<double>(batch_.size());
  Vector out(g == ParamGroup::Theta ? theta_size_ : phi_size_);
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    MlcModel::InferTrace tr;
    Vector yhat = model_.infer_forward(theta, ex, &tr);
    Vector gold = to_vector(ex.labels);
    double cost = mlc_cost_soft(ex.labels, yhat);
    double e_pred = model_.energy(phi, ex, yhat);
    double e_gold = model_.energy(phi, ex, gold);
    bool margin_active = cost - e_pred + e_gold > 0.0;
    bool rank_active = lambda_rank_ > 0.0 && e_gold - e_pred > 0.0;
    double act = (margin_active ? 1.0 : 0.0) + (rank_active ? lambda_rank_ : 0.0);
    if (act == 0.0) continue;
    if (g == ParamGroup::Phi) {
      model_.energy_backward_phi(phi, ex, yhat, -act * inv, out);
      model_.energy_backward_phi(phi, ex, gold, act * inv, out);
    } else {
      Vector dyhat(yhat.size());
      if (margin_active) {
        dyhat = mlc_cost_soft_grad(ex.labels, yhat);
        dyhat -= model_.energy_grad_y(phi, ex, yhat);
      }
      if (rank_active) dyhat.axpy(-lambda_rank_, model_.energy_grad_y(phi, ex, yhat));
      dyhat *= inv;
      model_.infer_backward(theta, ex, tr, dyhat, out);
    }
  }
  return out;
}

MlcCdPrim::MlcCdPrim(const MlcModel& model, const MlcDataset& data, std::vector<int> batch, int k,
                     const ParamVector& theta_draw, Rng& rng)
    : model_(model), data_(data), batch_(std::move(batch)) {
  if (batch_.empty()) throw ShapeError("cd loss: empty batch");
  if (k < 1) throw ConfigError("need at least one negative sample");
  theta_size_ = model_.make_theta().size();
  phi_size_ = model_.make_phi().size();
  cands_.reserve(batch_.size());
  costs_.reserve(batch_.size());
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    Vector yhat = model_.infer_forward(theta_draw, ex);
    auto negs = sample_bernoulli(yhat, k, rng);
    std::vector<Vector> cand;
    std::vector<double> cost;
    cand.reserve(k + 1);
    cost.reserve(k + 1);
    cand.push_back(to_vector(ex.labels));
    cost.push_back(0.0);
    for (const auto& n : negs) {
      cand.push_back(to_vector(n));
      cost.push_back(mlc_cost(ex.labels, n));
    }
    cands_.push_back(std::move(cand));
    costs_.push_back(std::move(cost));
  }
}

double MlcCdPrim::value(const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("cd", theta, phi, theta_size_, phi_size_);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch_.size(); ++b) {
    const auto& ex = data_.items[batch_[b]];
    std::vector<double> terms(cands_[b].size());
    for (std::size_t c = 0; c < cands_[b].size(); ++c)
      terms[c] = -model_.energy(phi, ex, cands_[b][c]) + costs_[b][c];
    loss += cd_core(terms, model_.energy(phi, ex, cands_[b][0]));
  }
  return loss / static_cast<double>(batch_.size());
}

Vector MlcCdPrim::grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("cd", theta, phi, theta_size_, phi_size_);
  if (g == ParamGroup::Theta) return Vector(theta_size_);  // candidates are frozen
  Vector out(phi_size_);
  double inv = 1.0 / static_cast<double>(batch_.size());
  for (std::size_t b = 0; b < batch_.size(); ++b) {
    const auto& ex = data_.items[batch_[b]];
    std::vector<double> terms(cands_[b].size());
    for (std::size_t c = 0; c < cands_[b].size(); ++c)
      terms[c] = -model_.energy(phi, ex, cands_[b][c]) + costs_[b][c];
    auto p = cd_softmax(terms);
    for (std::size_t c = 0; c < cands_[b].size(); ++c)
      model_.energy_backward_phi(phi, ex, cands_[b][c], -p[c] * inv, out);
    model_.energy_backward_phi(phi, ex, cands_[b][0], inv, out);
  }
  return out;
}

// ---- sequence batch objectives ----

SeqAuxLoss::SeqAuxLoss(const SeqModel& model, const SeqDataset& data, std::vector<int> batch,
                       double lambda)
    : model_(model), data_(data), batch_(std::move(batch)), lambda_(lambda) {
  if (batch_.empty()) throw ShapeError("aux loss: empty batch");
  if (lambda_ < 0.0) throw ConfigError("aux loss: lambda must be >= 0");
  theta_size_ = model_.make_theta().size();
  phi_size_ = model_.make_phi().size();
}

double SeqAuxLoss::value(const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("aux", theta, phi, theta_size_, phi_size_);
  double loss = 0.0;
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    Matrix probs = model_.infer_forward(theta, ex);
    loss += seq_nll(ex.tags, probs);
    if (lambda_ != 0.0) loss += lambda_ * model_.energy(phi, ex, probs);
  }
  return loss / static_cast<double>(batch_.size());
}

Vector SeqAuxLoss::grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("aux", theta, phi, theta_size_, phi_size_);
  double inv = 1.0 / static_cast<double>(batch_.size());
  if (g == ParamGroup::Theta) {
    Vector out(theta_size_);
    for (int i : batch_) {
      const auto& ex = data_.items[i];
      SeqModel::InferTrace tr;
      Matrix probs = model_.infer_forward(theta, ex, &tr);
      Matrix dprobs(probs.rows(), probs.cols(), 0.0);
      for (std::size_t t = 0; t < probs.rows(); ++t)
        dprobs(t, ex.tags[t]) = -1.0 / clamp_prob(probs(t, ex.tags[t]));
      if (lambda_ != 0.0) {
        Matrix de = model_.energy_grad_y(phi, ex, probs);
        de *= lambda_;
        dprobs += de;
      }
      dprobs *= inv;
      model_.infer_backward(theta, ex, tr, dprobs, out);
    }
    return out;
  }
  Vector out(phi_size_);
  if (lambda_ == 0.0) return out;
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    Matrix probs = model_.infer_forward(theta, ex);
    model_.energy_backward_phi(phi, ex, probs, lambda_ * inv, out);
  }
  return out;
}

SeqSsvmPrim::SeqSsvmPrim(const SeqModel& model, const SeqDataset& data, std::vector<int> batch,
                         double lambda_rank)
    : model_(model), data_(data), batch_(std::move(batch)), lambda_rank_(lambda_rank) {
  if (batch_.empty()) throw ShapeError("ssvm loss: empty batch");
  theta_size_ = model_.make_theta().size();
  phi_size_ = model_.make_phi().size();
}

double SeqSsvmPrim::value(const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("ssvm", theta, phi, theta_size_, phi_size_);
  double loss = 0.0;
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    Matrix yhat = model_.infer_forward(theta, ex);
    Matrix gold = SeqModel::one_hot(ex.tags, model_.arch().tag_count);
    double cost = seq_cost_soft(ex.tags, yhat);
    loss += ssvm_core(cost, model_.energy(phi, ex, yhat), model_.energy(phi, ex, gold),
                      lambda_rank_);
  }
  return loss / static_cast<double>(batch_.size());
}

Vector SeqSsvmPrim::grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("ssvm", theta, phi, theta_size_, phi_size_);
  double inv = 1.0 / static_cast<double>(batch_.size());
  Vector out(g == ParamGroup::Theta ? theta_size_ : phi_size_);
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    SeqModel::InferTrace tr;
    Matrix yhat = model_.infer_forward(theta, ex, &tr);
    Matrix gold = SeqModel::one_hot(ex.tags, model_.arch().tag_count);
    double cost = seq_cost_soft(ex.tags, yhat);
    double e_pred = model_.energy(phi, ex, yhat);
    double e_gold = model_.energy(phi, ex, gold);
    bool margin_active = cost - e_pred + e_gold > 0.0;
    bool rank_active = lambda_rank_ > 0.0 && e_gold - e_pred > 0.0;
    double act = (margin_active ? 1.0 : 0.0) + (rank_active ? lambda_rank_ : 0.0);
    if (act == 0.0) continue;
    if (g == ParamGroup::Phi) {
      model_.energy_backward_phi(phi, ex, yhat, -act * inv, out);
      model_.energy_backward_phi(phi, ex, gold, act * inv, out);
    } else {
      Matrix dyhat(yhat.rows(), yhat.cols(), 0.0);
      if (margin_active) {
        dyhat = seq_cost_soft_grad(ex.tags, yhat);
        Matrix de = model_.energy_grad_y(phi, ex, yhat);
        de *= -1.0;
        dyhat += de;
      }
      if (rank_active) {
        Matrix de = model_.energy_grad_y(phi, ex, yhat);
        de *= -lambda_rank_;
        dyhat += de;
      }
      dyhat *= inv;
      model_.infer_backward(theta, ex, tr, dyhat, out);
    }
  }
  return out;
}

SeqCdPrim::SeqCdPrim(const SeqModel& model, const SeqDataset& data, std::vector<int> batch, int k,
                     const ParamVector& theta_draw, Rng& rng)
    : model_(model), data_(data), batch_(std::move(batch)) {
  if (batch_.empty()) throw ShapeError("cd loss: empty batch");
  if (k < 1) throw ConfigError("need at least one negative sample");
  theta_size_ = model_.make_theta().size();
  phi_size_ = model_.make_phi().size();
  int L = model_.arch().tag_count;
  for (int i : batch_) {
    const auto& ex = data_.items[i];
    Matrix probs = model_.infer_forward(theta_draw, ex);
    auto negs = sample_categorical(probs, k, rng);
    std::vector<Matrix> cand;
    std::vector<double> cost;
    cand.push_back(SeqModel::one_hot(ex.tags, L));
    cost.push_back(0.0);
    for (const auto& n : negs) {
      cand.push_back(SeqModel::one_hot(n, L));
      cost.push_back(seq_cost(ex.tags, n));
    }
    cands_.push_back(std::move(cand));
    costs_.push_back(std::move(cost));
  }
}

double SeqCdPrim::value(const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("cd", theta, phi, theta_size_, phi_size_);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch_.size(); ++b) {
    const auto& ex = data_.items[batch_[b]];
    std::vector<double> terms(cands_[b].size());
    for (std::size_t c = 0; c < cands_[b].size(); ++c)
      terms[c] = -model_.energy(phi, ex, cands_[b][c]) + costs_[b][c];
    loss += cd_core(terms, model_.energy(phi, ex, cands_[b][0]));
  }
  return loss / static_cast<double>(batch_.size());
}

Vector SeqCdPrim::grad(ParamGroup g, const ParamVector& theta, const ParamVector& phi) const {
  check_sizes("cd", theta, phi, theta_size_, phi_size_);
  if (g == ParamGroup::Theta) return Vector(theta_size_);
  Vector out(phi_size_);
  double inv = 1.0 / static_cast<double>(batch_.size());
  for (std::size_t b = 0; b < batch_.size(); ++b) {
    const auto& ex = data_.items[batch_[b]];
    std::vector<double> terms(cands_[b].size());
    for (std::size_t c = 0; c < cands_[b].size(); ++c)
      terms[c] = -model_.energy(phi, ex, cands_[b][c]) + costs_[b][c];
    auto p = cd_softmax(terms);
    for (std::size_t c = 0; c < cands_[b].size(); ++c)
      model_.energy_backward_phi(phi, ex, cands_[b][c], -p[c] * inv, out);
    model_.energy_backward_phi(phi, ex, cands_[b][0], inv, out);
  }
  return out;
}

}  // namespace strucgrad
