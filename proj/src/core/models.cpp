#include "core/models.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace strucgrad {

double clamp_prob(double p) {
  return std::min(1.0 - kProbFloor, std::max(kProbFloor, p));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void softmax_inplace(std::span<double> row) {
  double m = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double& x : row) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : row) x /= sum;
}

void softmax_backward(std::span<const double> p, std::span<const double> dp,
                      std::span<double> dlogits) {
  double inner = dot(p, dp);
  for (std::size_t i = 0; i < p.size(); ++i) dlogits[i] = p[i] * (dp[i] - inner);
}

namespace {

void glorot_matrix(ParamVector& p, std::string_view name, Rng& rng) {
  const SegmentSpec& s = p.seg_spec(name);
  double r = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
  for (double& x : p.seg(name)) x = rng.uniform(-r, r);
}

}  // namespace

MlcModel::MlcModel(MlcArch arch) : arch_(std::move(arch)) {
  if (arch_.feature_dim <= 0 || arch_.label_count <= 0)
    throw ShapeError("mlc model needs positive feature_dim and label_count");
  std::vector<std::size_t> iw{static_cast<std::size_t>(arch_.feature_dim)};
  iw.insert(iw.end(), arch_.infer_hidden.begin(), arch_.infer_hidden.end());
  iw.push_back(static_cast<std::size_t>(arch_.label_count));
  infer_ = Mlp("inf", iw);
  std::vector<std::size_t> fw{static_cast<std::size_t>(arch_.feature_dim)};
  fw.insert(fw.end(), arch_.feature_hidden.begin(), arch_.feature_hidden.end());
  fw.push_back(static_cast<std::size_t>(arch_.feature_out));
  feat_ = Mlp("feat", fw);
}

ParamVector MlcModel::make_theta() const {
  std::vector<SegmentSpec> segs;
  infer_.append_segments(segs);
  return ParamVector(segs);
}

ParamVector MlcModel::make_phi() const {
  std::vector<SegmentSpec> segs;
  feat_.append_segments(segs);
  segs.push_back({"en.W", static_cast<std::size_t>(arch_.label_count),
                  static_cast<std::size_t>(arch_.feature_out)});
  segs.push_back({"en.M", static_cast<std::size_t>(arch_.energy_hidden),
                  static_cast<std::size_t>(arch_.label_count)});
  segs.push_back({"en.v", static_cast<std::size_t>(arch_.energy_hidden), 1});
  return ParamVector(segs);
}

void MlcModel::init_theta(ParamVector& theta, Rng& rng) const { infer_.init(theta, rng); }

void MlcModel::init_phi(ParamVector& phi, Rng& rng) const {
  feat_.init(phi, rng);
  glorot_matrix(phi, "en.W", rng);
  glorot_matrix(phi, "en.M", rng);
  glorot_matrix(phi, "en.v", rng);
}

Vector MlcModel::infer_forward(const ParamVector& theta, const MlcExample& x,
                               InferTrace* trace) const {
  Vector logits = infer_.forward(theta, x.features, trace ? &trace->mlp : nullptr);
  Vector probs(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = clamp_prob(sigmoid(logits[i]));
  if (trace) trace->probs = probs;
  return probs;
}

void MlcModel::infer_backward(const ParamVector& theta, const MlcExample& x,
                              const InferTrace& trace, const Vector& dyhat, Vector& grad) const {
  const Vector& p = trace.probs;
  if (dyhat.size() != p.size()) throw ShapeError("infer_backward: dyhat length mismatch");
  Vector dlogits(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) dlogits[i] = dyhat[i] * p[i] * (1.0 - p[i]);
  infer_.backward(theta, trace.mlp, x.features, dlogits, grad);
}

double MlcModel::energy(const ParamVector& phi, const MlcExample& x, const Vector& yhat) const {
  if (yhat.size() != static_cast<std::size_t>(arch_.label_count))
    throw ShapeError("mlc energy: label vector length mismatch");
  Vector b = feat_.forward(phi, x.features);
  Vector u(arch_.label_count);
  matvec(phi.seg("en.W"), arch_.label_count, arch_.feature_out, b.span(), u.span());
  double e = yhat.dot(u);
  Vector z(arch_.energy_hidden);
  matvec(phi.seg("en.M"), arch_.energy_hidden, arch_.label_count, yhat.span(), z.span());
  auto v = phi.seg("en.v");
  for (std::size_t i = 0; i < z.size(); ++i) e += v[i] * sigmoid(z[i]);
  return e;
}

void MlcModel::energy_backward_phi(const ParamVector& phi, const MlcExample& x,
                                   const Vector& yhat, double scale, Vector& grad) const {
  if (grad.size() != phi.size()) throw ShapeError("energy_backward_phi: grad length mismatch");
  Mlp::Trace tr;
  Vector b = feat_.forward(phi, x.features, &tr);
  // dE/dW = yhat b^T
  add_outer({grad.data() + phi.seg_offset("en.W"),
             static_cast<std::size_t>(arch_.label_count * arch_.feature_out)},
            yhat.span(), b.span(), scale);
  // global term
  Vector z(arch_.energy_hidden);
  matvec(phi.seg("en.M"), arch_.energy_hidden, arch_.label_count, yhat.span(), z.span());
  auto v = phi.seg("en.v");
  Vector s(arch_.energy_hidden), vds(arch_.energy_hidden);
  for (std::size_t i = 0; i < z.size(); ++i) {
    s[i] = sigmoid(z[i]);
    vds[i] = v[i] * s[i] * (1.0 - s[i]);
  }
  axpy({grad.data() + phi.seg_offset("en.v"), static_cast<std::size_t>(arch_.energy_hidden)},
       scale, s.span());
  add_outer({grad.data() + phi.seg_offset("en.M"),
             static_cast<std::size_t>(arch_.energy_hidden * arch_.label_count)},
            vds.span(), yhat.span(), scale);
  // feature net: dE/db = W^T yhat
  Vector db(arch_.feature_out);
  tmatvec(phi.seg("en.W"), arch_.label_count, arch_.feature_out, yhat.span(), db.span());
  db *= scale;
  feat_.backward(phi, tr, x.features, db, grad);
}

Vector MlcModel::energy_grad_y(const ParamVector& phi, const MlcExample& x,
                               const Vector& yhat) const {
  Vector b = feat_.forward(phi, x.features);
  Vector out(arch_.label_count);
  matvec(phi.seg("en.W"), arch_.label_count, arch_.feature_out, b.span(), out.span());
  Vector z(arch_.energy_hidden);
  matvec(phi.seg("en.M"), arch_.energy_hidden, arch_.label_count, yhat.span(), z.span());
  auto v = phi.seg("en.v");
  Vector vds(arch_.energy_hidden);
  for (std::size_t i = 0; i < z.size(); ++i) {
    double s = sigmoid(z[i]);
    vds[i] = v[i] * s * (1.0 - s);
  }
  Vector mt(arch_.label_count);
  tmatvec(phi.seg("en.M"), arch_.energy_hidden, arch_.label_count, vds.span(), mt.span());
  out += mt;
  return out;
}

Matrix MlcModel::energy_label_hessian(const ParamVector& phi, const Vector& y) const {
  std::size_t L = arch_.label_count, h = arch_.energy_hidden;
  Vector z(h);
  matvec(phi.seg("en.M"), h, L, y.span(), z.span());
  auto v = phi.seg("en.v");
  Vector w(h);
  for (std::size_t i = 0; i < h; ++i) {
    double s = sigmoid(z[i]);
    w[i] = v[i] * s * (1.0 - s) * (1.0 - 2.0 * s);  // v * sigma''
  }
  auto m = phi.seg("en.M");
  Matrix out(L, L, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    const double* row = m.data() + i * L;
    for (std::size_t a = 0; a < L; ++a) {
      double wa = w[i] * row[a];
      if (wa == 0.0) continue;
      for (std::size_t b = 0; b < L; ++b) out(a, b) += wa * row[b];
    }
  }
  return out;
}

SeqModel::SeqModel(SeqArch arch) : arch_(std::move(arch)) {
  if (arch_.vocab <= 0 || arch_.tag_count <= 0)
    throw ShapeError("seq model needs positive vocab and tag_count");
  std::vector<std::size_t> iw{static_cast<std::size_t>(3 * arch_.infer_embed_dim)};
  iw.insert(iw.end(), arch_.infer_hidden.begin(), arch_.infer_hidden.end());
  iw.push_back(static_cast<std::size_t>(arch_.tag_count));
  infer_ = Mlp("inf", iw);
  std::vector<std::size_t> fw{static_cast<std::size_t>(3 * arch_.embed_dim)};
  fw.insert(fw.end(), arch_.feature_hidden.begin(), arch_.feature_hidden.end());
  fw.push_back(static_cast<std::size_t>(arch_.feature_out));
  feat_ = Mlp("feat", fw);
}

ParamVector SeqModel::make_theta() const {
  std::vector<SegmentSpec> segs;
  segs.push_back({"inf.emb", static_cast<std::size_t>(arch_.vocab),
                  static_cast<std::size_t>(arch_.infer_embed_dim)});
  infer_.append_segments(segs);
  return ParamVector(segs);
}

ParamVector SeqModel::make_phi() const {
  std::vector<SegmentSpec> segs;
  segs.push_back({"en.emb", static_cast<std::size_t>(arch_.vocab),
                  static_cast<std::size_t>(arch_.embed_dim)});
  feat_.append_segments(segs);
  segs.push_back({"en.U", static_cast<std::size_t>(arch_.tag_count),
                  static_cast<std::size_t>(arch_.feature_out)});
  segs.push_back({"en.T", static_cast<std::size_t>(arch_.tag_count),
                  static_cast<std::size_t>(arch_.tag_count)});
  return ParamVector(segs);
}

void SeqModel::init_theta(ParamVector& theta, Rng& rng) const {
  glorot_matrix(theta, "inf.emb", rng);
  infer_.init(theta, rng);
}

void SeqModel::init_phi(ParamVector& phi, Rng& rng) const {
  glorot_matrix(phi, "en.emb", rng);
  feat_.init(phi, rng);
  glorot_matrix(phi, "en.U", rng);
  glorot_matrix(phi, "en.T", rng);
}

Vector SeqModel::window_embed(const ParamVector& p, std::string_view emb_seg, const SeqExample& x,
                              std::size_t t, int dim) const {
  auto emb = p.seg(emb_seg);
  Vector win(3 * dim, 0.0);
  const long T = static_cast<long>(x.tokens.size());
  for (int k = -1; k <= 1; ++k) {
    long pos = static_cast<long>(t) + k;
    if (pos < 0 || pos >= T) continue;
    int tok = x.tokens[pos];
    if (tok < 0 || tok >= arch_.vocab)
      throw ShapeError("token id " + std::to_string(tok) + " outside vocab");
    std::copy_n(emb.data() + static_cast<std::size_t>(tok) * dim, dim,
                win.data() + (k + 1) * dim);
  }
  return win;
}

void SeqModel::scatter_window_grad(const ParamVector& p, std::string_view emb_seg,
                                   const SeqExample& x, std::size_t t, int dim, const Vector& dwin,
                                   Vector& grad) const {
  std::size_t off = p.seg_offset(emb_seg);
  const long T = static_cast<long>(x.tokens.size());
  for (int k = -1; k <= 1; ++k) {
    long pos = static_cast<long>(t) + k;
    if (pos < 0 || pos >= T) continue;
    std::size_t row = off + static_cast<std::size_t>(x.tokens[pos]) * dim;
    for (int j = 0; j < dim; ++j) grad[row + j] += dwin[(k + 1) * dim + j];
  }
}

std::vector<Vector> SeqModel::features(const ParamVector& phi, const SeqExample& x,
                                       std::vector<Mlp::Trace>* traces) const {
  std::size_t T = x.tokens.size();
  std::vector<Vector> out;
  out.reserve(T);
  if (traces) traces->resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    Vector win = window_embed(phi, "en.emb", x, t, arch_.embed_dim);
    out.push_back(feat_.forward(phi, win, traces ? &(*traces)[t] : nullptr));
  }
  return out;
}

Matrix SeqModel::infer_forward(const ParamVector& theta, const SeqExample& x,
                               InferTrace* trace) const {
  std::size_t T = x.tokens.size();
  if (T == 0) throw ShapeError("empty sequence");
  Matrix probs(T, arch_.tag_count);
  if (trace) trace->mlp.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    Vector win = window_embed(theta, "inf.emb", x, t, arch_.infer_embed_dim);
    Vector logits = infer_.forward(theta, win, trace ? &trace->mlp[t] : nullptr);
    std::copy(logits.data(), logits.data() + logits.size(), probs.row(t).begin());
    softmax_inplace(probs.row(t));
  }
  if (trace) trace->probs = probs;
  return probs;
}

void SeqModel::infer_backward(const ParamVector& theta, const SeqExample& x,
                              const InferTrace& trace, const Matrix& dprobs, Vector& grad) const {
  std::size_t T = x.tokens.size();
  if (dprobs.rows() != T || dprobs.cols() != static_cast<std::size_t>(arch_.tag_count))
    throw ShapeError("infer_backward: dprobs shape mismatch");
  for (std::size_t t = 0; t < T; ++t) {
    Vector dlogits(arch_.tag_count);
    softmax_backward(trace.probs.row(t), dprobs.row(t), dlogits.span());
    Mlp::Trace mlp_tr = trace.mlp[t];
    Vector dwin = infer_.backward(theta, mlp_tr, dlogits, grad);
    scatter_window_grad(theta, "inf.emb", x, t, arch_.infer_embed_dim, dwin, grad);
  }
}

double SeqModel::energy(const ParamVector& phi, const SeqExample& x, const Matrix& yhat) const {
  std::size_t T = x.tokens.size();
  if (T == 0) throw ShapeError("empty sequence");
  if (yhat.rows() != T || yhat.cols() != static_cast<std::size_t>(arch_.tag_count))
    throw ShapeError("seq energy: yhat shape mismatch");
  auto feats = features(phi, x, nullptr);
  double e = 0.0;
  Vector ub(arch_.tag_count);
  for (std::size_t t = 0; t < T; ++t) {
    matvec(phi.seg("en.U"), arch_.tag_count, arch_.feature_out, feats[t].span(), ub.span());
    e += dot(yhat.row(t), ub.span());
  }
  auto tr = phi.seg("en.T");
  for (std::size_t t = 1; t < T; ++t) {
    Vector ty(arch_.tag_count);
    matvec(tr, arch_.tag_count, arch_.tag_count, yhat.row(t), ty.span());
    e += dot(yhat.row(t - 1), ty.span());
  }
  return e;
}

void SeqModel::energy_backward_phi(const ParamVector& phi, const SeqExample& x,
                                   const Matrix& yhat, double scale, Vector& grad) const {
  std::size_t T = x.tokens.size();
  if (grad.size() != phi.size()) throw ShapeError("energy_backward_phi: grad length mismatch");
  std::vector<Mlp::Trace> traces;
  auto feats = features(phi, x, &traces);
  std::size_t off_u = phi.seg_offset("en.U");
  std::size_t off_t = phi.seg_offset("en.T");
  std::size_t L = arch_.tag_count, db = arch_.feature_out;
  for (std::size_t t = 0; t < T; ++t) {
    add_outer({grad.data() + off_u, L * db}, yhat.row(t), feats[t].span(), scale);
    // dE/db_t = U^T yhat_t
    Vector dbt(db);
    tmatvec(phi.seg("en.U"), L, db, yhat.row(t), dbt.span());
    dbt *= scale;
    Vector dwin = feat_.backward(phi, traces[t], dbt, grad);
    scatter_window_grad(phi, "en.emb", x, t, arch_.embed_dim, dwin, grad);
  }
  for (std::size_t t = 1; t < T; ++t)
    add_outer({grad.data() + off_t, L * L}, yhat.row(t - 1), yhat.row(t), scale);
}

Matrix SeqModel::energy_grad_y(const ParamVector& phi, const SeqExample& x,
                               const Matrix& yhat) const {
  std::size_t T = x.tokens.size();
  std::size_t L = arch_.tag_count;
  auto feats = features(phi, x, nullptr);
  Matrix out(T, L, 0.0);
  auto tr = phi.seg("en.T");
  for (std::size_t t = 0; t < T; ++t) {
    matvec(phi.seg("en.U"), L, arch_.feature_out, feats[t].span(), out.row(t));
    if (t >= 1) {
      Vector add(L);
      tmatvec(tr, L, L, yhat.row(t - 1), add.span());
      axpy(out.row(t), 1.0, add.span());
    }
    if (t + 1 < T) {
      Vector add(L);
      matvec(tr, L, L, yhat.row(t + 1), add.span());
      axpy(out.row(t), 1.0, add.span());
    }
  }
  return out;
}

Matrix SeqModel::one_hot(const std::vector<int>& tags, int tag_count) {
  Matrix out(tags.size(), tag_count, 0.0);
  for (std::size_t t = 0; t < tags.size(); ++t) {
    if (tags[t] < 0 || tags[t] >= tag_count) throw ShapeError("tag id outside tag set");
    out(t, tags[t]) = 1.0;
  }
  return out;
}

}  // namespace strucgrad
