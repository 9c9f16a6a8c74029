#include <cmath>

#include "core/error.hpp"
#include "core/models.hpp"
#include "core/rng.hpp"
#include "doctest.h"

using namespace strucgrad;

namespace {

MlcExample dense_example(std::initializer_list<double> x, std::initializer_list<int> labels,
                         int label_count) {
  MlcExample ex;
  int i = 0;
  for (double v : x) ex.features.emplace_back(i++, v);
  ex.labels.assign(label_count, 0);
  for (int l : labels) ex.labels[l] = 1;
  return ex;
}

// Test-side re-evaluation of the sequence feature net straight from the raw
// segments: window embeddings -> tanh MLP, independent of SeqModel internals.
Vector oracle_seq_feature(const SeqModel& model, const ParamVector& phi, const SeqExample& ex,
                          int t) {
  const SeqArch& a = model.arch();
  auto emb = phi.seg("en.emb");
  Vector win(3 * a.embed_dim, 0.0);
  for (int k = -1; k <= 1; ++k) {
    int pos = t + k;
    if (pos < 0 || pos >= static_cast<int>(ex.tokens.size())) continue;
    for (int j = 0; j < a.embed_dim; ++j)
      win[(k + 1) * a.embed_dim + j] = emb[ex.tokens[pos] * a.embed_dim + j];
  }
  Vector act = win;
  std::size_t nlayers = a.feature_hidden.size() + 1;
  std::vector<std::size_t> widths{static_cast<std::size_t>(3 * a.embed_dim)};
  widths.insert(widths.end(), a.feature_hidden.begin(), a.feature_hidden.end());
  widths.push_back(static_cast<std::size_t>(a.feature_out));
  for (std::size_t l = 0; l < nlayers; ++l) {
    auto w = phi.seg("feat.w" + std::to_string(l));
    auto b = phi.seg("feat.b" + std::to_string(l));
    Vector z(widths[l + 1]);
    for (std::size_t r = 0; r < widths[l + 1]; ++r) {
      double s = b[r];
      for (std::size_t c = 0; c < widths[l]; ++c) s += w[r * widths[l] + c] * act[c];
      z[r] = l + 1 < nlayers ? std::tanh(s) : s;
    }
    act = z;
  }
  return act;
}

}  // namespace

TEST_CASE("mlc inference at zero parameters is 0.5 everywhere") {
  MlcModel model({.feature_dim = 3, .label_count = 4, .infer_hidden = {2}});
  ParamVector theta = model.make_theta();
  MlcExample ex = dense_example({0.5, -1.0, 2.0}, {0}, 4);
  Vector yhat = model.infer_forward(theta, ex);
  REQUIRE(yhat.size() == 4);
  for (std::size_t j = 0; j < 4; ++j) CHECK(yhat[j] == doctest::Approx(0.5));
}

TEST_CASE("mlc single linear unit reproduces the sigmoid") {
  MlcModel model({.feature_dim = 1, .label_count = 1, .infer_hidden = {}});
  ParamVector theta = model.make_theta();
  theta.seg("inf.w0")[0] = 2.0;
  MlcExample ex = dense_example({1.0}, {}, 1);
  Vector yhat = model.infer_forward(theta, ex);
  CHECK(yhat[0] == doctest::Approx(0.8807970779778823).epsilon(1e-12));
}

TEST_CASE("mlc inference outputs stay inside (0,1)") {
  MlcModel model({.feature_dim = 1, .label_count = 2, .infer_hidden = {}});
  ParamVector theta = model.make_theta();
  auto w = theta.seg("inf.w0");
  w[0] = 500.0;
  w[1] = -500.0;
  Vector yhat = model.infer_forward(theta, dense_example({1.0}, {}, 2));
  CHECK(yhat[0] == doctest::Approx(1.0 - 1e-7));
  CHECK(yhat[1] == doctest::Approx(1e-7));
}

TEST_CASE("mlc energy closed-form values") {
  SUBCASE("all parameters zero") {
    MlcModel model({.feature_dim = 2, .label_count = 2, .feature_hidden = {3},
                    .feature_out = 2, .energy_hidden = 2});
    ParamVector phi = model.make_phi();
    Vector yhat{0.3, 0.9};
    CHECK(model.energy(phi, dense_example({1.0, -2.0}, {}, 2), yhat) == doctest::Approx(0.0));
  }
  SUBCASE("identity passthrough feature net") {
    MlcModel model({.feature_dim = 2, .label_count = 2, .feature_hidden = {},
                    .feature_out = 2, .energy_hidden = 2});
    ParamVector phi = model.make_phi();
    auto w0 = phi.seg("feat.w0");  // 2x2 identity
    w0[0] = 1.0;
    w0[3] = 1.0;
    auto w = phi.seg("en.W");  // identity
    w[0] = 1.0;
    w[3] = 1.0;
    Vector yhat{1.0, 0.0};
    CHECK(model.energy(phi, dense_example({2.0, 3.0}, {}, 2), yhat) == doctest::Approx(2.0));
  }
  SUBCASE("global term alone") {
    MlcModel model({.feature_dim = 1, .label_count = 2, .feature_hidden = {},
                    .feature_out = 1, .energy_hidden = 1});
    ParamVector phi = model.make_phi();
    auto m = phi.seg("en.M");
    m[0] = 1.0;
    m[1] = 1.0;
    phi.seg("en.v")[0] = 1.0;
    Vector yhat{1.0, 1.0};
    CHECK(model.energy(phi, dense_example({0.7}, {}, 2), yhat) ==
          doctest::Approx(0.8807970779778823).epsilon(1e-12));
  }
}

TEST_CASE("mlc energy label gradient matches finite differences") {
  MlcModel model({.feature_dim = 3, .label_count = 4, .infer_hidden = {4}, .feature_hidden = {5},
                  .feature_out = 3, .energy_hidden = 4});
  ParamVector phi = model.make_phi();
  Rng rng(21);
  model.init_phi(phi, rng);
  MlcExample ex = dense_example({0.4, -0.9, 1.3}, {1}, 4);
  Vector yhat{0.2, 0.7, 0.5, 0.9};
  Vector an = model.energy_grad_y(phi, ex, yhat);
  for (std::size_t j = 0; j < 4; ++j) {
    double h = 1e-6;
    Vector up = yhat, dn = yhat;
    up[j] += h;
    dn[j] -= h;
    double fd = (model.energy(phi, ex, up) - model.energy(phi, ex, dn)) / (2 * h);
    CHECK(an[j] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("sequence inference at zero parameters is uniform") {
  SeqModel model({.vocab = 5, .tag_count = 4, .embed_dim = 3, .feature_hidden = {4},
                  .feature_out = 3, .infer_embed_dim = 3, .infer_hidden = {4}});
  ParamVector theta = model.make_theta();
  SeqExample ex{{1, 2, 3}, {0, 1, 2}};
  Matrix probs = model.infer_forward(theta, ex);
  REQUIRE(probs.rows() == 3);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 4; ++j) CHECK(probs(t, j) == doctest::Approx(0.25));
}

TEST_CASE("sequence energy closed-form values") {
  SeqModel model({.vocab = 4, .tag_count = 2, .embed_dim = 2, .feature_hidden = {},
                  .feature_out = 2, .infer_embed_dim = 2, .infer_hidden = {}});
  ParamVector phi = model.make_phi();
  SUBCASE("all parameters zero") {
    SeqExample ex{{0, 1}, {0, 1}};
    Matrix yhat = SeqModel::one_hot(ex.tags, 2);
    CHECK(model.energy(phi, ex, yhat) == doctest::Approx(0.0));
  }
  SUBCASE("single transition term") {
    SeqExample ex{{0, 1}, {0, 1}};
    auto tr = phi.seg("en.T");
    tr[1] = 1.0;  // row 0, col 1
    Matrix yhat = SeqModel::one_hot({0, 1}, 2);
    CHECK(model.energy(phi, ex, yhat) == doctest::Approx(1.0));
  }
  SUBCASE("length-one sequence has unary energy only") {
    SeqExample ex{{2}, {1}};
    Rng rng(5);
    model.init_phi(phi, rng);
    Matrix yhat = SeqModel::one_hot({1}, 2);
    double e = model.energy(phi, ex, yhat);
    Vector b = oracle_seq_feature(model, phi, ex, 0);
    auto u = phi.seg("en.U");
    double expect = 0.0;
    for (int c = 0; c < 2; ++c) expect += u[1 * 2 + c] * b[c];
    CHECK(e == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("empty sequence is an error") {
    SeqExample ex{{}, {}};
    Matrix yhat(0, 2);
    CHECK_THROWS_AS((void)model.energy(phi, ex, yhat), ShapeError);
  }
}

TEST_CASE("sequence energy equals the direct CRF path-sum oracle") {
  Rng rng(33);
  for (int trial = 0; trial < 8; ++trial) {
    int L = 2 + rng.uniform_int(3);  // 2..4
    int T = 1 + rng.uniform_int(5);  // 1..5
    SeqModel model({.vocab = 6, .tag_count = L, .embed_dim = 2, .feature_hidden = {3},
                    .feature_out = 3, .infer_embed_dim = 2, .infer_hidden = {3}});
    ParamVector phi = model.make_phi();
    model.init_phi(phi, rng);
    SeqExample ex;
    for (int t = 0; t < T; ++t) {
      ex.tokens.push_back(rng.uniform_int(6));
      ex.tags.push_back(rng.uniform_int(L));
    }
    Matrix yhat = SeqModel::one_hot(ex.tags, L);
    double e = model.energy(phi, ex, yhat);

    double oracle = 0.0;
    auto u = phi.seg("en.U");
    auto tr = phi.seg("en.T");
    for (int t = 0; t < T; ++t) {
      Vector b = oracle_seq_feature(model, phi, ex, t);
      for (int c = 0; c < model.arch().feature_out; ++c)
        oracle += u[ex.tags[t] * model.arch().feature_out + c] * b[c];
    }
    for (int t = 1; t < T; ++t) oracle += tr[ex.tags[t - 1] * L + ex.tags[t]];
    CHECK(e == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("sequence energy label gradient matches finite differences") {
  SeqModel model({.vocab = 5, .tag_count = 3, .embed_dim = 2, .feature_hidden = {4},
                  .feature_out = 3, .infer_embed_dim = 2, .infer_hidden = {4}});
  ParamVector phi = model.make_phi();
  Rng rng(9);
  model.init_phi(phi, rng);
  SeqExample ex{{1, 4, 2}, {0, 2, 1}};
  Matrix yhat(3, 3);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 3; ++j) yhat(t, j) = rng.uniform(0.05, 0.9);
  }
  Matrix an = model.energy_grad_y(phi, ex, yhat);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      double h = 1e-6;
      Matrix up = yhat, dn = yhat;
      up(t, j) += h;
      dn(t, j) -= h;
      double fd = (model.energy(phi, ex, up) - model.energy(phi, ex, dn)) / (2 * h);
      CHECK(an(t, j) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("dimension mismatches fail loudly") {
  MlcModel model({.feature_dim = 3, .label_count = 2});
  ParamVector theta = model.make_theta();
  MlcExample bad = dense_example({1.0, 2.0, 3.0, 4.0}, {}, 2);
  CHECK_THROWS_AS((void)model.infer_forward(theta, bad), ShapeError);
  ParamVector phi = model.make_phi();
  CHECK_THROWS_AS((void)model.energy(phi, dense_example({1.0, 1.0, 1.0}, {}, 2), Vector{0.5}),
                  ShapeError);
}
