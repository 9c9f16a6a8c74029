#include "core/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace strucgrad {

namespace {

[[noreturn]] void line_fail(const std::string& path, std::size_t line_no, const std::string& what) {
  throw ConfigError(path + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

long parse_int(const std::string& s, bool* ok) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    *ok = pos == s.size();
    return v;
  } catch (...) {
    *ok = false;
    return 0;
  }
}

double parse_double(const std::string& s, bool* ok) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    *ok = pos == s.size();
    return v;
  } catch (...) {
    *ok = false;
    return 0.0;
  }
}

}  // namespace

MlcDataset load_mlc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  MlcDataset ds;
  std::string line;
  std::size_t line_no = 0;
  long declared_n = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind('#', 0) == 0) continue;
    auto toks = split_ws(line);
    if (declared_n < 0) {
      if (toks.size() != 3) line_fail(path, line_no, "header must be 'N d L'");
      bool ok0, ok1, ok2;
      declared_n = parse_int(toks[0], &ok0);
      long d = parse_int(toks[1], &ok1);
      long l = parse_int(toks[2], &ok2);
      if (!ok0 || !ok1 || !ok2 || declared_n < 0 || d <= 0 || l <= 0)
        line_fail(path, line_no, "header must be three non-negative integers 'N d L'");
      ds.feature_dim = static_cast<int>(d);
      ds.label_count = static_cast<int>(l);
      continue;
    }
    if (toks.empty()) line_fail(path, line_no, "blank example line");
    MlcExample ex;
    ex.labels.assign(ds.label_count, 0);
    std::size_t feat_start = 0;
    // A leading token without ':' is the comma-separated label list; a line
    // whose first token is already idx:val has an empty label field.
    if (!toks.empty() && toks[0].find(':') == std::string::npos) {
      feat_start = 1;
      const std::string& labfield = toks[0];
      std::size_t pos = 0;
      while (pos <= labfield.size() && !labfield.empty()) {
        std::size_t comma = labfield.find(',', pos);
        std::string item = labfield.substr(pos, comma == std::string::npos ? std::string::npos
                                                                           : comma - pos);
        bool ok;
        long lab = parse_int(item, &ok);
        if (!ok || lab < 0) line_fail(path, line_no, "bad label index '" + item + "'");
        if (lab >= ds.label_count)
          line_fail(path, line_no,
                    "label index " + std::to_string(lab) + " >= L=" + std::to_string(ds.label_count));
        if (ex.labels[lab]) line_fail(path, line_no, "duplicate label index " + std::to_string(lab));
        ex.labels[lab] = 1;
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }
    int last_idx = -1;
    for (std::size_t t = feat_start; t < toks.size(); ++t) {
      std::size_t colon = toks[t].find(':');
      if (colon == std::string::npos)
        line_fail(path, line_no, "feature token '" + toks[t] + "' is not idx:val");
      bool ok_i, ok_v;
      long idx = parse_int(toks[t].substr(0, colon), &ok_i);
      double val = parse_double(toks[t].substr(colon + 1), &ok_v);
      if (!ok_i || !ok_v || idx < 0)
        line_fail(path, line_no, "feature token '" + toks[t] + "' is not idx:val");
      if (idx >= ds.feature_dim)
        line_fail(path, line_no,
                  "feature index " + std::to_string(idx) + " >= d=" + std::to_string(ds.feature_dim));
      if (idx == last_idx) line_fail(path, line_no, "duplicate feature index " + std::to_string(idx));
      if (idx < last_idx) line_fail(path, line_no, "feature indices must be strictly increasing");
      last_idx = static_cast<int>(idx);
      ex.features.emplace_back(static_cast<int>(idx), val);
    }
    ds.items.push_back(std::move(ex));
  }
  if (declared_n < 0) throw ConfigError(path + ": empty file, expected 'N d L' header");
  if (static_cast<long>(ds.items.size()) != declared_n)
    throw ConfigError(path + ": header declares N=" + std::to_string(declared_n) + " but file has " +
                      std::to_string(ds.items.size()) + " examples");
  return ds;
}

void save_mlc(const MlcDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << ds.items.size() << ' ' << ds.feature_dim << ' ' << ds.label_count << '\n';
  char buf[64];
  for (const auto& ex : ds.items) {
    bool first = true;
    for (std::size_t j = 0; j < ex.labels.size(); ++j) {
      if (!ex.labels[j]) continue;
      if (!first) out << ',';
      out << j;
      first = false;
    }
    for (const auto& [idx, val] : ex.features) {
      std::snprintf(buf, sizeof buf, "%.17g", val);
      out << ' ' << idx << ':' << buf;
    }
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

std::vector<RawSentence> parse_conll(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::vector<RawSentence> out;
  RawSentence cur;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = split_ws(line);
    if (toks.empty()) {
      if (!cur.tokens.empty()) {
        out.push_back(std::move(cur));
        cur = {};
      }
      continue;
    }
    if (expected_cols == 0) {
      expected_cols = toks.size();
      if (expected_cols < 2) line_fail(path, line_no, "need at least token and tag columns");
    }
    if (toks.size() != expected_cols)
      line_fail(path, line_no,
                "expected " + std::to_string(expected_cols) + " columns, got " +
                    std::to_string(toks.size()));
    cur.tokens.push_back(toks.front());
    cur.tags.push_back(toks.back());
  }
  if (!cur.tokens.empty()) out.push_back(std::move(cur));
  if (out.empty()) throw ConfigError(path + ": no sentences");
  return out;
}

SeqDataset load_conll(const std::string& path) {
  auto raw = parse_conll(path);
  SeqDataset ds;
  ds.vocab.push_back("<unk>");
  std::unordered_map<std::string, int> vmap{{"<unk>", 0}}, tmap;
  for (const auto& s : raw) {
    SeqExample ex;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      auto [vit, vnew] = vmap.emplace(s.tokens[i], static_cast<int>(ds.vocab.size()));
      if (vnew) ds.vocab.push_back(s.tokens[i]);
      ex.tokens.push_back(vit->second);
      auto [tit, tnew] = tmap.emplace(s.tags[i], static_cast<int>(ds.tag_names.size()));
      if (tnew) ds.tag_names.push_back(s.tags[i]);
      ex.tags.push_back(tit->second);
    }
    ds.items.push_back(std::move(ex));
  }
  return ds;
}

SeqDataset map_conll(const std::vector<RawSentence>& raw, const std::vector<std::string>& vocab,
                     const std::vector<std::string>& tag_names) {
  SeqDataset ds;
  ds.vocab = vocab;
  ds.tag_names = tag_names;
  std::unordered_map<std::string, int> vmap, tmap;
  for (std::size_t i = 0; i < vocab.size(); ++i) vmap.emplace(vocab[i], static_cast<int>(i));
  for (std::size_t i = 0; i < tag_names.size(); ++i) tmap.emplace(tag_names[i], static_cast<int>(i));
  for (const auto& s : raw) {
    SeqExample ex;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      auto vit = vmap.find(s.tokens[i]);
      ex.tokens.push_back(vit == vmap.end() ? 0 : vit->second);
      auto tit = tmap.find(s.tags[i]);
      if (tit == tmap.end()) throw ConfigError("tag '" + s.tags[i] + "' not in the model's tag set");
      ex.tags.push_back(tit->second);
    }
    ds.items.push_back(std::move(ex));
  }
  return ds;
}

void SynthSpec::validate() const {
  if (label_count <= 0 || feature_dim <= 0 || n <= 0)
    throw ConfigError("synth spec needs positive L, d, N");
  if (coupling_pairs < 0 || gibbs_sweeps < 1)
    throw ConfigError("synth spec needs coupling_pairs >= 0 and gibbs_sweeps >= 1");
  long max_pairs = static_cast<long>(label_count) * (label_count - 1) / 2;
  if (coupling_pairs > max_pairs)
    throw ConfigError("synth spec: more coupling pairs than label pairs");
}

namespace {

// Structure stream: planted pairs first, then the feature-to-label weights.
void synth_structure(const SynthSpec& spec, Matrix& j, Matrix* w) {
  Rng rng(derive_seed(spec.seed, "synth-structure"));
  int placed = 0;
  while (placed < spec.coupling_pairs) {
    int a = rng.uniform_int(spec.label_count);
    int b = rng.uniform_int(spec.label_count);
    if (a == b || j(a, b) != 0.0) continue;
    j(a, b) = spec.coupling;
    j(b, a) = spec.coupling;
    ++placed;
  }
  if (!w) return;
  double wstd = spec.feature_scale / std::sqrt(static_cast<double>(spec.feature_dim));
  for (std::size_t i = 0; i < w->rows(); ++i)
    for (std::size_t k = 0; k < w->cols(); ++k) (*w)(i, k) = rng.normal() * wstd;
}

}  // namespace

Matrix synth_coupling(const SynthSpec& spec) {
  spec.validate();
  Matrix j(spec.label_count, spec.label_count, 0.0);
  synth_structure(spec, j, nullptr);
  return j;
}

MlcDataset gen_synth(const SynthSpec& spec) {
  spec.validate();
  Matrix j(spec.label_count, spec.label_count, 0.0);
  Matrix w(spec.label_count, spec.feature_dim);
  synth_structure(spec, j, &w);

  Rng rng(derive_seed(spec.seed, "synth-sample"));
  MlcDataset ds;
  ds.feature_dim = spec.feature_dim;
  ds.label_count = spec.label_count;
  ds.items.reserve(spec.n);
  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (int e = 0; e < spec.n; ++e) {
    MlcExample ex;
    Vector x(spec.feature_dim);
    for (int k = 0; k < spec.feature_dim; ++k) x[k] = rng.normal();
    Vector logit = w.matvec(x);
    std::vector<std::uint8_t> y(spec.label_count, 0);
    for (int i = 0; i < spec.label_count; ++i) y[i] = rng.bernoulli(sigmoid(logit[i])) ? 1 : 0;
    for (int sweep = 0; sweep < spec.gibbs_sweeps; ++sweep) {
      for (int i = 0; i < spec.label_count; ++i) {
        double field = logit[i];
        for (int k = 0; k < spec.label_count; ++k)
          if (y[k]) field += 2.0 * j(i, k);
        y[i] = rng.bernoulli(sigmoid(field)) ? 1 : 0;
      }
    }
    ex.features.reserve(spec.feature_dim);
    for (int k = 0; k < spec.feature_dim; ++k) ex.features.emplace_back(k, x[k]);
    ex.labels = std::move(y);
    ds.items.push_back(std::move(ex));
  }
  return ds;
}

SplitIndices split_indices(int n, double f_train, double f_valid, double f_test,
                           std::uint64_t seed) {
  if (f_train < 0 || f_valid < 0 || f_test < 0) throw ConfigError("split fractions must be >= 0");
  if (f_train + f_valid + f_test > 1.0 + 1e-12) throw ConfigError("split fractions sum > 1");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(idx);
  auto take = [&](double frac) { return static_cast<int>(std::floor(frac * n + 1e-9)); };
  int n_train = take(f_train), n_valid = take(f_valid), n_test = take(f_test);
  SplitIndices out;
  out.train.assign(idx.begin(), idx.begin() + n_train);
  out.valid.assign(idx.begin() + n_train, idx.begin() + n_train + n_valid);
  out.test.assign(idx.begin() + n_train + n_valid, idx.begin() + n_train + n_valid + n_test);
  return out;
}

MlcDataset subset(const MlcDataset& ds, std::span<const int> idx) {
  MlcDataset out;
  out.feature_dim = ds.feature_dim;
  out.label_count = ds.label_count;
  out.items.reserve(idx.size());
  for (int i : idx) out.items.push_back(ds.items.at(i));
  return out;
}

SeqDataset subset(const SeqDataset& ds, std::span<const int> idx) {
  SeqDataset out;
  out.vocab = ds.vocab;
  out.tag_names = ds.tag_names;
  out.items.reserve(idx.size());
  for (int i : idx) out.items.push_back(ds.items.at(i));
  return out;
}

Matrix cooccurrence(const MlcDataset& ds) {
  Matrix c(ds.label_count, ds.label_count, 0.0);
  for (const auto& ex : ds.items) {
    for (int a = 0; a < ds.label_count; ++a) {
      if (!ex.labels[a]) continue;
      for (int b = a + 1; b < ds.label_count; ++b) {
        if (!ex.labels[b]) continue;
        c(a, b) += 1.0;
        c(b, a) += 1.0;
      }
    }
  }
  return c;
}

}  // namespace strucgrad
