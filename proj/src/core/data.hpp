#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace strucgrad {

// One multi-label instance: sparse features (strictly increasing indices)
// and a dense binary label vector.
struct MlcExample {
  std::vector<std::pair<int, double>> features;
  std::vector<std::uint8_t> labels;
};

struct MlcDataset {
  int feature_dim = 0;
  int label_count = 0;
  std::vector<MlcExample> items;
};

// One tagged sentence; token and tag ids index the dataset vocabularies.
struct SeqExample {
  std::vector<int> tokens;
  std::vector<int> tags;
};

struct SeqDataset {
  std::vector<std::string> vocab;  // vocab[0] is reserved for unknown tokens
  std::vector<std::string> tag_names;
  std::vector<SeqExample> items;
};

// Sparse multilabel text format: single header line "N d L", then one example
// per line as "lab,lab,... idx:val idx:val ...". Comment lines starting with
// '#' are skipped. Malformed content raises ConfigError with the line number.
MlcDataset load_mlc(const std::string& path);
void save_mlc(const MlcDataset& ds, const std::string& path);

// CoNLL-style column file: token in the first column, tag in the last,
// blank lines separate sentences. The column count is fixed by the first row.
struct RawSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};
std::vector<RawSentence> parse_conll(const std::string& path);
// Builds vocab/tag maps in first-seen order; id 0 of the vocab is "<unk>".
SeqDataset load_conll(const std::string& path);
// Maps raw sentences onto existing vocabularies (unknown tokens -> 0,
// unknown tags -> ConfigError).
SeqDataset map_conll(const std::vector<RawSentence>& raw, const std::vector<std::string>& vocab,
                     const std::vector<std::string>& tag_names);

// Synthetic correlated-label generator. Labels are Gibbs-sampled from
// p(y|x) proportional to exp(y^T (W x) + y^T J y) with a planted symmetric
// zero-diagonal coupling J; x is standard normal.
struct SynthSpec {
  int label_count = 8;
  int feature_dim = 16;
  int n = 2000;
  int coupling_pairs = 3;      // number of planted label pairs in J
  double coupling = 2.0;       // J value per planted pair
  double feature_scale = 1.0;  // std of the per-label logit (W x)_i
  int gibbs_sweeps = 20;
  std::uint64_t seed = 1;
  void validate() const;
};
MlcDataset gen_synth(const SynthSpec& spec);
// The planted coupling matrix for a spec (paired-run analyses in tests).
Matrix synth_coupling(const SynthSpec& spec);

struct SplitIndices {
  std::vector<int> train, valid, test;
};
// Seed-deterministic shuffle split; fractions must be positive-or-zero and
// sum to at most 1.
SplitIndices split_indices(int n, double f_train, double f_valid, double f_test,
                           std::uint64_t seed);
MlcDataset subset(const MlcDataset& ds, std::span<const int> idx);
SeqDataset subset(const SeqDataset& ds, std::span<const int> idx);

// L x L joint label counts with the diagonal zeroed.
Matrix cooccurrence(const MlcDataset& ds);

}  // namespace strucgrad
