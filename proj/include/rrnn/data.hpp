#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rrnn/numeric.hpp"

namespace rrnn {

/// Fixed type-level word vectors. Unknown tokens map to the zero vector,
/// which makes them contribute nothing to the main-transition weight.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, std::map<std::string, Vec> vectors)
      : dim_(dim), vectors_(std::move(vectors)), unk_(dim, 0.0) {}

  int dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& token) const { return vectors_.count(token) > 0; }
  const Vec& lookup(const std::string& token) const {
    auto it = vectors_.find(token);
    return it == vectors_.end() ? unk_ : it->second;
  }
  const std::map<std::string, Vec>& vectors() const { return vectors_; }

 private:
  int dim_;
  std::map<std::string, Vec> vectors_;
  Vec unk_;
};

struct LabeledDoc {
  std::vector<std::string> tokens;
  int label = 1;  // +1 or -1
};

struct EmbeddedDoc {
  std::vector<Vec> tokens;
  int label = 1;
};

/// One record per line: token then dim space-separated decimals, UTF-8,
/// LF endings. Dimension is inferred from the first line and enforced.
EmbeddingTable load_embeddings(const std::string& path);
void save_embeddings(const EmbeddingTable& table, const std::string& path);

struct DatasetLoad {
  std::vector<LabeledDoc> docs;
  int dropped_short = 0;  // docs under min_tokens
};

/// "LABEL<TAB>text" per line, LABEL in {1,-1}, whitespace tokenization
/// with lowercasing. Documents shorter than min_tokens are dropped and
/// counted.
DatasetLoad load_dataset(const std::string& path, int min_tokens = 5);
void save_dataset(std::span<const LabeledDoc> docs, const std::string& path);

std::vector<std::string> tokenize(const std::string& text);

std::vector<EmbeddedDoc> embed_dataset(std::span<const LabeledDoc> docs, const EmbeddingTable& table);

/// Planted-pattern task: positives contain the pattern tokens in order
/// with at most max_gap fillers between consecutive ones, negatives are
/// rejection-sampled to exclude it (but do receive individual pattern
/// tokens as decoys, so unigram cues stay weak).
struct SynthConfig {
  int vocab_size = 50;
  int embedding_dim = 10;
  std::vector<std::string> pattern;  // 1..4 tokens from the vocab
  int max_gap = 1;
  int doc_len_min = 6;
  int doc_len_max = 12;
  int num_train = 500;
  int num_dev = 100;
  int num_test = 500;
  std::uint64_t rng_seed = 0;
};

struct SynthData {
  std::vector<LabeledDoc> train, dev, test;
  EmbeddingTable table;
};

SynthData synth_generate(const SynthConfig& config);

/// True iff tokens contain the pattern in order with every consecutive
/// gap at most max_gap. The generator rejects negatives with this; tests
/// keep their own scanner.
bool contains_pattern(std::span<const std::string> tokens, std::span<const std::string> pattern, int max_gap);

/// Writes train.tsv / dev.tsv / test.tsv / embeddings.txt under dir.
void write_synth(const SynthData& data, const std::string& dir);

}  // namespace rrnn
