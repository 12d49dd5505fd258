#include "rrnn/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rrnn {

namespace {

double parse_double(const std::string& field, const std::string& path, int line_no) {
  double value = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw std::runtime_error(path + ": unparseable float at line " + std::to_string(line_no));
  }
  return value;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (in >> field) fields.push_back(std::move(field));
  return fields;
}

}  // namespace

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  std::map<std::string, Vec> vectors;
  int dim = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_ws(line);
    if (fields.size() < 2) throw std::runtime_error(path + ": malformed record at line " + std::to_string(line_no));
    const int this_dim = static_cast<int>(fields.size()) - 1;
    if (dim < 0) dim = this_dim;
    if (this_dim != dim) {
      throw std::runtime_error(path + ": dimension mismatch at line " + std::to_string(line_no) + " (expected " +
                               std::to_string(dim) + ", got " + std::to_string(this_dim) + ")");
    }
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = parse_double(fields[i + 1], path, line_no);
    vectors[fields[0]] = std::move(v);
  }
  if (dim < 0) throw std::runtime_error(path + ": empty embedding file");
  return EmbeddingTable(dim, std::move(vectors));
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  for (const auto& [token, vec] : table.vectors()) {
    out << token;
    for (double v : vec) out << ' ' << double_to_string(v);
    out << '\n';
  }
}

std::vector<std::string> tokenize(const std::string& text) {
  std::string lowered = text;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return split_ws(lowered);
}

DatasetLoad load_dataset(const std::string& path, int min_tokens) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  DatasetLoad result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ": malformed line " + std::to_string(line_no) + " (no tab)");
    const std::string label_field = line.substr(0, tab);
    int label = 0;
    if (label_field == "1")
      label = 1;
    else if (label_field == "-1")
      label = -1;
    else
      throw std::runtime_error(path + ": malformed line " + std::to_string(line_no) + " (label must be 1 or -1)");
    LabeledDoc doc;
    doc.tokens = tokenize(line.substr(tab + 1));
    doc.label = label;
    if (static_cast<int>(doc.tokens.size()) < std::max(min_tokens, 1)) {
      ++result.dropped_short;
      continue;
    }
    result.docs.push_back(std::move(doc));
  }
  return result;
}

void save_dataset(std::span<const LabeledDoc> docs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& doc : docs) {
    out << doc.label << '\t';
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) out << (i ? " " : "") << doc.tokens[i];
    out << '\n';
  }
}

std::vector<EmbeddedDoc> embed_dataset(std::span<const LabeledDoc> docs, const EmbeddingTable& table) {
  std::vector<EmbeddedDoc> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    EmbeddedDoc e;
    e.label = doc.label;
    e.tokens.reserve(doc.tokens.size());
    for (const auto& token : doc.tokens) e.tokens.push_back(table.lookup(token));
    out.push_back(std::move(e));
  }
  return out;
}

bool contains_pattern(std::span<const std::string> tokens, std::span<const std::string> pattern, int max_gap) {
  if (pattern.empty()) return true;
  const int n = static_cast<int>(tokens.size());
  const int m = static_cast<int>(pattern.size());
  for (int start = 0; start < n; ++start) {
    if (tokens[start] != pattern[0]) continue;
    // earliest-next-match within the gap window is complete for existence
    int prev = start;
    int matched = 1;
    while (matched < m) {
      int next = -1;
      for (int t = prev + 1; t <= prev + 1 + max_gap && t < n; ++t) {
        if (tokens[t] == pattern[matched]) {
          next = t;
          break;
        }
      }
      if (next < 0) break;
      prev = next;
      ++matched;
    }
    if (matched == m) return true;
  }
  return false;
}

namespace {

struct SynthGen {
  const SynthConfig& config;
  std::vector<std::string> vocab;
  std::mt19937_64 rng;

  explicit SynthGen(const SynthConfig& c) : config(c), rng(c.rng_seed) {
    vocab.reserve(config.vocab_size);
    for (int i = 0; i < config.vocab_size; ++i) vocab.push_back("tok" + std::to_string(i));
  }

  std::string random_token() {
    std::uniform_int_distribution<int> pick(0, config.vocab_size - 1);
    return vocab[pick(rng)];
  }

  std::vector<std::string> random_tokens(int len) {
    std::vector<std::string> tokens(len);
    for (auto& t : tokens) t = random_token();
    return tokens;
  }

  int random_len() {
    std::uniform_int_distribution<int> pick(config.doc_len_min, config.doc_len_max);
    return pick(rng);
  }

  LabeledDoc positive() {
    const int m = static_cast<int>(config.pattern.size());
    const int len = random_len();
    auto tokens = random_tokens(len);
    std::uniform_int_distribution<int> gap(0, config.max_gap);
    std::vector<int> gaps(m > 1 ? m - 1 : 0);
    int span = m;
    for (int attempt = 0;; ++attempt) {
      span = m;
      for (auto& g : gaps) {
        g = gap(rng);
        span += g;
      }
      if (span <= len) break;
      if (attempt >= 100) {
        std::fill(gaps.begin(), gaps.end(), 0);
        span = m;
        break;
      }
    }
    std::uniform_int_distribution<int> start_pick(0, len - span);
    int pos = start_pick(rng);
    tokens[pos] = config.pattern[0];
    for (int i = 1; i < m; ++i) {
      pos += 1 + gaps[i - 1];
      tokens[pos] = config.pattern[i];
    }
    return {std::move(tokens), 1};
  }

  LabeledDoc negative() {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const int len = random_len();
      auto tokens = random_tokens(len);
      // decoys: individual pattern tokens appear in negatives too
      for (const auto& p : config.pattern) {
        if (coin(rng) < 0.5) {
          std::uniform_int_distribution<int> pos(0, len - 1);
          tokens[pos(rng)] = p;
        }
      }
      if (!contains_pattern(tokens, config.pattern, config.max_gap)) return {std::move(tokens), -1};
    }
    throw std::runtime_error("synth_generate: rejection budget exceeded; pattern too likely in random text");
  }

  std::vector<LabeledDoc> split(int count) {
    std::vector<LabeledDoc> docs;
    docs.reserve(count);
    const int pos = count / 2 + count % 2;
    for (int i = 0; i < pos; ++i) docs.push_back(positive());
    for (int i = pos; i < count; ++i) docs.push_back(negative());
    std::shuffle(docs.begin(), docs.end(), rng);
    return docs;
  }

  EmbeddingTable embeddings() {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::map<std::string, Vec> vectors;
    for (const auto& token : vocab) {
      Vec v(config.embedding_dim);
      double norm = 0.0;
      do {
        norm = 0.0;
        for (auto& x : v) {
          x = gauss(rng);
          norm += x * x;
        }
      } while (norm == 0.0);
      norm = std::sqrt(norm);
      for (auto& x : v) x /= norm;
      vectors[token] = std::move(v);
    }
    return EmbeddingTable(config.embedding_dim, std::move(vectors));
  }
};

}  // namespace

SynthData synth_generate(const SynthConfig& config) {
  if (config.vocab_size < 2) throw std::invalid_argument("synth_generate: vocab_size must be at least 2");
  if (config.pattern.empty() || config.pattern.size() > 4)
    throw std::invalid_argument("synth_generate: pattern must have 1..4 tokens");
  if (config.max_gap < 0) throw std::invalid_argument("synth_generate: max_gap must be nonnegative");
  if (config.doc_len_min < static_cast<int>(config.pattern.size()) || config.doc_len_max < config.doc_len_min)
    throw std::invalid_argument("synth_generate: bad doc length range");
  if (config.embedding_dim < 1) throw std::invalid_argument("synth_generate: embedding_dim must be positive");

  SynthGen gen(config);
  for (const auto& p : config.pattern) {
    if (std::find(gen.vocab.begin(), gen.vocab.end(), p) == gen.vocab.end())
      throw std::invalid_argument("synth_generate: pattern token not in vocab: " + p);
  }
  EmbeddingTable table = gen.embeddings();
  auto train = gen.split(config.num_train);
  auto dev = gen.split(config.num_dev);
  auto test = gen.split(config.num_test);
  return {std::move(train), std::move(dev), std::move(test), std::move(table)};
}

void write_synth(const SynthData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  save_dataset(data.train, (base / "train.tsv").string());
  save_dataset(data.dev, (base / "dev.tsv").string());
  save_dataset(data.test, (base / "test.tsv").string());
  save_embeddings(data.table, (base / "embeddings.txt").string());
}

}  // namespace rrnn
