#pragma once

#include <span>
#include <string>
#include <vector>

#include "rrnn/batch.hpp"
#include "rrnn/data.hpp"
#include "rrnn/model.hpp"
#include "rrnn/wfsa.hpp"

namespace rrnn {

/// One extreme-scoring span: the tokens from the first main transition
/// to the end of the document, each consumed either by a main-path
/// transition or a self-loop.
struct PhraseMatch {
  struct Annotation {
    enum class Kind { Main, SelfLoop } kind = Kind::Main;
    int index = 0;  // Main: 1-based transition; SelfLoop: state looped on
  };

  int doc_id = 0;
  int wfsa_index = 0;
  double score = 0.0;
  int span_begin = 0;                   // token index of the first main transition
  std::vector<std::string> tokens;      // tokens of [span_begin, doc end)
  std::vector<Annotation> annotations;  // parallel to tokens
};

struct WfsaPhrases {
  int wfsa_index = 0;
  int num_transitions = 0;
  std::vector<PhraseMatch> top;     // scores non-increasing
  std::vector<PhraseMatch> bottom;  // scores non-decreasing
};

/// Per WFSA: the n highest- and n lowest-scoring documents' extreme
/// paths across the corpus. One max and one min candidate per document;
/// extreme_path already optimizes over start times within it. Merge
/// order is deterministic (score, then doc id).
std::vector<WfsaPhrases> top_bottom_phrases(const RationalModel& model, std::span<const LabeledDoc> corpus,
                                            const EmbeddingTable& table, int n, Exec exec = Exec::Parallel);

/// Re-derives a match's score from the model and the annotated tokens
/// alone; tests hold it to the reported score within 1e-9.
double recompute_phrase_score(const RationalModel& model, const EmbeddingTable& table, const PhraseMatch& match);

/// Text table: one column per main transition, up to two preceding
/// self-loop tokens inline (marked _SL), more collapsed to "...",
/// "</s>" closing the phrase.
std::string render_pattern_table(std::span<const WfsaPhrases> phrases);

/// Same content, one row per phrase, tab-separated cells.
std::string render_pattern_table_tsv(std::span<const WfsaPhrases> phrases);

struct TradeoffRun {
  std::string method;
  double transitions = 0.0;
  double transitions_std = 0.0;
  double accuracy = 0.0;
  double accuracy_std = 0.0;
};

/// CSV with header method,transitions,transitions_std,accuracy,accuracy_std,
/// rows sorted by transitions.
std::string emit_tradeoff_csv(std::span<const TradeoffRun> runs);

}  // namespace rrnn
