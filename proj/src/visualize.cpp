#include "rrnn/visualize.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace rrnn {

namespace {

std::vector<TimestepWeights> weights_for_doc(const WfsaParams& wfsa, std::span<const Vec> doc) {
  const int k = wfsa.num_transitions();
  std::vector<TimestepWeights> weights(doc.size());
  for (std::size_t t = 0; t < doc.size(); ++t) {
    weights[t].self_loop.resize(k);
    weights[t].main.resize(k);
    for (int i = 0; i < k; ++i) {
      const GateValues g = transition_weights(wfsa.states[i], doc[t]);
      weights[t].self_loop[i] = g.self_loop;
      weights[t].main[i] = g.main;
    }
  }
  return weights;
}

PhraseMatch make_match(const PathRecord& path, const LabeledDoc& doc, int doc_id, int wfsa_index) {
  PhraseMatch match;
  match.doc_id = doc_id;
  match.wfsa_index = wfsa_index;
  match.score = path.score;
  match.span_begin = path.start_time;
  const int n = static_cast<int>(doc.tokens.size());
  const int k = path.end_state();
  int state = 0;
  int next_main = 0;
  for (int t = path.start_time; t < n; ++t) {
    match.tokens.push_back(doc.tokens[t]);
    PhraseMatch::Annotation ann;
    if (next_main < k && path.main_times[next_main] == t) {
      ++state;
      ++next_main;
      ann.kind = PhraseMatch::Annotation::Kind::Main;
      ann.index = state;
    } else {
      ann.kind = PhraseMatch::Annotation::Kind::SelfLoop;
      ann.index = state;
    }
    match.annotations.push_back(ann);
  }
  return match;
}

}  // namespace

std::vector<WfsaPhrases> top_bottom_phrases(const RationalModel& model, std::span<const LabeledDoc> corpus,
                                            const EmbeddingTable& table, int n, Exec exec) {
  if (corpus.empty()) throw std::invalid_argument("top_bottom_phrases: empty corpus");
  if (n < 1) throw std::invalid_argument("top_bottom_phrases: n must be positive");
  const std::size_t num_wfsas = model.wfsas.size();
  // one max and one min candidate per (doc, wfsa), filled in parallel
  std::vector<std::vector<PhraseMatch>> max_candidates(num_wfsas), min_candidates(num_wfsas);
  for (auto& v : max_candidates) v.resize(corpus.size());
  for (auto& v : min_candidates) v.resize(corpus.size());

  std::vector<EmbeddedDoc> embedded = embed_dataset(corpus, table);

  // extreme paths are independent per document
  auto run_doc = [&](std::size_t d) {
    for (std::size_t j = 0; j < num_wfsas; ++j) {
      const auto weights = weights_for_doc(model.wfsas[j], embedded[d].tokens);
      const ExtremePaths extremes = extreme_path(model.wfsas[j].shape(), weights);
      max_candidates[j][d] = make_match(extremes.max_path, corpus[d], static_cast<int>(d), static_cast<int>(j));
      min_candidates[j][d] = make_match(extremes.min_path, corpus[d], static_cast<int>(d), static_cast<int>(j));
    }
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (long long d = 0; d < static_cast<long long>(corpus.size()); ++d) run_doc(static_cast<std::size_t>(d));
  } else {
    for (std::size_t d = 0; d < corpus.size(); ++d) run_doc(d);
  }

  std::vector<WfsaPhrases> result(num_wfsas);
  for (std::size_t j = 0; j < num_wfsas; ++j) {
    result[j].wfsa_index = static_cast<int>(j);
    result[j].num_transitions = model.wfsas[j].num_transitions();
    auto& top = max_candidates[j];
    auto& bottom = min_candidates[j];
    std::stable_sort(top.begin(), top.end(), [](const PhraseMatch& a, const PhraseMatch& b) {
      return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    std::stable_sort(bottom.begin(), bottom.end(), [](const PhraseMatch& a, const PhraseMatch& b) {
      return a.score != b.score ? a.score < b.score : a.doc_id < b.doc_id;
    });
    const std::size_t take = std::min<std::size_t>(n, corpus.size());
    result[j].top.assign(top.begin(), top.begin() + take);
    result[j].bottom.assign(bottom.begin(), bottom.begin() + take);
  }
  return result;
}

double recompute_phrase_score(const RationalModel& model, const EmbeddingTable& table, const PhraseMatch& match) {
  const WfsaParams& wfsa = model.wfsas.at(match.wfsa_index);
  double score = 1.0;
  for (std::size_t i = 0; i < match.tokens.size(); ++i) {
    const Vec& z = table.lookup(match.tokens[i]);
    const auto& ann = match.annotations[i];
    if (ann.kind == PhraseMatch::Annotation::Kind::Main) {
      score *= transition_weights(wfsa.states[ann.index - 1], z).main;
    } else if (ann.index >= 1) {
      score *= transition_weights(wfsa.states[ann.index - 1], z).self_loop;
    }
  }
  return score;
}

namespace {

// cells[c] for transition c+1: up to two preceding self-loop tokens
// (">2" collapses to "..."), then the consumed token; the last used cell
// also carries trailing loops and the end marker.
std::vector<std::string> match_cells(const PhraseMatch& match, int num_transitions) {
  std::vector<std::string> cells(num_transitions);
  std::vector<std::vector<std::string>> pending(num_transitions + 1);
  int used = 0;
  for (std::size_t i = 0; i < match.tokens.size(); ++i) {
    const auto& ann = match.annotations[i];
    if (ann.kind == PhraseMatch::Annotation::Kind::Main) {
      std::string cell;
      const auto& loops = pending[ann.index - 1];
      if (loops.size() > 2) {
        cell += "... ";
      } else {
        for (const auto& l : loops) cell += l + "_SL ";
      }
      cell += match.tokens[i];
      cells[ann.index - 1] = cell;
      used = ann.index;
    } else {
      pending[ann.index].push_back(match.tokens[i]);
    }
  }
  if (used >= 1) {
    std::string tail;
    const auto& loops = pending[used];
    if (loops.size() > 2) {
      tail = " ...";
    } else {
      for (const auto& l : loops) tail += " " + l + "_SL";
    }
    cells[used - 1] += tail + " </s>";
  }
  return cells;
}

void render_rows(std::ostringstream& out, const WfsaPhrases& wfsa, const std::vector<PhraseMatch>& matches,
                 const char* side) {
  for (std::size_t r = 0; r < matches.size(); ++r) {
    out << "  " << side << " " << (r + 1) << "  (score " << double_to_string(matches[r].score) << ")  ";
    const auto cells = match_cells(matches[r], wfsa.num_transitions);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << " | ";
      out << cells[c];
    }
    out << "\n";
  }
}

}  // namespace

std::string render_pattern_table(std::span<const WfsaPhrases> phrases) {
  std::ostringstream out;
  for (const auto& wfsa : phrases) {
    out << "pattern " << wfsa.wfsa_index << " (" << wfsa.num_transitions << " transitions)\n";
    for (int c = 1; c <= wfsa.num_transitions; ++c) out << (c > 1 ? " | " : "  columns: ") << "transition_" << c;
    out << "\n";
    render_rows(out, wfsa, wfsa.top, "top");
    render_rows(out, wfsa, wfsa.bottom, "bottom");
  }
  return out.str();
}

std::string render_pattern_table_tsv(std::span<const WfsaPhrases> phrases) {
  std::ostringstream out;
  out << "wfsa\tside\trank\tdoc\tscore";
  int max_cols = 0;
  for (const auto& w : phrases) max_cols = std::max(max_cols, w.num_transitions);
  for (int c = 1; c <= max_cols; ++c) out << "\ttransition_" << c;
  out << "\n";
  auto emit = [&](const WfsaPhrases& w, const std::vector<PhraseMatch>& side, const char* tag) {
    for (std::size_t r = 0; r < side.size(); ++r) {
      out << w.wfsa_index << '\t' << tag << '\t' << (r + 1) << '\t' << side[r].doc_id << '\t'
          << double_to_string(side[r].score);
      const auto cells = match_cells(side[r], w.num_transitions);
      for (const auto& cell : cells) out << '\t' << cell;
      out << "\n";
    }
  };
  for (const auto& w : phrases) {
    emit(w, w.top, "top");
    emit(w, w.bottom, "bottom");
  }
  return out.str();
}

std::string emit_tradeoff_csv(std::span<const TradeoffRun> runs) {
  std::vector<TradeoffRun> sorted(runs.begin(), runs.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const TradeoffRun& a, const TradeoffRun& b) { return a.transitions < b.transitions; });
  std::ostringstream out;
  out << "method,transitions,transitions_std,accuracy,accuracy_std\n";
  for (const auto& r : sorted) {
    out << r.method << ',' << double_to_string(r.transitions) << ',' << double_to_string(r.transitions_std) << ','
        << double_to_string(r.accuracy) << ',' << double_to_string(r.accuracy_std) << "\n";
  }
  return out.str();
}

}  // namespace rrnn
