#include "rrnn/prune.hpp"

#include <sstream>
#include <stdexcept>

namespace rrnn {

int count_transitions(const PrunedStructure& structure) {
  int total = 0;
  for (int s : structure.surviving_states) total += s;
  return total;
}

SuffixCheck check_suffix_removal(std::span<const double> norms, double epsilon) {
  int last_kept = -1;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (norms[i] >= epsilon) last_kept = static_cast<int>(i);
  }
  for (int i = 0; i < last_kept; ++i) {
    if (norms[i] < epsilon) return {false, i + 1};  // interior removal strands later states
  }
  return {true, 0};
}

std::string PruneReport::to_text() const {
  std::ostringstream out;
  out << "prune report (epsilon=" << epsilon << ")\n";
  for (const auto& w : wfsas) {
    out << "  wfsa " << w.wfsa_index << ": kept " << w.surviving_states << "/" << w.norms.size()
        << " states, norms [";
    for (std::size_t i = 0; i < w.norms.size(); ++i) out << (i ? " " : "") << w.norms[i];
    out << "]";
    if (w.suffix_violation) out << "  [non-suffix removal, " << w.cascaded_states << " state(s) cascaded]";
    out << "\n";
  }
  for (const auto& warning : warnings) out << "  warning: " << warning << "\n";
  return out.str();
}

PruneResult prune(const RationalModel& model, double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("prune: epsilon must be nonnegative");
  PruneResult result;
  result.report.epsilon = epsilon;
  result.compact.d_emb = model.d_emb;

  const auto norms = group_norms(model);
  std::size_t cursor = 0;
  for (std::size_t j = 0; j < model.wfsas.size(); ++j) {
    const int k = model.wfsas[j].num_transitions();
    std::vector<double> chain(k);
    for (int i = 0; i < k; ++i) chain[i] = norms[cursor++].norm;

    // Survivors must be a chain prefix: an interior removal makes every
    // later state unreachable, so those are removed too.
    int keep = 0;
    while (keep < k && chain[keep] >= epsilon) ++keep;

    const SuffixCheck suffix = check_suffix_removal(chain, epsilon);
    PruneReport::PerWfsa rep;
    rep.wfsa_index = static_cast<int>(j);
    rep.norms = chain;
    rep.surviving_states = keep;
    rep.suffix_violation = !suffix.is_suffix;
    for (int i = keep; i < k; ++i)
      if (chain[i] >= epsilon) ++rep.cascaded_states;
    if (rep.suffix_violation) {
      std::ostringstream msg;
      msg << "wfsa " << j << ": interior removal at state " << suffix.first_violation_state << "; "
          << rep.cascaded_states << " above-threshold but unreachable state(s) removed";
      result.report.warnings.push_back(msg.str());
    }
    result.report.wfsas.push_back(std::move(rep));
    result.structure.surviving_states.push_back(keep);

    if (keep > 0) {
      WfsaParams compact_wfsa;
      compact_wfsa.states.assign(model.wfsas[j].states.begin(), model.wfsas[j].states.begin() + keep);
      result.compact.wfsas.push_back(std::move(compact_wfsa));
      result.compact.classifier_weight.push_back(model.classifier_weight[j]);
    }
  }
  result.compact.classifier_bias = model.classifier_bias;
  return result;
}

}  // namespace rrnn
