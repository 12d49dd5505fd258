#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rrnn/group_lasso.hpp"
#include "rrnn/model.hpp"

namespace rrnn {

/// Surviving non-start state counts per original WFSA. A count of 0
/// means the WFSA was removed entirely.
struct PrunedStructure {
  std::vector<int> surviving_states;

  bool wfsa_removed(int j) const { return surviving_states[j] == 0; }
  int num_surviving_wfsas() const {
    int n = 0;
    for (int s : surviving_states)
      if (s > 0) ++n;
    return n;
  }
};

/// Total surviving main-path transitions, the model-size axis of the
/// accuracy/size tradeoff.
int count_transitions(const PrunedStructure& structure);

struct SuffixCheck {
  bool is_suffix = true;
  int first_violation_state = 0;  // 1-based first interior removal, valid when !is_suffix
};

/// True iff the sub-epsilon groups form a (possibly empty) suffix of the
/// chain. Group lasso gives no guarantee of this, so pruning reports it.
SuffixCheck check_suffix_removal(std::span<const double> norms_in_chain_order, double epsilon);

struct PruneReport {
  double epsilon = 0.0;
  struct PerWfsa {
    int wfsa_index = 0;
    std::vector<double> norms;
    int surviving_states = 0;
    bool suffix_violation = false;
    int cascaded_states = 0;  // above-threshold states removed as unreachable
  };
  std::vector<PerWfsa> wfsas;
  std::vector<std::string> warnings;

  std::string to_text() const;
};

struct PruneResult {
  PrunedStructure structure;
  RationalModel compact;
  PruneReport report;
};

/// Removes every state group whose raw l2 norm falls below epsilon,
/// cascades over states made unreachable by an interior removal, drops
/// classifier weights of fully removed WFSAs, and re-indexes the rest.
/// The compact model scores every document exactly like the original
/// with the removed groups zeroed out.
PruneResult prune(const RationalModel& model, double epsilon);

}  // namespace rrnn
