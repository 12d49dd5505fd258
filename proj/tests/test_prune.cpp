#include <doctest.h>

#include <cmath>
#include <random>

#include "rrnn/prune.hpp"
#include "test_helpers.hpp"

using namespace rrnn;
using rrnn::testing::random_doc;
using rrnn::testing::random_model;

namespace {

// scales whole groups so their raw l2 norms hit the requested values
void set_group_norms(RationalModel& model, int wfsa, const Vec& norms) {
  auto groups = group_view(model);
  for (const auto& g : groups) {
    if (g.wfsa_index != wfsa) continue;
    double ss = 0.0;
    for (const double* v : g.values) ss += *v * *v;
    const double current = std::sqrt(ss);
    const double target = norms[g.state_index - 1];
    if (current == 0.0) {
      *g.values[0] = target;
    } else {
      for (double* v : g.values) *v *= target / current;
    }
  }
}

}  // namespace

TEST_SUITE_BEGIN("prune");

TEST_CASE("epsilon zero removes nothing") {
  std::mt19937_64 rng(31);
  RationalModel model = random_model(3, 4, 4, rng);
  const PruneResult result = prune(model, 0.0);
  CHECK(result.structure.surviving_states == std::vector<int>{4, 4, 4});
  CHECK(count_transitions(result.structure) == 12);
  CHECK(flatten(result.compact) == flatten(model));
}

TEST_CASE("suffix of weak groups is removed") {
  std::mt19937_64 rng(32);
  RationalModel model = random_model(1, 4, 4, rng);
  set_group_norms(model, 0, {5.0, 0.05, 0.04, 0.03});
  const PruneResult result = prune(model, 0.1);
  CHECK(result.structure.surviving_states == std::vector<int>{1});
  CHECK(result.report.wfsas[0].suffix_violation == false);
  CHECK(result.report.warnings.empty());
  CHECK(result.compact.wfsas[0].num_transitions() == 1);
}

TEST_CASE("everything below epsilon leaves a classifier-bias-only model") {
  std::mt19937_64 rng(33);
  RationalModel model = random_model(2, 3, 3, rng);
  set_group_norms(model, 0, {0.01, 0.01, 0.01});
  set_group_norms(model, 1, {0.02, 0.01, 0.01});
  model.classifier_bias = 0.75;
  const PruneResult result = prune(model, 0.1);
  CHECK(count_transitions(result.structure) == 0);
  CHECK(result.structure.num_surviving_wfsas() == 0);
  CHECK(result.compact.num_wfsas() == 0);
  CHECK(result.compact.classifier_weight.empty());
  CHECK(result.compact.classifier_bias == 0.75);
  std::mt19937_64 doc_rng(34);
  CHECK(model_logit(result.compact, random_doc(4, 3, doc_rng)) == 0.75);
}

TEST_CASE("check_suffix_removal") {
  CHECK(check_suffix_removal(Vec{5.0, 4.0, 0.01, 0.01}, 0.1).is_suffix);
  const SuffixCheck bad = check_suffix_removal(Vec{5.0, 0.01, 4.0, 0.01}, 0.1);
  CHECK(!bad.is_suffix);
  CHECK(bad.first_violation_state == 2);  // the interior removal, not the stranded survivor
  CHECK(check_suffix_removal(Vec{}, 0.1).is_suffix);
}

TEST_CASE("transition counts for the baseline grids") {
  for (int k = 1; k <= 4; ++k) {
    PrunedStructure structure{std::vector<int>(24, k)};
    CHECK(count_transitions(structure) == 24 * k);
  }
  // equal mix: 6 WFSAs of each size 1..4
  std::vector<int> mixed;
  for (int k = 1; k <= 4; ++k) mixed.insert(mixed.end(), 6, k);
  CHECK(count_transitions(PrunedStructure{mixed}) == 60);
  CHECK(count_transitions(PrunedStructure{std::vector<int>(5, 0)}) == 0);
}

TEST_CASE("compaction is exact against the zeroed original") {
  std::mt19937_64 rng(35);
  RationalModel model = random_model(3, 4, 4, rng);
  set_group_norms(model, 0, {3.0, 2.0, 0.05, 0.02});
  set_group_norms(model, 2, {1.5, 0.01, 0.01, 0.01});
  const double epsilon = 0.1;
  const PruneResult result = prune(model, epsilon);
  CHECK(result.structure.surviving_states == std::vector<int>{2, 4, 1});

  RationalModel zeroed = model;
  for (const auto& g : group_view(zeroed)) {
    double ss = 0.0;
    for (double* v : g.values) ss += *v * *v;
    if (std::sqrt(ss) < epsilon)
      for (double* v : g.values) *v = 0.0;
  }
  for (int trial = 0; trial < 20; ++trial) {
    const auto doc = random_doc(6, 4, rng);
    CHECK(model_logit(result.compact, doc) == model_logit(zeroed, doc));
  }
}

TEST_CASE("compaction stays exact when a whole WFSA dies") {
  std::mt19937_64 rng(36);
  RationalModel model = random_model(3, 2, 3, rng);
  set_group_norms(model, 1, {0.01, 0.01});
  const PruneResult result = prune(model, 0.1);
  CHECK(result.structure.surviving_states == std::vector<int>{2, 0, 2});
  CHECK(result.compact.num_wfsas() == 2);
  RationalModel zeroed = model;
  for (const auto& g : group_view(zeroed)) {
    if (g.wfsa_index == 1)
      for (double* v : g.values) *v = 0.0;
  }
  for (int trial = 0; trial < 10; ++trial) {
    const auto doc = random_doc(5, 3, rng);
    CHECK(model_logit(result.compact, doc) == model_logit(zeroed, doc));
  }
}

TEST_CASE("re-pruning a compact model is the identity") {
  std::mt19937_64 rng(37);
  RationalModel model = random_model(2, 4, 3, rng);
  set_group_norms(model, 0, {2.0, 1.0, 0.05, 0.01});
  const PruneResult first = prune(model, 0.1);
  const PruneResult second = prune(first.compact, 0.1);
  CHECK(flatten(second.compact) == flatten(first.compact));
  CHECK(count_transitions(second.structure) == count_transitions(first.structure));
}

TEST_CASE("larger epsilon never keeps more transitions") {
  std::mt19937_64 rng(38);
  RationalModel model = random_model(4, 4, 3, rng);
  int previous = model.total_transitions();
  for (double epsilon : {0.0, 0.5, 1.0, 2.0, 5.0}) {
    const int now = count_transitions(prune(model, epsilon).structure);
    CHECK(now <= previous);
    previous = now;
  }
}

TEST_CASE("interior removal cascades and warns") {
  std::mt19937_64 rng(39);
  RationalModel model = random_model(1, 4, 3, rng);
  set_group_norms(model, 0, {5.0, 0.01, 4.0, 3.0});
  const PruneResult result = prune(model, 0.1);
  CHECK(result.structure.surviving_states == std::vector<int>{1});
  CHECK(result.report.wfsas[0].suffix_violation);
  CHECK(result.report.wfsas[0].cascaded_states == 2);
  REQUIRE(result.report.warnings.size() == 1);
  CHECK(result.report.warnings[0].find("unreachable") != std::string::npos);
  CHECK(result.report.to_text().find("non-suffix") != std::string::npos);
}

TEST_CASE("negative epsilon is rejected") {
  RationalModel model = init_model(1, 1, 2, 0);
  CHECK_THROWS_AS(prune(model, -0.5), std::invalid_argument);
}

TEST_SUITE_END();
