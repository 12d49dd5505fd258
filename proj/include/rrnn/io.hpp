#pragma once

#include <optional>
#include <string>

#include "rrnn/prune.hpp"
#include "rrnn/train.hpp"

namespace rrnn {

// All artifacts are versioned JSON so runs diff cleanly.

void save_history(const TrainHistory& history, const std::string& path);
TrainHistory load_history(const std::string& path);

void save_prune_report(const PruneReport& report, const PrunedStructure& structure, const std::string& path);

/// Per-run metadata consumed by the tradeoff aggregation.
struct RunSummary {
  std::string method = "default";
  int transitions = 0;
  double dev_accuracy = 0.0;
  std::optional<double> test_accuracy;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

void save_summary(const RunSummary& summary, const std::string& path);
RunSummary load_summary(const std::string& path);

}  // namespace rrnn
