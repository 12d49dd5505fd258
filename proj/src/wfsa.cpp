#include "rrnn/wfsa.hpp"

#include <cmath>

namespace rrnn {

ForwardResult forward_score(const WfsaShape& shape, std::span<const TimestepWeights> weights) {
  const auto table = detail::chain_forward<detail::SumProduct>(shape, weights);
  const int n = table.n;
  ForwardResult result;
  result.state_values.assign(shape.num_states(), 0.0);
  result.state_values[0] = 1.0;
  for (int i = 1; i <= shape.num_transitions; ++i) {
    if (const auto& c = table.at(n, i)) {
      result.state_values[i] = *c;
      result.total += *c;
    }
  }
  return result;
}

unsigned long long count_paths(const WfsaShape& shape, int num_tokens) {
  // Paths ending at state k' are exactly the choices of k' strictly
  // increasing main-transition times: C(n, k'). Everything else is forced.
  unsigned long long total = 0;
  for (int end = 1; end <= shape.num_transitions && end <= num_tokens; ++end) {
    unsigned long long c = 1;
    for (int j = 1; j <= end; ++j) c = c * static_cast<unsigned long long>(num_tokens - j + 1) / j;
    total += c;
  }
  return total;
}

double recompute_score(const PathRecord& path, std::span<const TimestepWeights> weights) {
  const int k = path.end_state();
  double score = 1.0;
  const int n = static_cast<int>(weights.size());
  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      if (path.main_times[j] == t) score *= weights[t].main[j];
    }
    for (int i = 0; i < static_cast<int>(path.self_loops.size()); ++i) {
      for (int loop_t : path.self_loops[i]) {
        if (loop_t == t) score *= weights[t].self_loop[i];
      }
    }
  }
  return score;
}

namespace {

PathRecord make_record(std::span<const TimestepWeights> weights, std::span<const int> main_times) {
  PathRecord rec;
  rec.main_times.assign(main_times.begin(), main_times.end());
  rec.start_time = rec.main_times.front();
  const int k = rec.end_state();
  const int n = static_cast<int>(weights.size());
  rec.self_loops.resize(k);
  double score = 1.0;
  int state = 0;
  int next = 0;
  for (int t = 0; t < n; ++t) {
    if (next < k && rec.main_times[next] == t) {
      score *= weights[t].main[state];
      ++state;
      ++next;
    } else if (state >= 1) {
      rec.self_loops[state - 1].push_back(t);
      score *= weights[t].self_loop[state - 1];
    }
    // state 0 loops carry weight 1
  }
  rec.score = score;
  return rec;
}

}  // namespace

std::vector<PathRecord> enumerate_paths(const WfsaShape& shape, std::span<const TimestepWeights> weights) {
  const int n = static_cast<int>(weights.size());
  const unsigned long long total = count_paths(shape, n);
  if (total > 1000000ull) {
    throw std::length_error("enumerate_paths: instance has " + std::to_string(total) + " paths (guard: 1e6)");
  }
  std::vector<PathRecord> paths;
  paths.reserve(static_cast<std::size_t>(total));
  for (int end = 1; end <= shape.num_transitions && end <= n; ++end) {
    // iterate over all strictly increasing time tuples of length `end`
    std::vector<int> times(end);
    for (int j = 0; j < end; ++j) times[j] = j;
    while (true) {
      paths.push_back(make_record(weights, times));
      int j = end - 1;
      while (j >= 0 && times[j] == n - end + j) --j;
      if (j < 0) break;
      ++times[j];
      for (int l = j + 1; l < end; ++l) times[l] = times[l - 1] + 1;
    }
  }
  return paths;
}

namespace {

using Interval = detail::IntervalExtreme::Value;
using IntervalTable = detail::ChainTable<detail::IntervalExtreme>;

// Walk the interval table back from (t=n, state, value). Each cell value
// is bit-identical to one candidate product, so backtracking re-derives
// the choice by recomputing the candidates.
PathRecord backtrack(const IntervalTable& table, std::span<const TimestepWeights> weights, int state,
                     double value) {
  const int n = table.n;
  std::vector<int> main_times;
  std::vector<std::vector<int>> loops(state);
  int i = state;
  double target = value;
  for (int t = n; t >= 1 && i >= 1; --t) {
    const TimestepWeights& w = weights[t - 1];
    bool matched = false;
    if (const auto& stay = table.at(t - 1, i)) {
      for (double end : {stay->lo, stay->hi}) {
        if (end * w.self_loop[i - 1] == target) {
          loops[i - 1].push_back(t - 1);
          target = end;
          matched = true;
          break;
        }
      }
    }
    if (!matched) {
      if (const auto& advance = table.at(t - 1, i - 1)) {
        for (double end : {advance->lo, advance->hi}) {
          if (end * w.main[i - 1] == target) {
            main_times.push_back(t - 1);
            --i;
            target = end;
            matched = true;
            break;
          }
        }
      }
    }
    if (!matched) throw std::logic_error("extreme_path: backtrack lost the DP value");
  }
  std::reverse(main_times.begin(), main_times.end());
  for (auto& l : loops) std::reverse(l.begin(), l.end());
  PathRecord rec;
  rec.main_times = std::move(main_times);
  rec.self_loops = std::move(loops);
  rec.start_time = rec.main_times.front();
  rec.score = value;
  return rec;
}

}  // namespace

ExtremePaths extreme_path(const WfsaShape& shape, std::span<const TimestepWeights> weights) {
  const int n = static_cast<int>(weights.size());
  if (n < 1) throw std::invalid_argument("extreme_path: need at least one timestep");
  const auto table = detail::chain_forward<detail::IntervalExtreme>(shape, weights);
  std::optional<double> best_hi, best_lo;
  int hi_state = 0, lo_state = 0;
  for (int i = 1; i <= shape.num_transitions; ++i) {
    const auto& cell = table.at(n, i);
    if (!cell) continue;
    if (!best_hi || cell->hi > *best_hi) {
      best_hi = cell->hi;
      hi_state = i;
    }
    if (!best_lo || cell->lo < *best_lo) {
      best_lo = cell->lo;
      lo_state = i;
    }
  }
  if (!best_hi) throw std::invalid_argument("extreme_path: no accepting path");
  ExtremePaths result;
  result.max_path = backtrack(table, weights, hi_state, *best_hi);
  result.min_path = backtrack(table, weights, lo_state, *best_lo);
  return result;
}

}  // namespace rrnn
