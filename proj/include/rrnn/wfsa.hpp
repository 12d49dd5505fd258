#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrnn/numeric.hpp"

namespace rrnn {

/// Chain-shaped WFSA over states 0..k. State 0 is the start state and
/// carries a free (weight 1) self-loop; every state 1..k is final and
/// carries a gated self-loop. Main transition i moves state i-1 -> i.
struct WfsaShape {
  int num_transitions;  // k

  explicit WfsaShape(int k) : num_transitions(k) {
    if (k < 1) throw std::invalid_argument("WfsaShape: need at least one transition");
  }
  int num_states() const { return num_transitions + 1; }
};

/// Transition weights for one consumed token: self_loop[i-1] is the
/// gated loop weight at state i, main[i-1] the weight of transition i.
/// The DP accepts any finite reals; the rational model produces
/// self-loop weights in (0,1).
struct TimestepWeights {
  Vec self_loop;
  Vec main;
};

struct DpOverflow : std::overflow_error {
  int timestep;
  int state;
  DpOverflow(int t, int s)
      : std::overflow_error("non-finite DP value at timestep " + std::to_string(t) +
                            ", state " + std::to_string(s)),
        timestep(t),
        state(s) {}
};

/// One accepting path: main transition j consumed token main_times[j]
/// (0-based, strictly increasing), self_loops[i] lists the tokens looped
/// at state i+1. Tokens before main_times[0] sit on the free start-state
/// loop and are not recorded. The path ends at state main_times.size()
/// at the last timestep.
struct PathRecord {
  int start_time = 0;
  std::vector<int> main_times;
  std::vector<std::vector<int>> self_loops;
  double score = 1.0;

  int end_state() const { return static_cast<int>(main_times.size()); }
};

struct ForwardResult {
  Vec state_values;  // c_n^(0..k)
  double total = 0.0;  // sum over final states 1..k
};

/// Forward algorithm under the plus-times semiring:
///   c_t^(0) = 1,  c_0^(i) = 0,
///   c_t^(i) = c_{t-1}^(i) * f_{i,t} + c_{t-1}^(i-1) * u_{i,t}.
/// Throws DpOverflow if an intermediate value leaves the finite range.
ForwardResult forward_score(const WfsaShape& shape, std::span<const TimestepWeights> weights);

/// Brute-force enumeration of every accepting path (any start time,
/// ending at any final state at the last timestep), with exact product
/// scores. Guarded: throws std::length_error if the instance has more
/// than 10^6 paths. Test oracle for forward_score and extreme_path.
std::vector<PathRecord> enumerate_paths(const WfsaShape& shape, std::span<const TimestepWeights> weights);

/// Number of accepting paths without materializing them.
unsigned long long count_paths(const WfsaShape& shape, int num_tokens);

/// Product of the recorded transitions' weights, multiplied in time order.
double recompute_score(const PathRecord& path, std::span<const TimestepWeights> weights);

struct ExtremePaths {
  PathRecord max_path;
  PathRecord min_path;
};

/// Exact maximum- and minimum-score accepting paths. Main-transition
/// weights may be negative, so plain max-product Viterbi loses optimal
/// substructure; the DP instead carries a (min,max) interval per state
/// and timestep and recovers token assignments by backtracking.
ExtremePaths extreme_path(const WfsaShape& shape, std::span<const TimestepWeights> weights);

namespace detail {

// The two semirings the chain DP runs under. scale() extends a path
// value by one transition weight, combine() merges path sets.
struct SumProduct {
  using Value = double;
  static Value one() { return 1.0; }
  static Value scale(Value v, double w) { return v * w; }
  static Value combine(Value a, Value b) { return a + b; }
  static bool finite(Value v) { return std::isfinite(v); }
};

struct IntervalExtreme {
  struct Value {
    double lo, hi;
  };
  static Value one() { return {1.0, 1.0}; }
  static Value scale(Value v, double w) {
    const double a = v.lo * w;
    const double b = v.hi * w;
    return a <= b ? Value{a, b} : Value{b, a};
  }
  static Value combine(Value a, Value b) {
    return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
  }
  static bool finite(Value v) { return std::isfinite(v.lo) && std::isfinite(v.hi); }
};

// Full (n+1) x (k+1) DP table. Cells unreachable at time t (t < i) stay
// disengaged rather than holding a semiring zero.
template <class S>
struct ChainTable {
  int n = 0, k = 0;
  std::vector<std::optional<typename S::Value>> cells;

  std::optional<typename S::Value>& at(int t, int i) { return cells[static_cast<std::size_t>(t) * (k + 1) + i]; }
  const std::optional<typename S::Value>& at(int t, int i) const {
    return cells[static_cast<std::size_t>(t) * (k + 1) + i];
  }
};

template <class S>
ChainTable<S> chain_forward(const WfsaShape& shape, std::span<const TimestepWeights> weights) {
  const int k = shape.num_transitions;
  const int n = static_cast<int>(weights.size());
  ChainTable<S> table;
  table.n = n;
  table.k = k;
  table.cells.assign(static_cast<std::size_t>(n + 1) * (k + 1), std::nullopt);
  for (int t = 0; t <= n; ++t) table.at(t, 0) = S::one();
  for (int t = 1; t <= n; ++t) {
    const TimestepWeights& w = weights[t - 1];
    for (int i = 1; i <= k; ++i) {
      std::optional<typename S::Value> acc;
      if (const auto& stay = table.at(t - 1, i)) acc = S::scale(*stay, w.self_loop[i - 1]);
      if (const auto& advance = table.at(t - 1, i - 1)) {
        const auto v = S::scale(*advance, w.main[i - 1]);
        acc = acc ? S::combine(*acc, v) : v;
      }
      if (acc) {
        if (!S::finite(*acc)) throw DpOverflow(t - 1, i);
        table.at(t, i) = acc;
      }
    }
  }
  return table;
}

}  // namespace detail

}  // namespace rrnn
