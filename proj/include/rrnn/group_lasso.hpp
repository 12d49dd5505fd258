#pragma once

#include <vector>

#include "rrnn/model.hpp"

namespace rrnn {

struct PenaltyConfig {
  double lambda = 0.0;  // regularization strength, >= 0
};

struct GroupNorm {
  int wfsa_index;
  int state_index;
  double norm;  // raw l2, no sqrt(dim) weighting
};

/// lambda * sum_g sqrt(dim(w_g)) * ||w_g||_2 over the model's state groups.
double penalty(const RationalModel& model, const PenaltyConfig& config);

/// Same formula over explicit groups. With singleton groups this is the
/// plain lasso, lambda * sum |w_i|.
double penalty(std::span<const Vec> groups, const PenaltyConfig& config);

/// Same sum without the lambda factor; what init_lambda_balance divides by.
double unscaled_penalty(const RationalModel& model);

/// Subgradient of penalty() in model layout. Zero groups get the zero
/// vector (a valid subgradient choice); classifier parameters get zero.
RationalModel penalty_subgradient(const RationalModel& model, const PenaltyConfig& config);

/// Raw l2 norm per group, in group_view order. Pruning compares these
/// against epsilon.
std::vector<GroupNorm> group_norms(const RationalModel& model);

}  // namespace rrnn
