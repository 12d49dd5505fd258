#include "rrnn/group_lasso.hpp"

#include <cmath>
#include <stdexcept>

namespace rrnn {

namespace {

double group_l2(const ConstGroupView& g) {
  double ss = 0.0;
  for (const double* v : g.values) ss += *v * *v;
  return std::sqrt(ss);
}

}  // namespace

double unscaled_penalty(const RationalModel& model) {
  double sum = 0.0;
  for (const auto& g : group_view(model)) {
    sum += std::sqrt(static_cast<double>(g.values.size())) * group_l2(g);
  }
  return sum;
}

double penalty(const RationalModel& model, const PenaltyConfig& config) {
  if (config.lambda < 0.0) throw std::invalid_argument("penalty: lambda must be nonnegative");
  if (config.lambda == 0.0) return 0.0;
  return config.lambda * unscaled_penalty(model);
}

double penalty(std::span<const Vec> groups, const PenaltyConfig& config) {
  if (config.lambda < 0.0) throw std::invalid_argument("penalty: lambda must be nonnegative");
  double sum = 0.0;
  for (const Vec& g : groups) sum += std::sqrt(static_cast<double>(g.size())) * l2_norm(g);
  return config.lambda * sum;
}

RationalModel penalty_subgradient(const RationalModel& model, const PenaltyConfig& config) {
  if (config.lambda < 0.0) throw std::invalid_argument("penalty_subgradient: lambda must be nonnegative");
  RationalModel grad = zeros_like(model);
  auto src = group_view(model);
  auto dst = group_view(grad);
  for (std::size_t g = 0; g < src.size(); ++g) {
    const double norm = group_l2(src[g]);
    if (norm == 0.0) continue;
    const double coeff = config.lambda * std::sqrt(static_cast<double>(src[g].values.size())) / norm;
    for (std::size_t i = 0; i < src[g].values.size(); ++i) *dst[g].values[i] = coeff * *src[g].values[i];
  }
  return grad;
}

std::vector<GroupNorm> group_norms(const RationalModel& model) {
  std::vector<GroupNorm> norms;
  for (const auto& g : group_view(model)) {
    norms.push_back({g.wfsa_index, g.state_index, group_l2(g)});
  }
  return norms;
}

}  // namespace rrnn
