#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rrnn/group_lasso.hpp"
#include "test_helpers.hpp"

using namespace rrnn;
using rrnn::testing::random_model;

TEST_SUITE_BEGIN("group_lasso");

TEST_CASE("zero model has zero penalty for any lambda") {
  RationalModel model = zeros_like(init_model(3, 2, 4, 0));
  for (double lambda : {0.0, 1.0, 1e2}) {
    CHECK(penalty(model, {lambda}) == 0.0);
  }
}

TEST_CASE("hand-evaluated penalty of one uniform group") {
  // one group of dim 8 = 2*(3+1), every entry 0.5:
  // sqrt(8) * sqrt(8 * 0.25) = sqrt(8) * sqrt(2) = 4
  RationalModel model = init_model(1, 1, 3, 0);
  const auto groups = group_view(model);
  for (double* v : groups[0].values) *v = 0.5;
  CHECK(penalty(model, {1.0}) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("positive homogeneity") {
  std::mt19937_64 rng(21);
  RationalModel model = random_model(3, 3, 4, rng);
  const double base = penalty(model, {0.7});
  for (double alpha : {2.0, 0.25, -3.0}) {
    RationalModel scaled = model;
    for (double* p : collect_params(scaled)) *p *= alpha;
    CHECK(penalty(scaled, {0.7}) == doctest::Approx(std::abs(alpha) * base).epsilon(1e-12));
  }
}

TEST_CASE("singleton groups recover the lasso") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> value(-2.0, 2.0);
  std::vector<Vec> groups;
  double l1 = 0.0;
  for (int i = 0; i < 40; ++i) {
    const double w = value(rng);
    groups.push_back({w});
    l1 += std::abs(w);
  }
  const double lambda = 0.35;
  CHECK(penalty(groups, {lambda}) == doctest::Approx(lambda * l1).epsilon(1e-12));
}

TEST_CASE("model penalty equals the explicit-group formula") {
  std::mt19937_64 rng(23);
  RationalModel model = random_model(2, 3, 4, rng);
  std::vector<Vec> gathered;
  for (const auto& g : group_view(std::as_const(model))) {
    Vec values;
    for (const double* v : g.values) values.push_back(*v);
    gathered.push_back(std::move(values));
  }
  CHECK(penalty(model, {1.3}) == doctest::Approx(penalty(gathered, {1.3})).epsilon(1e-12));
}

TEST_CASE("zero group gets the zero subgradient") {
  RationalModel model = zeros_like(init_model(2, 2, 3, 0));
  RationalModel sub = penalty_subgradient(model, {1.0});
  for (double* p : collect_params(sub)) CHECK(*p == 0.0);
}

TEST_CASE("per-group subgradient norm is lambda sqrt(dim)") {
  std::mt19937_64 rng(24);
  RationalModel model = random_model(3, 2, 5, rng);
  const double lambda = 0.8;
  RationalModel sub = penalty_subgradient(model, {lambda});
  for (const auto& g : group_view(sub)) {
    double ss = 0.0;
    for (const double* v : g.values) ss += *v * *v;
    const double expected = lambda * std::sqrt(static_cast<double>(g.values.size()));
    CHECK(std::sqrt(ss) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(sub.classifier_bias == 0.0);
  for (double v : sub.classifier_weight) CHECK(v == 0.0);
}

TEST_CASE("subgradient matches finite differences away from the kink") {
  std::mt19937_64 rng(25);
  RationalModel model = random_model(2, 2, 3, rng);
  for (const auto& g : group_norms(model)) CHECK(g.norm >= 0.1);  // away from the kink
  const double lambda = 0.6;
  const Vec analytic = flatten(penalty_subgradient(model, {lambda}));
  RationalModel probe = model;
  const Vec numeric = finite_diff_grad(
      [&](const Vec& params) {
        unflatten(probe, params);
        return penalty(probe, {lambda});
      },
      flatten(model), 1e-6);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    CHECK(analytic[i] == doctest::Approx(numeric[i]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("group norms are raw l2") {
  RationalModel model = zeros_like(init_model(1, 2, 1, 0));
  auto groups = group_view(model);  // dim 4 each with d_emb = 1
  *groups[0].values[0] = 3.0;
  *groups[0].values[1] = 4.0;
  const auto norms = group_norms(model);
  CHECK(norms[0].norm == 5.0);
  CHECK(norms[1].norm == 0.0);
  CHECK(norms[0].wfsa_index == 0);
  CHECK(norms[0].state_index == 1);
}

TEST_CASE("group norms ignore the order of values inside the group") {
  RationalModel a = zeros_like(init_model(1, 1, 1, 0));
  RationalModel b = a;
  auto ga = group_view(a);
  auto gb = group_view(b);
  const Vec values = {3.0, -1.0, 4.0, 0.5};
  Vec shuffled = values;
  std::reverse(shuffled.begin(), shuffled.end());
  for (int i = 0; i < 4; ++i) {
    *ga[0].values[i] = values[i];
    *gb[0].values[i] = shuffled[i];
  }
  CHECK(group_norms(a)[0].norm == doctest::Approx(group_norms(b)[0].norm).epsilon(1e-12));
}

TEST_CASE("penalty is zero only for the all-zero model") {
  std::mt19937_64 rng(26);
  RationalModel model = random_model(2, 2, 3, rng);
  CHECK(penalty(model, {1.0}) > 0.0);
  for (double* p : collect_params(model)) *p = 0.0;
  CHECK(penalty(model, {1.0}) == 0.0);
}

TEST_CASE("plain subgradient descent shrinks every group norm monotonically") {
  std::mt19937_64 rng(27);
  RationalModel model = random_model(2, 2, 3, rng);
  const double lambda = 0.01;
  const double step = 0.01;
  Vec previous;
  for (const auto& g : group_norms(model)) previous.push_back(g.norm);
  for (int iter = 0; iter < 100; ++iter) {
    RationalModel sub = penalty_subgradient(model, {lambda});
    axpy_params(model, sub, -step);
    const auto norms = group_norms(model);
    for (std::size_t g = 0; g < norms.size(); ++g) {
      if (previous[g] > 0.0) CHECK(norms[g].norm < previous[g]);
      previous[g] = norms[g].norm;
    }
  }
}

TEST_CASE("negative lambda is rejected") {
  RationalModel model = init_model(1, 1, 2, 0);
  CHECK_THROWS_AS(penalty(model, {-1.0}), std::invalid_argument);
  CHECK_THROWS_AS(penalty_subgradient(model, {-1.0}), std::invalid_argument);
}

TEST_SUITE_END();
