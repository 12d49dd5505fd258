#include <doctest.h>

#include <cmath>
#include <random>

#include "rrnn/train.hpp"
#include "test_helpers.hpp"

using namespace rrnn;
using rrnn::testing::random_model;

namespace {

struct SynthTask {
  std::vector<EmbeddedDoc> train, dev, test;
  EmbeddingTable table{1, {}};
};

SynthTask small_task(int train_count = 120, int dev_count = 40, std::uint64_t seed = 3) {
  SynthConfig config;
  config.vocab_size = 20;
  config.embedding_dim = 6;
  config.pattern = {"tok2", "tok5"};
  config.max_gap = 1;
  config.doc_len_min = 6;
  config.doc_len_max = 10;
  config.num_train = train_count;
  config.num_dev = dev_count;
  config.num_test = dev_count;
  config.rng_seed = seed;
  SynthData data = synth_generate(config);
  SynthTask task{embed_dataset(data.train, data.table), embed_dataset(data.dev, data.table),
                 embed_dataset(data.test, data.table), data.table};
  return task;
}

TrainConfig fast_config() {
  TrainConfig config;
  config.learning_rate = 0.1;
  config.max_epochs = 40;
  config.patience = 8;
  config.batch_size = 32;
  config.rng_seed = 1;
  return config;
}

}  // namespace

TEST_SUITE_BEGIN("train");

TEST_CASE("adam leaves parameters alone on zero gradients and zero decay") {
  double a = 1.5, b = -2.25;
  std::vector<double*> params{&a, &b};
  AdamState state(2);
  TrainConfig config;
  config.weight_decay = 0.0;
  adam_step(params, Vec{0.0, 0.0}, state, config);
  CHECK(a == 1.5);
  CHECK(b == -2.25);
}

TEST_CASE("first adam step matches the hand-computed update") {
  double p = 0.75;
  std::vector<double*> params{&p};
  AdamState state(1);
  TrainConfig config;
  config.learning_rate = 0.1;
  config.weight_decay = 1e-6;
  const double g = 2.0;
  adam_step(params, Vec{g}, state, config);
  // bias-corrected first step: m_hat = g, v_hat = g^2
  const double m_hat = ((1.0 - config.adam_beta1) * g) / (1.0 - std::pow(config.adam_beta1, 1.0));
  const double v_hat = ((1.0 - config.adam_beta2) * g * g) / (1.0 - std::pow(config.adam_beta2, 1.0));
  const double expected =
      0.75 - config.learning_rate * (m_hat / (std::sqrt(v_hat) + config.adam_epsilon) + config.weight_decay * 0.75);
  CHECK(p == doctest::Approx(expected).epsilon(1e-15));
  CHECK(state.step == 1);
}

TEST_CASE("decoupled weight decay shrinks parameters without gradients") {
  double p = 2.0;
  std::vector<double*> params{&p};
  AdamState state(1);
  TrainConfig config;
  config.learning_rate = 0.1;
  config.weight_decay = 1e-5;
  adam_step(params, Vec{0.0}, state, config);
  CHECK(p == doctest::Approx(2.0 - 0.1 * 1e-5 * 2.0).epsilon(1e-15));
}

TEST_CASE("adam trajectories are deterministic") {
  auto run = [] {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    Vec params(10), grads(10);
    for (auto& v : params) v = val(rng);
    std::vector<double*> ptrs;
    for (auto& v : params) ptrs.push_back(&v);
    AdamState state(10);
    TrainConfig config;
    for (int step = 0; step < 5; ++step) {
      for (auto& g : grads) g = val(rng);
      adam_step(ptrs, grads, state, config);
    }
    return params;
  };
  CHECK(run() == run());
}

TEST_CASE("adam rejects non-finite gradients by parameter index") {
  double a = 0.0, b = 0.0;
  std::vector<double*> params{&a, &b};
  AdamState state(2);
  TrainConfig config;
  CHECK_THROWS_WITH_AS(adam_step(params, Vec{0.0, std::nan("")}, state, config), doctest::Contains("parameter 1"),
                       std::invalid_argument);
}

TEST_CASE("config validation enforces the documented ranges") {
  TrainConfig config;
  config.validate();
  config.learning_rate = 1e-3;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = TrainConfig{};
  config.weight_decay = 1e-2;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = TrainConfig{};
  config.embedding_dropout = 0.9;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("unregularized training separates the planted task") {
  const SynthTask task = small_task(200, 40);
  const RationalModel init = init_model(4, 2, 6, 1);
  const TrainResult result = train(init, task.train, task.dev, fast_config(), 0.0);
  CHECK(accuracy(result.model, task.dev, Exec::Parallel) >= 0.95);
  for (const auto& e : result.history.epochs) {
    CHECK(e.penalty_value == 0.0);
    CHECK(std::isfinite(e.train_loss));
  }
  CHECK(result.history.best_epoch >= 1);
}

TEST_CASE("a huge lambda collapses every group below epsilon") {
  const SynthTask task = small_task(60, 20);
  const RationalModel init = init_model(3, 2, 6, 2);
  TrainConfig config = fast_config();
  config.learning_rate = 7e-3;
  config.max_epochs = 25;
  config.patience = 25;
  const TrainResult result = train(init, task.train, task.dev, config, 1e2);
  // the collapse shows in the converged parameters; the best-dev
  // snapshot is typically from before the penalty flattened the model
  for (const auto& g : group_norms(result.final_model)) CHECK(g.norm < 0.1);
  for (const auto& e : result.history.epochs) {
    CHECK(e.penalty_value >= 0.0);
    CHECK(std::isfinite(e.penalty_value));
  }
}

TEST_CASE("training loss is non-increasing on a tiny memorization task") {
  const SynthTask task = small_task(10, 10, 7);
  const RationalModel init = init_model(2, 2, 6, 3);
  TrainConfig config;
  config.learning_rate = 7e-3;
  config.batch_size = 10;  // full batch
  config.max_epochs = 15;
  config.patience = 15;
  config.rng_seed = 0;
  const TrainResult result = train(init, task.train, task.train, config, 0.0);
  for (std::size_t e = 1; e < result.history.epochs.size(); ++e) {
    CHECK(result.history.epochs[e].train_loss <= result.history.epochs[e - 1].train_loss);
  }
}

TEST_CASE("training is reproducible under a fixed seed") {
  const SynthTask task = small_task(60, 20);
  const RationalModel init = init_model(3, 2, 6, 4);
  TrainConfig config = fast_config();
  config.max_epochs = 6;
  config.embedding_dropout = 0.2;
  config.recurrent_dropout = 0.2;
  const TrainResult a = train(init, task.train, task.dev, config, 0.01);
  const TrainResult b = train(init, task.train, task.dev, config, 0.01);
  CHECK(flatten(a.model) == flatten(b.model));
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
    CHECK(a.history.epochs[e].train_loss == b.history.epochs[e].train_loss);
    CHECK(a.history.epochs[e].dev_accuracy == b.history.epochs[e].dev_accuracy);
    CHECK(a.history.epochs[e].surviving_transitions == b.history.epochs[e].surviving_transitions);
  }
}

TEST_CASE("serial and parallel training produce the same model") {
  const SynthTask task = small_task(60, 20);
  const RationalModel init = init_model(3, 2, 6, 12);
  TrainConfig config = fast_config();
  config.max_epochs = 5;
  config.embedding_dropout = 0.2;
  config.recurrent_dropout = 0.1;
  config.exec = Exec::Serial;
  const TrainResult serial = train(init, task.train, task.dev, config, 0.02);
  config.exec = Exec::Parallel;
  const TrainResult parallel = train(init, task.train, task.dev, config, 0.02);
  CHECK(flatten(serial.model) == flatten(parallel.model));
  CHECK(flatten(serial.final_model) == flatten(parallel.final_model));
}

TEST_CASE("divergence carries the history out") {
  SynthTask task = small_task(20, 10);
  // blow up the inputs so the DP overflows
  for (auto& doc : task.train)
    for (auto& tok : doc.tokens)
      for (auto& v : tok) v = 1e160;
  RationalModel init = init_model(2, 2, 6, 5);
  for (double* p : collect_params(init)) *p = 1e3;
  TrainConfig config = fast_config();
  try {
    train(init, task.train, task.dev, config, 0.0);
    FAIL("expected TrainDiverged");
  } catch (const TrainDiverged& e) {
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("pipeline with lambda 0 and epsilon 0 keeps the structure") {
  const SynthTask task = small_task(60, 20);
  const RationalModel init = init_model(3, 2, 6, 6);
  TrainConfig config = fast_config();
  config.max_epochs = 8;
  const PipelineResult result = three_stage_pipeline(init, task.train, task.dev, config, 0.0, 0.0);
  CHECK(!result.empty_structure);
  CHECK(result.structure.surviving_states == std::vector<int>{2, 2, 2});
  CHECK(count_transitions(result.structure) == init.total_transitions());
}

TEST_CASE("pipeline on the planted task prunes hard and stays accurate") {
  const SynthTask task = small_task(200, 60);
  const RationalModel init = init_model(8, 3, 6, 7);  // 24 transitions
  TrainConfig config = fast_config();
  config.max_epochs = 60;
  config.patience = 12;
  const double lambda = init_lambda_balance(init, task.train);
  const PipelineResult result = three_stage_pipeline(init, task.train, task.dev, config, lambda, 0.1);
  CHECK(!result.empty_structure);
  CHECK(count_transitions(result.structure) <= init.total_transitions() / 4);
  CHECK(accuracy(result.model, task.dev, Exec::Parallel) >= 0.95);
}

TEST_CASE("an all-zero start with strong regularization reports an empty structure") {
  const SynthTask task = small_task(30, 10);
  RationalModel init = zeros_like(init_model(2, 2, 6, 8));
  TrainConfig config = fast_config();
  config.max_epochs = 4;
  const PipelineResult result = three_stage_pipeline(init, task.train, task.dev, config, 10.0, 0.1);
  CHECK(result.empty_structure);
  CHECK(count_transitions(result.structure) == 0);
  CHECK(result.model.num_wfsas() == 0);
  CHECK(result.stage3_history.epochs.empty());
}

TEST_CASE("lambda search converges against a monotone oracle") {
  LambdaSearchConfig config;
  config.goal_transitions = 20;
  config.tolerance = 10;
  // monotone non-increasing in lambda, flat inside a wide band
  const auto oracle = [](double lambda) {
    const double l = std::log10(lambda);
    if (l < -7.0) return 32;
    if (l < -1.0) return 20;
    if (l < 1.0) return 8;
    return 0;
  };
  for (double start : {1e-9, 1e-6, 1e-3, 1.0, 1e2}) {
    const LambdaSearchResult result = lambda_search(config, oracle, start);
    CHECK(result.status == LambdaSearchStatus::Converged);
    CHECK(result.steps <= 10);
    CHECK(std::abs(result.transitions - config.goal_transitions) <= config.tolerance);
    CHECK(result.lambda >= config.lambda_lower_bound);
    CHECK(result.lambda <= config.lambda_upper_bound);
  }
}

TEST_CASE("lambda search returns immediately when the goal is already met") {
  LambdaSearchConfig config;
  config.goal_transitions = 24;
  config.tolerance = 4;
  const LambdaSearchResult result = lambda_search(config, [](double) { return 26; }, 0.5);
  CHECK(result.status == LambdaSearchStatus::Converged);
  CHECK(result.steps == 0);
  CHECK(result.lambda == 0.5);
}

TEST_CASE("lambda search reports a bound exit when nothing ever prunes") {
  LambdaSearchConfig config;
  config.goal_transitions = 10;
  config.tolerance = 2;
  const LambdaSearchResult result = lambda_search(config, [](double) { return 32; }, 1.0);
  CHECK(result.status == LambdaSearchStatus::BoundExit);
  // doubling from 1 exits above 1e2 after 7 moves
  CHECK(result.steps == 7);
}

TEST_CASE("lambda search stops oscillation at the step limit") {
  LambdaSearchConfig config;
  config.goal_transitions = 16;
  config.tolerance = 2;
  config.max_restarts = 12;
  const auto cliff = [](double lambda) { return lambda > 1.0 ? 0 : 32; };
  const LambdaSearchResult result = lambda_search(config, cliff, 0.9);
  CHECK(result.status == LambdaSearchStatus::StepLimit);
}

TEST_CASE("lambda search validates its inputs") {
  LambdaSearchConfig config;
  config.goal_transitions = 10;
  config.tolerance = 2;
  CHECK_THROWS_AS(lambda_search(config, [](double) { return 0; }, 1e3), std::invalid_argument);
  config.tolerance = 10;
  CHECK_THROWS_AS(lambda_search(config, [](double) { return 0; }, 1.0), std::invalid_argument);
}

TEST_CASE("init_lambda_balance equates loss and penalty at initialization") {
  const SynthTask task = small_task(40, 10);
  const RationalModel init = init_model(3, 2, 6, 9);
  const double lambda = init_lambda_balance(init, task.train);
  // zero classifier at init forces logit 0, so the loss is exactly ln 2
  CHECK(mean_loss(init, task.train, Exec::Parallel) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(lambda * unscaled_penalty(init) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(init_lambda_balance(zeros_like(init), task.train), std::invalid_argument);
}

TEST_CASE("surviving transitions shrink as lambda grows") {
  const SynthTask task = small_task(120, 40);
  const RationalModel init = init_model(4, 2, 6, 10);
  TrainConfig config = fast_config();
  config.max_epochs = 30;
  config.patience = 30;
  const double star = init_lambda_balance(init, task.train);
  int previous = init.total_transitions() + 1;
  for (double lambda : {star / 4.0, star, 4.0 * star}) {
    const TrainResult result = train(init, task.train, task.dev, config, lambda);
    const int size = count_transitions(prune(result.model, 0.1).structure);
    CHECK(size <= previous);
    previous = size;
  }
}

TEST_CASE("search_structure finetunes the converged structure") {
  const SynthTask task = small_task(120, 40);
  const RationalModel init = init_model(4, 2, 6, 11);  // 8 transitions
  TrainConfig config = fast_config();
  config.max_epochs = 25;
  config.patience = 25;
  LambdaSearchConfig search;
  search.goal_transitions = 4;
  search.tolerance = 2;
  search.max_restarts = 20;
  const double start = init_lambda_balance(init, task.train);
  const StructureSearchResult result =
      search_structure(init, task.train, task.dev, config, search, start, 0.1);
  if (result.search.status == LambdaSearchStatus::Converged) {
    CHECK(std::abs(count_transitions(result.pipeline.structure) - 4) <= 2);
    CHECK(result.pipeline.model.total_transitions() == count_transitions(result.pipeline.structure));
  } else {
    WARN("lambda search did not converge on the small task");
  }
}

TEST_CASE("hyperparameter draws are sorted by learning rate and stay in range") {
  const auto configs = sample_hyperparams(TrainConfig{}, 20, 4);
  REQUIRE(configs.size() == 20);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    configs[i].validate();
    if (i > 0) CHECK(configs[i].learning_rate >= configs[i - 1].learning_rate);
  }
}

TEST_SUITE_END();
