#include "rrnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace rrnn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void TrainConfig::validate() const {
  require(learning_rate >= 7e-3 && learning_rate <= 0.5, "learning_rate outside [7e-3, 0.5]");
  require(embedding_dropout >= 0.0 && embedding_dropout <= 0.5, "embedding_dropout outside [0, 0.5]");
  require(recurrent_dropout >= 0.0 && recurrent_dropout <= 0.5, "recurrent_dropout outside [0, 0.5]");
  require(vertical_dropout >= 0.0 && vertical_dropout <= 0.5, "vertical_dropout outside [0, 0.5]");
  require(l2_classifier >= 0.0 && l2_classifier <= 0.5, "l2_classifier outside [0, 0.5]");
  require(weight_decay >= 1e-7 && weight_decay <= 1e-5, "weight_decay outside [1e-7, 1e-5]");
  require(gradient_clip_norm > 0.0, "gradient_clip_norm must be positive");
  require(max_epochs >= 1, "max_epochs must be at least 1");
  require(patience >= 0, "patience must be nonnegative");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(report_epsilon >= 0.0, "report_epsilon must be nonnegative");
}

void LambdaSearchConfig::validate() const {
  require(goal_transitions > 0, "goal_transitions must be positive");
  require(tolerance > 0, "tolerance must be positive");
  require(tolerance < goal_transitions, "tolerance must be below goal_transitions");
  require(lambda_lower_bound > 0.0 && lambda_upper_bound > lambda_lower_bound, "bad lambda bounds");
  require(max_restarts >= 1, "max_restarts must be at least 1");
}

void adam_step(std::span<double* const> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& config) {
  require(params.size() == grads.size() && params.size() == state.m.size(), "adam_step: shape mismatch");
  state.step += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g))
      throw std::invalid_argument("adam_step: non-finite gradient for parameter " + std::to_string(i));
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    const double p = *params[i];
    *params[i] = p - config.learning_rate * (m_hat / (std::sqrt(v_hat) + config.adam_epsilon) +
                                             config.weight_decay * p);
  }
}

namespace {

// returns the pre-clip norm so the caller can spot divergence
double clip_global_norm(RationalModel& grad, double max_norm) {
  auto ptrs = collect_params(grad);
  double ss = 0.0;
  for (const double* p : ptrs) ss += *p * *p;
  const double norm = std::sqrt(ss);
  if (std::isfinite(norm) && norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double* p : ptrs) *p *= scale;
  }
  return norm;
}

int structure_size_at(const RationalModel& model, double epsilon) {
  return count_transitions(prune(model, epsilon).structure);
}

}  // namespace

TrainResult train(const RationalModel& init, std::span<const EmbeddedDoc> train_docs,
                  std::span<const EmbeddedDoc> dev_docs, const TrainConfig& config, double lambda,
                  std::ostream* log) {
  config.validate();
  require(!train_docs.empty() && !dev_docs.empty(), "train: empty data split");
  require(lambda >= 0.0, "train: lambda must be nonnegative");
  require(!train_docs.front().tokens.empty() &&
              static_cast<int>(train_docs.front().tokens.front().size()) == init.d_emb,
          "train: embedding dim mismatch");

  RationalModel model = init;
  auto params = collect_params(model);
  AdamState adam(params.size());
  std::mt19937_64 shuffle_rng(config.rng_seed);

  TrainHistory history;
  RationalModel best = model;
  double best_acc = -1.0;
  double best_penalty = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;

  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const PenaltyConfig penalty_config{lambda};
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    DropoutSpec dropout{config.embedding_dropout, config.recurrent_dropout,
                        mix_seed(config.rng_seed, static_cast<std::uint64_t>(epoch))};
    double loss_sum = 0.0;
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        std::span<const std::size_t> batch(order.data() + begin, end - begin);
        BatchGrad bg = batch_gradient(model, train_docs, batch, dropout, config.exec);
        loss_sum += bg.mean_loss * static_cast<double>(batch.size());
        if (lambda > 0.0) axpy_params(bg.grad, penalty_subgradient(model, penalty_config), 1.0);
        if (config.l2_classifier > 0.0) {
          for (std::size_t j = 0; j < model.classifier_weight.size(); ++j)
            bg.grad.classifier_weight[j] += 2.0 * config.l2_classifier * model.classifier_weight[j];
          bg.grad.classifier_bias += 2.0 * config.l2_classifier * model.classifier_bias;
        }
        const double grad_norm = clip_global_norm(bg.grad, config.gradient_clip_norm);
        if (!std::isfinite(grad_norm)) throw std::overflow_error("non-finite gradient norm");
        adam_step(params, flatten(bg.grad), adam, config);
      }

      EpochStats stats;
      stats.epoch = epoch;
      stats.train_loss = loss_sum / static_cast<double>(train_docs.size());
      stats.penalty_value = penalty(model, penalty_config);
      stats.dev_accuracy = accuracy(model, dev_docs, config.exec);
      stats.surviving_transitions = structure_size_at(model, config.report_epsilon);
      stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      history.epochs.push_back(stats);
      if (log) {
        *log << "epoch " << stats.epoch << " loss " << stats.train_loss << " penalty " << stats.penalty_value
             << " dev-acc " << stats.dev_accuracy << " transitions " << stats.surviving_transitions << "\n";
      }

      if (stats.dev_accuracy > best_acc) {
        best_acc = stats.dev_accuracy;
        best_penalty = stats.penalty_value;
        best = model;
        history.best_epoch = epoch;
        epochs_since_improvement = 0;
      } else {
        if (stats.dev_accuracy == best_acc && stats.penalty_value < best_penalty) {
          best_penalty = stats.penalty_value;
          best = model;
          history.best_epoch = epoch;
        }
        ++epochs_since_improvement;
        if (epochs_since_improvement > config.patience) break;
      }
    } catch (const std::overflow_error& e) {
      throw TrainDiverged(std::string("training diverged: ") + e.what(), history);
    }
  }
  return {std::move(best), std::move(model), std::move(history)};
}

PipelineResult three_stage_pipeline(const RationalModel& init, std::span<const EmbeddedDoc> train_docs,
                                    std::span<const EmbeddedDoc> dev_docs, const TrainConfig& config,
                                    double lambda, double epsilon, std::ostream* log) {
  PipelineResult result;
  TrainResult stage1 = train(init, train_docs, dev_docs, config, lambda, log);
  result.stage1_history = std::move(stage1.history);

  PruneResult pruned = prune(stage1.model, epsilon);
  result.structure = std::move(pruned.structure);
  result.prune_report = std::move(pruned.report);

  if (count_transitions(result.structure) == 0) {
    result.empty_structure = true;
    result.model = std::move(pruned.compact);
    if (log) *log << "pipeline: structure empty after pruning; finetune skipped\n";
    return result;
  }
  TrainResult stage3 = train(pruned.compact, train_docs, dev_docs, config, 0.0, log);
  result.model = std::move(stage3.model);
  result.stage3_history = std::move(stage3.history);
  return result;
}

LambdaSearchResult lambda_search(const LambdaSearchConfig& config, const std::function<int(double)>& size_at,
                                 double initial_lambda) {
  config.validate();
  require(initial_lambda >= config.lambda_lower_bound && initial_lambda <= config.lambda_upper_bound,
          "lambda_search: initial lambda outside bounds");
  LambdaSearchResult result;
  double lambda = initial_lambda;
  for (int step = 0; step < config.max_restarts; ++step) {
    const int size = size_at(lambda);
    result.lambda = lambda;
    result.steps = step;
    result.transitions = size;
    if (std::abs(size - config.goal_transitions) <= config.tolerance) {
      result.status = LambdaSearchStatus::Converged;
      return result;
    }
    lambda = size > config.goal_transitions ? lambda * 2.0 : lambda / 2.0;
    if (lambda > config.lambda_upper_bound || lambda < config.lambda_lower_bound) {
      result.status = LambdaSearchStatus::BoundExit;
      result.steps = step + 1;
      return result;
    }
  }
  result.status = LambdaSearchStatus::StepLimit;
  return result;
}

StructureSearchResult search_structure(const RationalModel& init, std::span<const EmbeddedDoc> train_docs,
                                       std::span<const EmbeddedDoc> dev_docs, const TrainConfig& config,
                                       const LambdaSearchConfig& search, double initial_lambda, double epsilon,
                                       std::ostream* log) {
  require(search.goal_transitions <= init.total_transitions(),
          "search_structure: goal exceeds the initial transition count");
  StructureSearchResult result;
  RationalModel last_stage1 = init;
  auto size_at = [&](double lambda) {
    if (log) *log << "lambda-search: training at lambda " << lambda << "\n";
    try {
      TrainResult r = train(init, train_docs, dev_docs, config, lambda, log);
      last_stage1 = std::move(r.model);
    } catch (const TrainDiverged& e) {
      // a diverged run prunes to nothing; the search halves from there
      if (log) *log << "lambda-search: diverged at lambda " << lambda << " (" << e.what() << ")\n";
      last_stage1 = zeros_like(init);
    }
    const int size = structure_size_at(last_stage1, epsilon);
    if (log) *log << "lambda-search: lambda " << lambda << " -> " << size << " transitions\n";
    return size;
  };
  result.search = lambda_search(search, size_at, initial_lambda);
  if (result.search.status != LambdaSearchStatus::Converged) return result;

  PruneResult pruned = prune(last_stage1, epsilon);
  result.pipeline.structure = std::move(pruned.structure);
  result.pipeline.prune_report = std::move(pruned.report);
  if (count_transitions(result.pipeline.structure) == 0) {
    result.pipeline.empty_structure = true;
    result.pipeline.model = std::move(pruned.compact);
    return result;
  }
  TrainResult finetuned = train(pruned.compact, train_docs, dev_docs, config, 0.0, log);
  result.pipeline.model = std::move(finetuned.model);
  result.pipeline.stage3_history = std::move(finetuned.history);
  return result;
}

double init_lambda_balance(const RationalModel& model, std::span<const EmbeddedDoc> train_docs, Exec exec) {
  const double loss = mean_loss(model, train_docs, exec);
  const double p = unscaled_penalty(model);
  if (p == 0.0) throw std::invalid_argument("init_lambda_balance: zero penalty at initialization");
  return loss / p;
}

std::vector<TrainConfig> sample_hyperparams(const TrainConfig& base, int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lr(7e-3, 0.5);
  std::uniform_real_distribution<double> drop(0.0, 0.5);
  std::uniform_real_distribution<double> l2(0.0, 0.5);
  std::uniform_real_distribution<double> wd(1e-7, 1e-5);
  std::vector<TrainConfig> configs(std::max(draws, 0), base);
  for (auto& c : configs) {
    c.learning_rate = lr(rng);
    c.vertical_dropout = drop(rng);
    c.recurrent_dropout = drop(rng);
    c.embedding_dropout = drop(rng);
    c.l2_classifier = l2(rng);
    c.weight_decay = wd(rng);
  }
  std::sort(configs.begin(), configs.end(),
            [](const TrainConfig& a, const TrainConfig& b) { return a.learning_rate < b.learning_rate; });
  return configs;
}

}  // namespace rrnn
