#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rrnn/batch.hpp"
#include "rrnn/data.hpp"
#include "rrnn/group_lasso.hpp"
#include "rrnn/model.hpp"
#include "rrnn/prune.hpp"

namespace rrnn {

/// Knobs for one training run. The learning rate is constant for the
/// whole run: no schedule, regularized or not.
struct TrainConfig {
  double learning_rate = 0.05;      // [7e-3, 0.5]
  double embedding_dropout = 0.0;   // [0, 0.5]
  double recurrent_dropout = 0.0;   // [0, 0.5]
  double vertical_dropout = 0.0;    // [0, 0.5]; between layers, so a no-op for this single-layer model
  double l2_classifier = 0.0;       // [0, 0.5], classifier head only
  double weight_decay = 1e-6;       // [1e-7, 1e-5], decoupled, all parameters
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double gradient_clip_norm = 1.0;  // global-norm clip
  int max_epochs = 60;
  int patience = 10;                // early stopping on dev accuracy
  int batch_size = 32;
  std::uint64_t rng_seed = 0;
  double report_epsilon = 0.1;      // threshold for the surviving-count column
  Exec exec = Exec::Parallel;

  void validate() const;  // throws std::invalid_argument outside the ranges above
};

struct EpochStats {
  int epoch = 0;               // 1-based
  double train_loss = 0.0;     // mean logistic loss over the epoch
  double penalty_value = 0.0;  // lambda-scaled group penalty after the epoch
  double dev_accuracy = 0.0;
  int surviving_transitions = 0;  // structure size at report_epsilon
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // epoch the returned snapshot came from
};

/// Thrown when an epoch hits non-finite values; carries the history so
/// lambda search can react.
struct TrainDiverged : std::runtime_error {
  TrainHistory history;
  TrainDiverged(const std::string& what, TrainHistory h) : std::runtime_error(what), history(std::move(h)) {}
};

struct AdamState {
  long long step = 0;
  Vec m, v;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One Adam update with bias correction and decoupled weight decay.
/// Throws std::invalid_argument naming the offending parameter index on
/// a non-finite gradient.
void adam_step(std::span<double* const> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& config);

struct TrainResult {
  RationalModel model;        // best-dev snapshot; what the pipeline consumes
  RationalModel final_model;  // parameters after the last epoch
  TrainHistory history;
};

/// Minibatch subgradient Adam on mean logistic loss + lambda * group
/// penalty (+ l2 on the classifier head). Early-stops on dev accuracy
/// with patience; among equal-accuracy epochs the snapshot prefers the
/// smaller penalty. Emits one log line per epoch when log is given.
TrainResult train(const RationalModel& init, std::span<const EmbeddedDoc> train_docs,
                  std::span<const EmbeddedDoc> dev_docs, const TrainConfig& config, double lambda,
                  std::ostream* log = nullptr);

struct PipelineResult {
  RationalModel model;  // finetuned compact model (stage 3)
  PrunedStructure structure;
  PruneReport prune_report;
  TrainHistory stage1_history;
  TrainHistory stage3_history;
  bool empty_structure = false;  // every WFSA eliminated; stage 3 skipped
};

/// Stage 1: fit with the group lasso penalty. Stage 2: prune groups
/// under epsilon. Stage 3: finetune the compact model with lambda = 0
/// under the same config.
PipelineResult three_stage_pipeline(const RationalModel& init, std::span<const EmbeddedDoc> train_docs,
                                    std::span<const EmbeddedDoc> dev_docs, const TrainConfig& config,
                                    double lambda, double epsilon = 0.1, std::ostream* log = nullptr);

struct LambdaSearchConfig {
  int goal_transitions = 0;
  int tolerance = 10;
  double lambda_lower_bound = 1e-9;
  double lambda_upper_bound = 1e2;
  int max_restarts = 60;

  void validate() const;
};

enum class LambdaSearchStatus {
  Converged,
  BoundExit,   // lambda left [lower, upper]; hyperparameter draw is discarded
  StepLimit,   // non-termination guard
};

struct LambdaSearchResult {
  LambdaSearchStatus status = LambdaSearchStatus::StepLimit;
  double lambda = 0.0;   // final lambda (converged value, or last in-bound one)
  int steps = 0;         // doubling/halving moves taken
  int transitions = 0;   // structure size at the final evaluated lambda
};

/// Doubling/halving search over the regularization strength: doubles
/// when the learned structure is too large, halves when too small,
/// stops within tolerance of the goal. size_at must train (or simulate)
/// at the given lambda and report surviving transitions.
LambdaSearchResult lambda_search(const LambdaSearchConfig& config, const std::function<int(double)>& size_at,
                                 double initial_lambda);

struct StructureSearchResult {
  LambdaSearchResult search;
  PipelineResult pipeline;  // valid when search.status == Converged
};

/// lambda_search with the real oracle: stage-1 training plus pruning at
/// epsilon. On convergence the already-sized structure is finetuned.
StructureSearchResult search_structure(const RationalModel& init, std::span<const EmbeddedDoc> train_docs,
                                       std::span<const EmbeddedDoc> dev_docs, const TrainConfig& config,
                                       const LambdaSearchConfig& search, double initial_lambda,
                                       double epsilon = 0.1, std::ostream* log = nullptr);

/// Recommended starting strength: mean training loss at initialization
/// divided by the unscaled penalty, so the two objective terms start
/// equal. Throws on a zero-penalty initialization.
double init_lambda_balance(const RationalModel& model, std::span<const EmbeddedDoc> train_docs,
                           Exec exec = Exec::Parallel);

/// Uniform draws from the published hyperparameter ranges, sorted by
/// increasing learning rate. Fields outside the ranges (epochs, seed,
/// batch size) copy from base.
std::vector<TrainConfig> sample_hyperparams(const TrainConfig& base, int draws, std::uint64_t seed);

}  // namespace rrnn
