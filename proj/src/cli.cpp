#include "rrnn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "rrnn/data.hpp"
#include "rrnn/io.hpp"
#include "rrnn/train.hpp"
#include "rrnn/visualize.hpp"

namespace rrnn {

namespace {

using nlohmann::json;

struct RunConfig {
  TrainConfig train;
  double lambda = 0.0;
  double epsilon = 0.1;
  LambdaSearchConfig search;
  SynthConfig synth;
  std::vector<int> wfsa_sizes = std::vector<int>(8, 4);
  int min_tokens = 5;
};

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) throw std::runtime_error("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void maybe(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

RunConfig load_run_config(const std::string& path) {
  RunConfig config;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json doc;
  in >> doc;
  check_keys(doc, {"schema_version", "train", "penalty", "search", "synth", "model", "data"}, "top level");
  if (doc.value("schema_version", 0) != 1) throw std::runtime_error("config: schema_version must be 1");

  if (doc.contains("train")) {
    const json& t = doc["train"];
    check_keys(t,
               {"learning_rate", "embedding_dropout", "recurrent_dropout", "vertical_dropout", "l2_classifier",
                "weight_decay",
                "adam_beta1", "adam_beta2", "adam_epsilon", "gradient_clip_norm", "max_epochs", "patience",
                "batch_size", "rng_seed"},
               "train");
    maybe(t, "learning_rate", config.train.learning_rate);
    maybe(t, "embedding_dropout", config.train.embedding_dropout);
    maybe(t, "recurrent_dropout", config.train.recurrent_dropout);
    maybe(t, "vertical_dropout", config.train.vertical_dropout);
    maybe(t, "l2_classifier", config.train.l2_classifier);
    maybe(t, "weight_decay", config.train.weight_decay);
    maybe(t, "adam_beta1", config.train.adam_beta1);
    maybe(t, "adam_beta2", config.train.adam_beta2);
    maybe(t, "adam_epsilon", config.train.adam_epsilon);
    maybe(t, "gradient_clip_norm", config.train.gradient_clip_norm);
    maybe(t, "max_epochs", config.train.max_epochs);
    maybe(t, "patience", config.train.patience);
    maybe(t, "batch_size", config.train.batch_size);
    maybe(t, "rng_seed", config.train.rng_seed);
  }
  if (doc.contains("penalty")) {
    check_keys(doc["penalty"], {"lambda", "epsilon"}, "penalty");
    maybe(doc["penalty"], "lambda", config.lambda);
    maybe(doc["penalty"], "epsilon", config.epsilon);
  }
  if (doc.contains("search")) {
    const json& s = doc["search"];
    check_keys(s, {"goal_transitions", "tolerance", "lambda_lower_bound", "lambda_upper_bound", "max_restarts"},
               "search");
    maybe(s, "goal_transitions", config.search.goal_transitions);
    maybe(s, "tolerance", config.search.tolerance);
    maybe(s, "lambda_lower_bound", config.search.lambda_lower_bound);
    maybe(s, "lambda_upper_bound", config.search.lambda_upper_bound);
    maybe(s, "max_restarts", config.search.max_restarts);
  }
  if (doc.contains("synth")) {
    const json& s = doc["synth"];
    check_keys(s,
               {"vocab_size", "embedding_dim", "pattern", "max_gap", "doc_len_min", "doc_len_max", "num_train",
                "num_dev", "num_test", "rng_seed"},
               "synth");
    maybe(s, "vocab_size", config.synth.vocab_size);
    maybe(s, "embedding_dim", config.synth.embedding_dim);
    maybe(s, "pattern", config.synth.pattern);
    maybe(s, "max_gap", config.synth.max_gap);
    maybe(s, "doc_len_min", config.synth.doc_len_min);
    maybe(s, "doc_len_max", config.synth.doc_len_max);
    maybe(s, "num_train", config.synth.num_train);
    maybe(s, "num_dev", config.synth.num_dev);
    maybe(s, "num_test", config.synth.num_test);
    maybe(s, "rng_seed", config.synth.rng_seed);
  }
  if (doc.contains("model")) {
    const json& m = doc["model"];
    check_keys(m, {"num_wfsas", "transitions_per_wfsa", "wfsa_sizes"}, "model");
    if (m.contains("wfsa_sizes")) {
      config.wfsa_sizes = m.at("wfsa_sizes").get<std::vector<int>>();
    } else {
      int num = 8, per = 4;
      maybe(m, "num_wfsas", num);
      maybe(m, "transitions_per_wfsa", per);
      config.wfsa_sizes.assign(num, per);
    }
  }
  if (doc.contains("data")) {
    check_keys(doc["data"], {"min_tokens"}, "data");
    maybe(doc["data"], "min_tokens", config.min_tokens);
  }
  return config;
}

bool verbose_logging() {
  const char* env = std::getenv("RRNN_LOG");
  return env == nullptr || std::string(env) != "quiet";
}

struct LoadedData {
  std::vector<EmbeddedDoc> train, dev, test;
  std::vector<LabeledDoc> train_raw, dev_raw, test_raw;
  EmbeddingTable table{1, {}};
};

LoadedData load_data(const std::string& dir, const std::string& embeddings_path, int min_tokens) {
  namespace fs = std::filesystem;
  LoadedData data;
  data.table = load_embeddings(embeddings_path);
  auto load_split = [&](const char* name, bool required) {
    DatasetLoad split;
    const fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) {
      if (required) throw std::runtime_error("missing dataset file: " + p.string());
      return split;
    }
    split = load_dataset(p.string(), min_tokens);
    if (split.dropped_short > 0 && verbose_logging())
      std::cerr << "note: dropped " << split.dropped_short << " short doc(s) from " << p.string() << "\n";
    if (split.docs.empty() && verbose_logging()) std::cerr << "warning: empty dataset " << p.string() << "\n";
    return split;
  };
  data.train_raw = load_split("train.tsv", true).docs;
  data.dev_raw = load_split("dev.tsv", true).docs;
  data.test_raw = load_split("test.tsv", false).docs;
  data.train = embed_dataset(data.train_raw, data.table);
  data.dev = embed_dataset(data.dev_raw, data.table);
  data.test = embed_dataset(data.test_raw, data.table);
  return data;
}

RunSummary make_summary(const RationalModel& model, const LoadedData& data, const RunConfig& config,
                        const std::string& tag, double lambda, Exec exec) {
  RunSummary summary;
  summary.method = tag;
  summary.transitions = model.total_transitions();
  summary.dev_accuracy = data.dev.empty() ? 0.0 : accuracy(model, data.dev, exec);
  if (!data.test.empty()) summary.test_accuracy = accuracy(model, data.test, exec);
  summary.lambda = lambda;
  summary.seed = config.train.rng_seed;
  return summary;
}

// shared flags
struct CommonArgs {
  std::string config_path, data_dir, embeddings_path, out_path, model_path, tag = "default";
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<int> min_tokens;
  bool serial = false;
  bool lambda_balance = false;

  RunConfig resolve() const {
    RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) config.train.rng_seed = *seed;
    if (lambda) config.lambda = *lambda;
    if (min_tokens) config.min_tokens = *min_tokens;
    config.train.exec = serial ? Exec::Serial : Exec::Parallel;
    return config;
  }
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_data, bool needs_out) {
  cmd->add_option("--config", args.config_path, "JSON run config (flags override it)");
  if (needs_data) {
    cmd->add_option("--data", args.data_dir, "directory with train.tsv/dev.tsv[/test.tsv]")->required();
    cmd->add_option("--embeddings", args.embeddings_path, "embedding table file")->required();
    cmd->add_option("--min-tokens", args.min_tokens, "drop docs shorter than this (default 5)");
  }
  if (needs_out) cmd->add_option("--out", args.out_path, "output path")->required();
  cmd->add_option("--seed", args.seed, "RNG seed (overrides config)");
  cmd->add_option("--tag", args.tag, "method tag recorded in the run summary");
  cmd->add_flag("--serial", args.serial, "run batch kernels serially");
}

std::ostream* log_stream() { return verbose_logging() ? &std::cerr : nullptr; }

int run_synth(const CommonArgs& args, const std::string& out_dir) {
  RunConfig config = args.resolve();
  if (args.seed) config.synth.rng_seed = *args.seed;
  if (config.synth.pattern.empty()) config.synth.pattern = {"tok3", "tok7"};
  const SynthData data = synth_generate(config.synth);
  write_synth(data, out_dir);
  std::cout << "wrote " << data.train.size() << "/" << data.dev.size() << "/" << data.test.size()
            << " docs to " << out_dir << "\n";
  return 0;
}

void write_train_artifacts(const RationalModel& model, const TrainHistory& history, const LoadedData& data,
                           const RunConfig& config, const CommonArgs& args, double lambda) {
  save_model(model, args.out_path);
  save_history(history, args.out_path + ".history.json");
  save_summary(make_summary(model, data, config, args.tag, lambda, config.train.exec),
               args.out_path + ".summary.json");
}

int run_train(const CommonArgs& args) {
  const RunConfig config = args.resolve();
  const LoadedData data = load_data(args.data_dir, args.embeddings_path, config.min_tokens);
  RationalModel init = init_model(config.wfsa_sizes, data.table.dim(), config.train.rng_seed);
  double lambda = config.lambda;
  if (args.lambda_balance) lambda = init_lambda_balance(init, data.train, config.train.exec);
  TrainResult result = train(init, data.train, data.dev, config.train, lambda, log_stream());
  write_train_artifacts(result.model, result.history, data, config, args, lambda);
  std::cout << "model saved to " << args.out_path << " (dev accuracy "
            << accuracy(result.model, data.dev, config.train.exec) << ")\n";
  return 0;
}

int run_prune(const CommonArgs& args, double epsilon_flag, bool epsilon_given) {
  const RunConfig config = args.resolve();
  const double epsilon = epsilon_given ? epsilon_flag : config.epsilon;
  const RationalModel model = load_model(args.model_path);
  PruneResult result = prune(model, epsilon);
  save_model(result.compact, args.out_path);
  save_prune_report(result.report, result.structure, args.out_path + ".report.json");
  std::cout << result.report.to_text();
  std::cout << "surviving transitions: " << count_transitions(result.structure) << "\n";
  return 0;
}

int run_finetune(const CommonArgs& args) {
  const RunConfig config = args.resolve();
  const LoadedData data = load_data(args.data_dir, args.embeddings_path, config.min_tokens);
  const RationalModel compact = load_model(args.model_path);
  if (compact.num_wfsas() == 0) throw std::runtime_error("finetune: model has no WFSAs left");
  TrainResult result = train(compact, data.train, data.dev, config.train, 0.0, log_stream());
  write_train_artifacts(result.model, result.history, data, config, args, 0.0);
  std::cout << "finetuned model saved to " << args.out_path << "\n";
  return 0;
}

int run_pipeline(const CommonArgs& args, double epsilon_flag, bool epsilon_given) {
  const RunConfig config = args.resolve();
  const double epsilon = epsilon_given ? epsilon_flag : config.epsilon;
  const LoadedData data = load_data(args.data_dir, args.embeddings_path, config.min_tokens);
  RationalModel init = init_model(config.wfsa_sizes, data.table.dim(), config.train.rng_seed);
  double lambda = config.lambda;
  if (args.lambda_balance) lambda = init_lambda_balance(init, data.train, config.train.exec);
  PipelineResult result =
      three_stage_pipeline(init, data.train, data.dev, config.train, lambda, epsilon, log_stream());
  save_model(result.model, args.out_path);
  save_history(result.stage1_history, args.out_path + ".stage1.history.json");
  save_history(result.stage3_history, args.out_path + ".history.json");
  save_prune_report(result.prune_report, result.structure, args.out_path + ".report.json");
  save_summary(make_summary(result.model, data, config, args.tag, lambda, config.train.exec),
               args.out_path + ".summary.json");
  if (result.empty_structure) {
    std::cout << "pipeline: all WFSAs eliminated; classifier-bias-only model saved to " << args.out_path << "\n";
  } else {
    std::cout << "pipeline: " << count_transitions(result.structure) << " transitions kept, model saved to "
              << args.out_path << "\n";
  }
  return 0;
}

int run_search(const CommonArgs& args, int goal_flag, bool goal_given, int tolerance_flag,
               bool tolerance_given, double initial_flag, bool initial_given, int draws) {
  RunConfig config = args.resolve();
  if (goal_given) config.search.goal_transitions = goal_flag;
  if (tolerance_given) config.search.tolerance = tolerance_flag;
  const LoadedData data = load_data(args.data_dir, args.embeddings_path, config.min_tokens);
  std::ostream* log = log_stream();

  // single config by default; with --draws N, random search sorted by
  // increasing learning rate, discarding draws whose lambda search
  // exits the bounds
  std::vector<TrainConfig> candidates;
  if (draws <= 1) {
    candidates.push_back(config.train);
  } else {
    candidates = sample_hyperparams(config.train, draws, config.train.rng_seed);
  }

  for (std::size_t attempt = 0; attempt < candidates.size(); ++attempt) {
    const TrainConfig& tc = candidates[attempt];
    RationalModel init = init_model(config.wfsa_sizes, data.table.dim(), tc.rng_seed);
    double initial = initial_given ? initial_flag : init_lambda_balance(init, data.train, tc.exec);
    initial = std::clamp(initial, config.search.lambda_lower_bound, config.search.lambda_upper_bound);
    StructureSearchResult result =
        search_structure(init, data.train, data.dev, tc, config.search, initial, config.epsilon, log);
    if (result.search.status == LambdaSearchStatus::Converged) {
      save_model(result.pipeline.model, args.out_path);
      save_prune_report(result.pipeline.prune_report, result.pipeline.structure, args.out_path + ".report.json");
      save_history(result.pipeline.stage3_history, args.out_path + ".history.json");
      RunSummary summary = make_summary(result.pipeline.model, data, config, args.tag, result.search.lambda, tc.exec);
      summary.seed = tc.rng_seed;
      save_summary(summary, args.out_path + ".summary.json");
      std::cout << "search converged: lambda " << result.search.lambda << ", "
                << count_transitions(result.pipeline.structure) << " transitions, model saved to " << args.out_path
                << "\n";
      return 0;
    }
    if (log)
      *log << "search: draw " << attempt + 1 << " failed ("
           << (result.search.status == LambdaSearchStatus::BoundExit ? "lambda left bounds" : "step limit")
           << ")\n";
  }
  std::cerr << "search failed: no hyperparameter draw reached the goal within lambda bounds\n";
  return 1;
}

int run_visualize(const CommonArgs& args, int top_n, const std::string& split, const std::string& format) {
  const RunConfig config = args.resolve();
  const RationalModel model = load_model(args.model_path);
  if (model.num_wfsas() == 0) throw std::runtime_error("visualize: model has no WFSAs");
  const LoadedData data = load_data(args.data_dir, args.embeddings_path, config.min_tokens);
  const std::vector<LabeledDoc>* corpus = &data.train_raw;
  if (split == "dev")
    corpus = &data.dev_raw;
  else if (split == "test")
    corpus = &data.test_raw;
  else if (split != "train")
    throw std::runtime_error("visualize: --split must be train, dev or test");
  const auto phrases = top_bottom_phrases(model, *corpus, data.table, top_n, config.train.exec);
  std::cout << (format == "tsv" ? render_pattern_table_tsv(phrases) : render_pattern_table(phrases));
  return 0;
}

int run_tradeoff(const std::vector<std::string>& summary_paths, const std::string& out_path) {
  // group runs by method tag, mean/std across seeds
  std::map<std::string, std::vector<RunSummary>> by_method;
  for (const auto& path : summary_paths) {
    RunSummary summary = load_summary(path);
    by_method[summary.method].push_back(std::move(summary));
  }
  std::vector<TradeoffRun> runs;
  for (const auto& [method, group] : by_method) {
    TradeoffRun run;
    run.method = method;
    double at = 0.0, aa = 0.0;
    for (const auto& s : group) {
      at += s.transitions;
      aa += s.test_accuracy.value_or(s.dev_accuracy);
    }
    const double inv = 1.0 / static_cast<double>(group.size());
    run.transitions = at * inv;
    run.accuracy = aa * inv;
    double vt = 0.0, va = 0.0;
    for (const auto& s : group) {
      vt += (s.transitions - run.transitions) * (s.transitions - run.transitions);
      const double a = s.test_accuracy.value_or(s.dev_accuracy);
      va += (a - run.accuracy) * (a - run.accuracy);
    }
    run.transitions_std = std::sqrt(vt * inv);
    run.accuracy_std = std::sqrt(va * inv);
    runs.push_back(run);
  }
  const std::string csv = emit_tradeoff_csv(runs);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << csv;
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"group-lasso structure learning for rational RNNs"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string out_dir, split = "train", format = "text";
  double epsilon = 0.1, initial_lambda = 0.0;
  int top_n = 4, goal = 0, tolerance = 0, draws = 1;
  std::vector<std::string> summaries;

  auto* synth = app.add_subcommand("synth", "generate a planted-pattern dataset");
  synth->add_option("--config", args.config_path, "JSON run config");
  synth->add_option("--seed", args.seed, "RNG seed (overrides config)");
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "stage 1: fit with the group lasso penalty");
  add_common(train_cmd, args, true, true);
  train_cmd->add_option("--lambda", args.lambda, "regularization strength");
  train_cmd->add_flag("--lambda-balance", args.lambda_balance, "pick lambda so loss and penalty start equal");

  auto* prune_cmd = app.add_subcommand("prune", "stage 2: threshold groups and compact the model");
  prune_cmd->add_option("--config", args.config_path, "JSON run config");
  prune_cmd->add_option("--seed", args.seed, "accepted for interface uniformity; pruning is deterministic");
  prune_cmd->add_option("--model", args.model_path, "trained model")->required();
  prune_cmd->add_option("--out", args.out_path, "compact model output")->required();
  auto* eps_opt = prune_cmd->add_option("--epsilon", epsilon, "group norm threshold (default 0.1)");

  auto* finetune_cmd = app.add_subcommand("finetune", "stage 3: retrain the compact model without the penalty");
  add_common(finetune_cmd, args, true, true);
  finetune_cmd->add_option("--model", args.model_path, "compact model to finetune")->required();

  auto* pipeline_cmd = app.add_subcommand("pipeline", "all three stages");
  add_common(pipeline_cmd, args, true, true);
  pipeline_cmd->add_option("--lambda", args.lambda, "regularization strength");
  pipeline_cmd->add_flag("--lambda-balance", args.lambda_balance, "pick lambda so loss and penalty start equal");
  auto* pipe_eps_opt = pipeline_cmd->add_option("--epsilon", epsilon, "group norm threshold (default 0.1)");

  auto* search_cmd = app.add_subcommand("search", "double/halve lambda toward a structure size goal");
  add_common(search_cmd, args, true, true);
  auto* goal_opt = search_cmd->add_option("--goal-transitions", goal, "target surviving transitions");
  auto* tol_opt = search_cmd->add_option("--tolerance", tolerance, "acceptable distance from the goal (default 10)");
  auto* init_opt = search_cmd->add_option("--initial-lambda", initial_lambda,
                                          "starting strength (default: balance loss and penalty)");
  search_cmd->add_option("--draws", draws, "hyperparameter draws (default 1: current config only)");

  auto* viz_cmd = app.add_subcommand("visualize", "top/bottom scoring phrases per WFSA");
  add_common(viz_cmd, args, true, false);
  viz_cmd->add_option("--model", args.model_path, "model to visualize")->required();
  viz_cmd->add_option("--top-n", top_n, "phrases per side (default 4)");
  viz_cmd->add_option("--split", split, "corpus split to scan (default train)");
  viz_cmd->add_option("--format", format, "text or tsv");

  auto* tradeoff_cmd = app.add_subcommand("tradeoff", "aggregate run summaries into a CSV");
  tradeoff_cmd->add_option("--seed", args.seed, "accepted for interface uniformity; aggregation is deterministic");
  tradeoff_cmd->add_option("summaries", summaries, "run summary JSON files")->required();
  tradeoff_cmd->add_option("--out", args.out_path, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints the right (sub)command help
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(args, out_dir);
    if (train_cmd->parsed()) return run_train(args);
    if (prune_cmd->parsed()) return run_prune(args, epsilon, eps_opt->count() > 0);
    if (finetune_cmd->parsed()) return run_finetune(args);
    if (pipeline_cmd->parsed()) return run_pipeline(args, epsilon, pipe_eps_opt->count() > 0);
    if (search_cmd->parsed())
      return run_search(args, goal, goal_opt->count() > 0, tolerance, tol_opt->count() > 0, initial_lambda,
                        init_opt->count() > 0, draws);
    if (viz_cmd->parsed()) return run_visualize(args, top_n, split, format);
    if (tradeoff_cmd->parsed()) return run_tradeoff(summaries, args.out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rrnn
