#include "rrnn/io.hpp"

#include <fstream>

#include <json.hpp>

namespace rrnn {

namespace {

using nlohmann::json;

json read_json(const std::string& path, const char* expected_format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (doc.value("format", "") != expected_format)
    throw std::runtime_error(path + ": expected format '" + expected_format + "'");
  if (doc.value("schema_version", 0) != 1)
    throw std::runtime_error(path + ": unsupported schema_version");
  return doc;
}

void write_json(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace

void save_model(const RationalModel& model, const std::string& path) {
  json doc;
  doc["format"] = "rrnn-model";
  doc["schema_version"] = 1;
  doc["d_emb"] = model.d_emb;
  doc["classifier_weight"] = model.classifier_weight;
  doc["classifier_bias"] = model.classifier_bias;
  json wfsas = json::array();
  for (const auto& wfsa : model.wfsas) {
    json states = json::array();
    for (const auto& s : wfsa.states) {
      states.push_back({{"self_loop_weight", s.self_loop_weight},
                        {"self_loop_bias", s.self_loop_bias},
                        {"main_weight", s.main_weight},
                        {"main_bias", s.main_bias}});
    }
    wfsas.push_back({{"states", std::move(states)}});
  }
  doc["wfsas"] = std::move(wfsas);
  write_json(doc, path);
}

RationalModel load_model(const std::string& path) {
  const json doc = read_json(path, "rrnn-model");
  RationalModel model;
  model.d_emb = doc.at("d_emb").get<int>();
  model.classifier_weight = doc.at("classifier_weight").get<Vec>();
  model.classifier_bias = doc.at("classifier_bias").get<double>();
  for (const auto& w : doc.at("wfsas")) {
    WfsaParams wfsa;
    for (const auto& s : w.at("states")) {
      StateParams state;
      state.self_loop_weight = s.at("self_loop_weight").get<Vec>();
      state.self_loop_bias = s.at("self_loop_bias").get<double>();
      state.main_weight = s.at("main_weight").get<Vec>();
      state.main_bias = s.at("main_bias").get<double>();
      if (static_cast<int>(state.self_loop_weight.size()) != model.d_emb ||
          static_cast<int>(state.main_weight.size()) != model.d_emb)
        throw std::runtime_error(path + ": weight vector does not match d_emb");
      wfsa.states.push_back(std::move(state));
    }
    if (wfsa.states.empty()) throw std::runtime_error(path + ": WFSA with no states");
    model.wfsas.push_back(std::move(wfsa));
  }
  if (model.classifier_weight.size() != model.wfsas.size())
    throw std::runtime_error(path + ": classifier width does not match WFSA count");
  return model;
}

void save_history(const TrainHistory& history, const std::string& path) {
  json doc;
  doc["format"] = "rrnn-history";
  doc["schema_version"] = 1;
  doc["best_epoch"] = history.best_epoch;
  json epochs = json::array();
  for (const auto& e : history.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"penalty", e.penalty_value},
                      {"dev_accuracy", e.dev_accuracy},
                      {"surviving_transitions", e.surviving_transitions},
                      {"seconds", e.seconds}});
  }
  doc["epochs"] = std::move(epochs);
  write_json(doc, path);
}

TrainHistory load_history(const std::string& path) {
  const json doc = read_json(path, "rrnn-history");
  TrainHistory history;
  history.best_epoch = doc.at("best_epoch").get<int>();
  for (const auto& e : doc.at("epochs")) {
    EpochStats stats;
    stats.epoch = e.at("epoch").get<int>();
    stats.train_loss = e.at("train_loss").get<double>();
    stats.penalty_value = e.at("penalty").get<double>();
    stats.dev_accuracy = e.at("dev_accuracy").get<double>();
    stats.surviving_transitions = e.at("surviving_transitions").get<int>();
    stats.seconds = e.at("seconds").get<double>();
    history.epochs.push_back(stats);
  }
  return history;
}

void save_prune_report(const PruneReport& report, const PrunedStructure& structure, const std::string& path) {
  json doc;
  doc["format"] = "rrnn-prune-report";
  doc["schema_version"] = 1;
  doc["epsilon"] = report.epsilon;
  json wfsas = json::array();
  for (const auto& w : report.wfsas) {
    wfsas.push_back({{"index", w.wfsa_index},
                     {"group_norms", w.norms},
                     {"surviving_states", w.surviving_states},
                     {"suffix_violation", w.suffix_violation},
                     {"cascaded_states", w.cascaded_states}});
  }
  doc["wfsas"] = std::move(wfsas);
  doc["warnings"] = report.warnings;
  doc["surviving_states"] = structure.surviving_states;
  doc["total_transitions"] = count_transitions(structure);
  write_json(doc, path);
}

void save_summary(const RunSummary& summary, const std::string& path) {
  json doc;
  doc["format"] = "rrnn-run";
  doc["schema_version"] = 1;
  doc["method"] = summary.method;
  doc["transitions"] = summary.transitions;
  doc["dev_accuracy"] = summary.dev_accuracy;
  if (summary.test_accuracy) doc["test_accuracy"] = *summary.test_accuracy;
  doc["lambda"] = summary.lambda;
  doc["seed"] = summary.seed;
  write_json(doc, path);
}

RunSummary load_summary(const std::string& path) {
  const json doc = read_json(path, "rrnn-run");
  RunSummary summary;
  summary.method = doc.at("method").get<std::string>();
  summary.transitions = doc.at("transitions").get<int>();
  summary.dev_accuracy = doc.at("dev_accuracy").get<double>();
  if (doc.contains("test_accuracy")) summary.test_accuracy = doc.at("test_accuracy").get<double>();
  summary.lambda = doc.at("lambda").get<double>();
  summary.seed = doc.at("seed").get<std::uint64_t>();
  return summary;
}

}  // namespace rrnn
