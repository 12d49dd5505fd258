#include "rrnn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace rrnn {

RationalModel init_model(std::span<const int> wfsa_sizes, int d_emb, std::uint64_t seed) {
  if (d_emb < 1) throw std::invalid_argument("init_model: d_emb must be positive");
  if (wfsa_sizes.empty()) throw std::invalid_argument("init_model: need at least one WFSA");
  RationalModel model;
  model.d_emb = d_emb;
  std::mt19937_64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_emb));
  std::uniform_real_distribution<double> uniform(-scale, scale);
  for (int k : wfsa_sizes) {
    if (k < 1) throw std::invalid_argument("init_model: every WFSA needs at least one transition");
    WfsaParams wfsa;
    wfsa.states.resize(k);
    for (auto& state : wfsa.states) {
      state.self_loop_weight.resize(d_emb);
      state.main_weight.resize(d_emb);
      for (auto& v : state.self_loop_weight) v = uniform(rng);
      for (auto& v : state.main_weight) v = uniform(rng);
    }
    model.wfsas.push_back(std::move(wfsa));
  }
  model.classifier_weight.assign(wfsa_sizes.size(), 0.0);
  return model;
}

RationalModel init_model(int num_wfsas, int transitions_per_wfsa, int d_emb, std::uint64_t seed) {
  std::vector<int> sizes(num_wfsas, transitions_per_wfsa);
  return init_model(sizes, d_emb, seed);
}

RationalModel zeros_like(const RationalModel& model) {
  RationalModel z;
  z.d_emb = model.d_emb;
  z.wfsas.resize(model.wfsas.size());
  for (std::size_t j = 0; j < model.wfsas.size(); ++j) {
    z.wfsas[j].states.resize(model.wfsas[j].states.size());
    for (auto& state : z.wfsas[j].states) {
      state.self_loop_weight.assign(model.d_emb, 0.0);
      state.main_weight.assign(model.d_emb, 0.0);
    }
  }
  z.classifier_weight.assign(model.classifier_weight.size(), 0.0);
  return z;
}

std::vector<double*> collect_params(RationalModel& model) {
  std::vector<double*> out;
  out.reserve(num_params(model));
  for (auto& wfsa : model.wfsas) {
    for (auto& state : wfsa.states) {
      for (auto& v : state.self_loop_weight) out.push_back(&v);
      out.push_back(&state.self_loop_bias);
      for (auto& v : state.main_weight) out.push_back(&v);
      out.push_back(&state.main_bias);
    }
  }
  for (auto& v : model.classifier_weight) out.push_back(&v);
  out.push_back(&model.classifier_bias);
  return out;
}

std::size_t num_params(const RationalModel& model) {
  std::size_t n = 0;
  for (const auto& wfsa : model.wfsas) n += wfsa.states.size() * 2 * (model.d_emb + 1);
  return n + model.classifier_weight.size() + 1;
}

Vec flatten(const RationalModel& model) {
  Vec out;
  out.reserve(num_params(model));
  for (const double* p : collect_params(const_cast<RationalModel&>(model))) out.push_back(*p);
  return out;
}

void unflatten(RationalModel& model, std::span<const double> values) {
  auto ptrs = collect_params(model);
  if (ptrs.size() != values.size()) throw std::invalid_argument("unflatten: size mismatch");
  for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = values[i];
}

void axpy_params(RationalModel& acc, const RationalModel& g, double scale) {
  auto dst = collect_params(acc);
  auto src = collect_params(const_cast<RationalModel&>(g));
  if (dst.size() != src.size()) throw std::invalid_argument("axpy_params: layout mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] += scale * *src[i];
}

GateValues transition_weights(const StateParams& state, std::span<const double> z) {
  const double f = sigmoid(dot(state.self_loop_weight, z) + state.self_loop_bias);
  const double pre_main = dot(state.main_weight, z) + state.main_bias;
  return {f, (1.0 - f) * pre_main, pre_main};
}

double doc_score(const WfsaParams& wfsa, std::span<const Vec> doc) {
  if (doc.empty()) throw std::invalid_argument("doc_score: empty document");
  const int k = wfsa.num_transitions();
  std::vector<TimestepWeights> weights(doc.size());
  for (std::size_t t = 0; t < doc.size(); ++t) {
    weights[t].self_loop.resize(k);
    weights[t].main.resize(k);
    for (int i = 0; i < k; ++i) {
      const GateValues g = transition_weights(wfsa.states[i], doc[t]);
      weights[t].self_loop[i] = g.self_loop;
      weights[t].main[i] = g.main;
    }
  }
  return forward_score(wfsa.shape(), weights).total;
}

DropoutPlan sample_dropout(const RationalModel& model, int num_tokens, double p_embed, double p_recurrent,
                           std::mt19937_64& rng) {
  DropoutPlan plan;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  if (p_embed > 0.0) {
    plan.token_scale.resize(num_tokens);
    const double keep = 1.0 / (1.0 - p_embed);
    for (auto& s : plan.token_scale) s = uniform(rng) < p_embed ? 0.0 : keep;
  }
  if (p_recurrent > 0.0) {
    plan.u_scale.resize(model.wfsas.size());
    const double keep = 1.0 / (1.0 - p_recurrent);
    for (std::size_t j = 0; j < model.wfsas.size(); ++j) {
      plan.u_scale[j].resize(static_cast<std::size_t>(num_tokens) * model.wfsas[j].num_transitions());
      for (auto& s : plan.u_scale[j]) s = uniform(rng) < p_recurrent ? 0.0 : keep;
    }
  }
  return plan;
}

ForwardTrace model_forward(const RationalModel& model, std::span<const Vec> doc, const DropoutPlan* dropout) {
  if (doc.empty()) throw std::invalid_argument("model_forward: empty document");
  const int n = static_cast<int>(doc.size());
  ForwardTrace trace;
  trace.tokens.resize(n);
  for (int t = 0; t < n; ++t) {
    if (static_cast<int>(doc[t].size()) != model.d_emb)
      throw std::invalid_argument("model_forward: embedding dimension mismatch");
    trace.tokens[t] = doc[t];
    if (dropout && !dropout->token_scale.empty()) {
      for (auto& v : trace.tokens[t]) v *= dropout->token_scale[t];
    }
  }
  trace.wfsas.resize(model.wfsas.size());
  trace.scores.resize(model.wfsas.size());
  for (std::size_t j = 0; j < model.wfsas.size(); ++j) {
    const WfsaParams& wfsa = model.wfsas[j];
    const int k = wfsa.num_transitions();
    auto& wt = trace.wfsas[j];
    wt.k = k;
    wt.n = n;
    wt.self_loop.resize(static_cast<std::size_t>(n) * k);
    wt.main.resize(static_cast<std::size_t>(n) * k);
    wt.pre_main.resize(static_cast<std::size_t>(n) * k);
    wt.u_scale.assign(static_cast<std::size_t>(n) * k, 1.0);
    std::vector<TimestepWeights> weights(n);
    for (int t = 0; t < n; ++t) {
      weights[t].self_loop.resize(k);
      weights[t].main.resize(k);
      for (int i = 0; i < k; ++i) {
        const GateValues g = transition_weights(wfsa.states[i], trace.tokens[t]);
        double scale = 1.0;
        if (dropout && !dropout->u_scale.empty()) scale = dropout->u_scale[j][static_cast<std::size_t>(t) * k + i];
        wt.self_loop[static_cast<std::size_t>(t) * k + i] = g.self_loop;
        wt.pre_main[static_cast<std::size_t>(t) * k + i] = g.pre_main;
        wt.u_scale[static_cast<std::size_t>(t) * k + i] = scale;
        const double u = g.main * scale;
        wt.main[static_cast<std::size_t>(t) * k + i] = u;
        weights[t].self_loop[i] = g.self_loop;
        weights[t].main[i] = u;
      }
    }
    const auto table = detail::chain_forward<detail::SumProduct>(wfsa.shape(), weights);
    wt.c.assign(static_cast<std::size_t>(n + 1) * (k + 1), 0.0);
    double total = 0.0;
    for (int t = 0; t <= n; ++t) {
      for (int i = 0; i <= k; ++i) {
        if (const auto& cell = table.at(t, i)) wt.c[static_cast<std::size_t>(t) * (k + 1) + i] = *cell;
      }
    }
    for (int i = 1; i <= k; ++i) total += wt.c[static_cast<std::size_t>(n) * (k + 1) + i];
    trace.scores[j] = total;
  }
  trace.logit = dot(model.classifier_weight, trace.scores) + model.classifier_bias;
  if (!std::isfinite(trace.logit)) throw std::overflow_error("model_forward: non-finite logit");
  return trace;
}

double model_logit(const RationalModel& model, std::span<const Vec> doc) {
  double logit = model.classifier_bias;
  for (std::size_t j = 0; j < model.wfsas.size(); ++j) {
    logit += model.classifier_weight[j] * doc_score(model.wfsas[j], doc);
  }
  if (!std::isfinite(logit)) throw std::overflow_error("model_logit: non-finite logit");
  return logit;
}

RationalModel model_backward(const RationalModel& model, const ForwardTrace& trace, int label) {
  if (label != 1 && label != -1) throw std::invalid_argument("model_backward: label must be +1 or -1");
  if (trace.wfsas.size() != model.wfsas.size() || trace.scores.size() != model.wfsas.size())
    throw std::invalid_argument("model_backward: trace does not match model");
  const int n = static_cast<int>(trace.tokens.size());
  RationalModel grad = zeros_like(model);

  const double y = static_cast<double>(label);
  const double dlogit = -y * sigmoid(-y * trace.logit);
  grad.classifier_bias = dlogit;
  for (std::size_t j = 0; j < model.wfsas.size(); ++j) grad.classifier_weight[j] = dlogit * trace.scores[j];

  for (std::size_t j = 0; j < model.wfsas.size(); ++j) {
    const auto& wt = trace.wfsas[j];
    const int k = model.wfsas[j].num_transitions();
    if (wt.k != k || wt.n != n) throw std::invalid_argument("model_backward: trace does not match model");
    const double dscore = dlogit * model.classifier_weight[j];
    if (dscore == 0.0) continue;

    // adjoints of c_t^(i); c^(0) is the constant 1 and carries none
    Vec dc(static_cast<std::size_t>(n + 1) * (k + 1), 0.0);
    for (int i = 1; i <= k; ++i) dc[static_cast<std::size_t>(n) * (k + 1) + i] = dscore;

    auto& gw = grad.wfsas[j];
    for (int t = n; t >= 1; --t) {
      for (int i = 1; i <= k; ++i) {
        const double dct = dc[static_cast<std::size_t>(t) * (k + 1) + i];
        if (dct == 0.0) continue;
        const std::size_t ti = static_cast<std::size_t>(t - 1) * k + (i - 1);
        const double f = wt.self_loop[ti];
        const double u = wt.main[ti];
        const double pre_main = wt.pre_main[ti];
        const double scale = wt.u_scale[ti];
        const double c_stay = wt.c[static_cast<std::size_t>(t - 1) * (k + 1) + i];
        const double c_from = wt.c[static_cast<std::size_t>(t - 1) * (k + 1) + (i - 1)];

        dc[static_cast<std::size_t>(t - 1) * (k + 1) + i] += dct * f;
        if (i > 1) dc[static_cast<std::size_t>(t - 1) * (k + 1) + (i - 1)] += dct * u;

        const double du = dct * c_from;               // d/d u_eff
        const double dpre_main = du * (1.0 - f) * scale;
        const double df = dct * c_stay - du * pre_main * scale;
        const double dpre_self = df * f * (1.0 - f);

        auto& gs = gw.states[i - 1];
        const Vec& z = trace.tokens[t - 1];
        for (int e = 0; e < model.d_emb; ++e) {
          gs.self_loop_weight[e] += dpre_self * z[e];
          gs.main_weight[e] += dpre_main * z[e];
        }
        gs.self_loop_bias += dpre_self;
        gs.main_bias += dpre_main;
      }
    }
  }
  return grad;
}

double replay_logit(const RationalModel& model, const ForwardTrace& trace) {
  const int n = static_cast<int>(trace.tokens.size());
  Vec scores(trace.wfsas.size(), 0.0);
  for (std::size_t j = 0; j < trace.wfsas.size(); ++j) {
    const auto& wt = trace.wfsas[j];
    const int k = wt.k;
    std::vector<TimestepWeights> weights(n);
    for (int t = 0; t < n; ++t) {
      weights[t].self_loop.assign(wt.self_loop.begin() + static_cast<std::ptrdiff_t>(t) * k,
                                  wt.self_loop.begin() + static_cast<std::ptrdiff_t>(t + 1) * k);
      weights[t].main.assign(wt.main.begin() + static_cast<std::ptrdiff_t>(t) * k,
                             wt.main.begin() + static_cast<std::ptrdiff_t>(t + 1) * k);
    }
    scores[j] = forward_score(WfsaShape(k), weights).total;
  }
  return dot(model.classifier_weight, scores) + model.classifier_bias;
}

namespace {

template <class Model, class View, class Ptr>
std::vector<View> build_group_view(Model& model) {
  std::vector<View> groups;
  groups.reserve(static_cast<std::size_t>(model.total_transitions()));
  for (std::size_t j = 0; j < model.wfsas.size(); ++j) {
    auto& wfsa = model.wfsas[j];
    for (std::size_t s = 0; s < wfsa.states.size(); ++s) {
      auto& state = wfsa.states[s];
      View g;
      g.wfsa_index = static_cast<int>(j);
      g.state_index = static_cast<int>(s) + 1;
      g.values.reserve(2 * (model.d_emb + 1));
      for (auto& v : state.self_loop_weight) g.values.push_back(const_cast<Ptr>(&v));
      g.values.push_back(const_cast<Ptr>(&state.self_loop_bias));
      for (auto& v : state.main_weight) g.values.push_back(const_cast<Ptr>(&v));
      g.values.push_back(const_cast<Ptr>(&state.main_bias));
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

}  // namespace

std::vector<GroupView> group_view(RationalModel& model) {
  return build_group_view<RationalModel, GroupView, double*>(model);
}

std::vector<ConstGroupView> group_view(const RationalModel& model) {
  return build_group_view<const RationalModel, ConstGroupView, const double*>(model);
}

}  // namespace rrnn
