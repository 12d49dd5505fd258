#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rrnn/numeric.hpp"
#include "rrnn/wfsa.hpp"

namespace rrnn {

/// Parameters entering one WFSA state: the gated self-loop on it and the
/// main transition into it. The four pieces form that state's
/// regularization group, flattened as [w..., b_f, v..., b_u].
struct StateParams {
  Vec self_loop_weight;   // w_i
  double self_loop_bias = 0.0;  // b_{f,i}
  Vec main_weight;        // v_i
  double main_bias = 0.0;       // b_{u,i}
};

struct WfsaParams {
  std::vector<StateParams> states;  // states 1..k in chain order

  int num_transitions() const { return static_cast<int>(states.size()); }
  WfsaShape shape() const { return WfsaShape(num_transitions()); }
};

/// d independently parameterized WFSAs plus a linear classifier over
/// their document scores. Also doubles as the gradient container: a
/// gradient has the same layout as the model it differentiates.
struct RationalModel {
  int d_emb = 0;
  std::vector<WfsaParams> wfsas;
  Vec classifier_weight;        // one entry per WFSA
  double classifier_bias = 0.0;

  int num_wfsas() const { return static_cast<int>(wfsas.size()); }
  int total_transitions() const {
    int total = 0;
    for (const auto& w : wfsas) total += w.num_transitions();
    return total;
  }
};

/// Uniform(-1/sqrt(d_emb), 1/sqrt(d_emb)) weights, zero biases, zero
/// classifier. wfsa_sizes[j] is the transition count k of WFSA j.
RationalModel init_model(std::span<const int> wfsa_sizes, int d_emb, std::uint64_t seed);
RationalModel init_model(int num_wfsas, int transitions_per_wfsa, int d_emb, std::uint64_t seed);

RationalModel zeros_like(const RationalModel& model);

// Deterministic parameter order: per WFSA, per state, [w, b_f, v, b_u];
// then classifier weights, then classifier bias. Everything that walks
// all parameters (Adam, finite differences, serialization) uses this.
std::vector<double*> collect_params(RationalModel& model);
std::size_t num_params(const RationalModel& model);
Vec flatten(const RationalModel& model);
void unflatten(RationalModel& model, std::span<const double> values);

/// acc += scale * g, parameter-wise. Layouts must match.
void axpy_params(RationalModel& acc, const RationalModel& g, double scale);

/// f = sigmoid(w.z + b_f), u = (1 - f) * (v.z + b_u).
struct GateValues {
  double self_loop;  // f, in (0,1)
  double main;       // u
  double pre_main;   // v.z + b_u, kept for the backward pass
};
GateValues transition_weights(const StateParams& state, std::span<const double> z);

/// Forward total over final states for one WFSA on one document.
double doc_score(const WfsaParams& wfsa, std::span<const Vec> doc);

/// Pre-sampled dropout scales, fixed before a forward pass so the
/// backward pass (and gradient checks) see the same noise.
/// token_scale[t] is 0 or 1/(1-p_embed); u_scale[j][(t*k)+i] multiplies
/// u_{i+1,t+1} of WFSA j and is 0 or 1/(1-p_recurrent).
struct DropoutPlan {
  Vec token_scale;
  std::vector<Vec> u_scale;

  bool empty() const { return token_scale.empty() && u_scale.empty(); }
};
DropoutPlan sample_dropout(const RationalModel& model, int num_tokens, double p_embed, double p_recurrent,
                           std::mt19937_64& rng);

/// Everything the backward sweep needs: effective embeddings, per-WFSA
/// DP values and gate values, scores and logit.
struct ForwardTrace {
  struct WfsaTrace {
    int k = 0;
    int n = 0;
    Vec c;         // (n+1) x (k+1), c[t*(k+1)+i]
    Vec self_loop; // n x k, f values
    Vec main;      // n x k, u values as consumed by the DP (post-dropout)
    Vec pre_main;  // n x k
    Vec u_scale;   // n x k, 1.0 when dropout is off
  };
  std::vector<Vec> tokens;  // post embedding-dropout
  std::vector<WfsaTrace> wfsas;
  Vec scores;
  double logit = 0.0;
};

/// Scores a document with every WFSA and the classifier head. Throws
/// DpOverflow / std::overflow_error when values leave the finite range.
ForwardTrace model_forward(const RationalModel& model, std::span<const Vec> doc,
                           const DropoutPlan* dropout = nullptr);

/// Logit only, no trace storage. The evaluation path.
double model_logit(const RationalModel& model, std::span<const Vec> doc);

/// Exact gradient of logistic_loss(trace.logit, label) with respect to
/// every model parameter, by a reverse sweep over the stored DP values.
/// Embeddings are fixed and receive no gradient.
RationalModel model_backward(const RationalModel& model, const ForwardTrace& trace, int label);

/// Recomputes the logit from the stored gate values alone. Bit-equal to
/// trace.logit by construction; exists so tests can assert that.
double replay_logit(const RationalModel& model, const ForwardTrace& trace);

/// Mutable view of one regularization group in model layout order.
struct GroupView {
  int wfsa_index;
  int state_index;  // 1..k
  std::vector<double*> values;
};
struct ConstGroupView {
  int wfsa_index;
  int state_index;
  std::vector<const double*> values;
};
std::vector<GroupView> group_view(RationalModel& model);
std::vector<ConstGroupView> group_view(const RationalModel& model);

// Model persistence: versioned JSON, bit-exact round trip.
void save_model(const RationalModel& model, const std::string& path);
RationalModel load_model(const std::string& path);

}  // namespace rrnn
