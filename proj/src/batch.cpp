#include "rrnn/batch.hpp"

#include <exception>
#include <stdexcept>

namespace rrnn {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

// Runs fn(i) for i in [0, count), serially or under OpenMP. The first
// exception thrown by any iteration is rethrown on the calling thread.
template <class Fn>
void for_each_index(std::size_t count, Exec exec, Fn&& fn) {
  if (exec == Exec::Serial) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical
      {
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

double doc_loss_and_grad(const RationalModel& model, const EmbeddedDoc& doc, const DropoutSpec& dropout,
                         std::size_t index, RationalModel& grad_out) {
  ForwardTrace trace;
  if (dropout.enabled()) {
    std::mt19937_64 rng(mix_seed(dropout.seed, index));
    const DropoutPlan plan =
        sample_dropout(model, static_cast<int>(doc.tokens.size()), dropout.embedding, dropout.recurrent, rng);
    trace = model_forward(model, doc.tokens, &plan);
  } else {
    trace = model_forward(model, doc.tokens);
  }
  grad_out = model_backward(model, trace, doc.label);
  return logistic_loss(trace.logit, doc.label);
}

}  // namespace

BatchGrad batch_gradient(const RationalModel& model, std::span<const EmbeddedDoc> docs,
                         std::span<const std::size_t> indices, const DropoutSpec& dropout, Exec exec) {
  if (indices.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  std::vector<RationalModel> grads(indices.size());
  std::vector<double> losses(indices.size());
  for_each_index(indices.size(), exec, [&](std::size_t i) {
    losses[i] = doc_loss_and_grad(model, docs[indices[i]], dropout, indices[i], grads[i]);
  });
  // reduce in document-index order regardless of execution mode
  BatchGrad out;
  out.grad = zeros_like(model);
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    axpy_params(out.grad, grads[i], inv);
    out.mean_loss += losses[i];
  }
  out.mean_loss *= inv;
  return out;
}

double mean_loss(const RationalModel& model, std::span<const EmbeddedDoc> docs, Exec exec) {
  if (docs.empty()) throw std::invalid_argument("mean_loss: empty dataset");
  std::vector<double> losses(docs.size());
  for_each_index(docs.size(), exec,
                 [&](std::size_t i) { losses[i] = logistic_loss(model_logit(model, docs[i].tokens), docs[i].label); });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(docs.size());
}

double accuracy(const RationalModel& model, std::span<const EmbeddedDoc> docs, Exec exec) {
  if (docs.empty()) throw std::invalid_argument("accuracy: empty dataset");
  std::vector<unsigned char> correct(docs.size(), 0);
  for_each_index(docs.size(), exec, [&](std::size_t i) {
    const double logit = model_logit(model, docs[i].tokens);
    const int predicted = logit > 0.0 ? 1 : -1;
    correct[i] = predicted == docs[i].label ? 1 : 0;
  });
  std::size_t hits = 0;
  for (unsigned char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(docs.size());
}

Vec corpus_logits(const RationalModel& model, std::span<const EmbeddedDoc> docs, Exec exec) {
  Vec logits(docs.size());
  for_each_index(docs.size(), exec, [&](std::size_t i) { logits[i] = model_logit(model, docs[i].tokens); });
  return logits;
}

}  // namespace rrnn
