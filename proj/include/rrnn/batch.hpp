#pragma once

#include <cstdint>
#include <span>

#include "rrnn/data.hpp"
#include "rrnn/model.hpp"

namespace rrnn {

/// Every batch kernel exists twice: a serial reference and an OpenMP
/// version parallel over documents. Per-document results land in
/// per-document slots and are reduced in document-index order, so the
/// two modes are bit-identical; tests hold them to that.
enum class Exec { Serial, Parallel };

struct DropoutSpec {
  double embedding = 0.0;
  double recurrent = 0.0;
  std::uint64_t seed = 0;  // mixed with the document index per draw

  bool enabled() const { return embedding > 0.0 || recurrent > 0.0; }
};

struct BatchGrad {
  RationalModel grad;     // mean over the batch
  double mean_loss = 0.0;
};

/// Mean logistic loss and its gradient over docs[indices]. indices
/// select the minibatch; dropout noise is a pure function of
/// (spec.seed, index), independent of thread schedule.
BatchGrad batch_gradient(const RationalModel& model, std::span<const EmbeddedDoc> docs,
                         std::span<const std::size_t> indices, const DropoutSpec& dropout, Exec exec);

/// Mean logistic loss over a whole dataset, dropout off.
double mean_loss(const RationalModel& model, std::span<const EmbeddedDoc> docs, Exec exec);

/// Fraction of documents with sign(logit) matching the label
/// (logit > 0 reads as +1).
double accuracy(const RationalModel& model, std::span<const EmbeddedDoc> docs, Exec exec);

/// Classifier logit per document.
Vec corpus_logits(const RationalModel& model, std::span<const EmbeddedDoc> docs, Exec exec);

/// splitmix64 of (seed, index); seeds the per-document dropout stream.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace rrnn
