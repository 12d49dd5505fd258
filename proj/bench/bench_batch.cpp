// Times the batch kernels in both execution modes on a synthetic
// workload and reports the speedup. The two modes are bit-identical by
// construction (tests enforce that); this target only measures.

#include <chrono>
#include <cstdio>
#include <numeric>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rrnn/batch.hpp"
#include "rrnn/data.hpp"
#include "rrnn/train.hpp"
#include "rrnn/visualize.hpp"

using namespace rrnn;

namespace {

double seconds_for(int repeats, const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / repeats;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-22s %10.3f ms %10.3f ms %8.2fx\n", name, serial * 1e3, parallel * 1e3, serial / parallel);
}

}  // namespace

int main() {
  SynthConfig synth;
  synth.vocab_size = 200;
  synth.embedding_dim = 32;
  synth.pattern = {"tok3", "tok7"};
  synth.num_train = 512;
  synth.num_dev = 0;
  synth.num_test = 0;
  synth.doc_len_min = 16;
  synth.doc_len_max = 32;
  synth.rng_seed = 7;
  const SynthData data = synth_generate(synth);
  const auto docs = embed_dataset(data.train, data.table);

  const RationalModel model = init_model(24, 4, synth.embedding_dim, 7);
  std::vector<std::size_t> batch(docs.size());
  std::iota(batch.begin(), batch.end(), std::size_t{0});
  const DropoutSpec dropout;

#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without openmp; both columns run the serial path\n");
#endif
  std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  const int reps = 5;
  report("batch_gradient",
         seconds_for(reps, [&] { batch_gradient(model, docs, batch, dropout, Exec::Serial); }),
         seconds_for(reps, [&] { batch_gradient(model, docs, batch, dropout, Exec::Parallel); }));
  report("mean_loss",
         seconds_for(reps, [&] { mean_loss(model, docs, Exec::Serial); }),
         seconds_for(reps, [&] { mean_loss(model, docs, Exec::Parallel); }));
  report("accuracy",
         seconds_for(reps, [&] { accuracy(model, docs, Exec::Serial); }),
         seconds_for(reps, [&] { accuracy(model, docs, Exec::Parallel); }));
  report("top_bottom_phrases",
         seconds_for(1, [&] { top_bottom_phrases(model, data.train, data.table, 4, Exec::Serial); }),
         seconds_for(1, [&] { top_bottom_phrases(model, data.train, data.table, 4, Exec::Parallel); }));
  return 0;
}
