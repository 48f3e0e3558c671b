// Throughput comparison between the serial per-sequence forward loop and the
// OpenMP batch kernel, plus a sanity check that both produce bit-identical
// estimates. Also times one BPTT pass, the dominant cost in training.

#include <chrono>
#include <cstdio>
#include <vector>

#include "natt/network.hpp"
#include "natt/parallel.hpp"
#include "natt/simulator.hpp"
#include "natt/training.hpp"

using namespace natt;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

int main() {
  DatasetConfig dc;
  dc.n = 16;
  dc.constant_fraction = 0.0;
  GeneratedDataset gd = make_dataset(dc, 11);
  const std::vector<Sequence>& seqs = gd.sequences;

  NormalizationSpec norm = fit_normalization(seqs);
  NetworkParams params = init_network(100, 100, 5, norm, true);

  const std::size_t total_steps = seqs.size() * seqs.front().size();
  std::printf("forward benchmark: %zu sequences x %zu steps, %d thread(s)\n",
              seqs.size(), seqs.front().size(), max_threads());

  // Warm-up pass so both timings start from hot caches.
  std::vector<ForwardResult> warm = batch_forward(params, seqs);

  auto t0 = Clock::now();
  std::vector<ForwardResult> serial(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i)
    serial[i] = forward_sequence(params, seqs[i]);
  double serial_s = seconds_since(t0);

  t0 = Clock::now();
  std::vector<ForwardResult> parallel = batch_forward(params, seqs);
  double parallel_s = seconds_since(t0);

  std::size_t diffs = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t t = 0; t < serial[i].estimates.size(); ++t)
      if (serial[i].estimates[t].pitch != parallel[i].estimates[t].pitch ||
          serial[i].estimates[t].roll != parallel[i].estimates[t].roll)
        ++diffs;

  std::printf("  serial loop    %8.3f s  (%7.0f steps/s)\n", serial_s,
              total_steps / serial_s);
  std::printf("  batch kernel   %8.3f s  (%7.0f steps/s, %.2fx)\n", parallel_s,
              total_steps / parallel_s, serial_s / parallel_s);
  std::printf("  bit-identical: %s (%zu differing steps)\n",
              diffs == 0 ? "yes" : "NO", diffs);

  std::vector<std::array<double, 6>> inputs =
      normalize_sequence(seqs.front(), norm);
  t0 = Clock::now();
  Gradients g = bptt_gradients(effective_params(params), inputs,
                               seqs.front().truth);
  double bptt_s = seconds_since(t0);
  std::printf("  bptt pass      %8.3f s  (one %zu-step sequence, loss %.4f)\n",
              bptt_s, inputs.size(), g.loss);

  return diffs == 0 ? 0 : 1;
}
