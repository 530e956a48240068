// Serial reference vs OpenMP paths: ensemble simulation and pair moments.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "stochlab/convolution.hpp"
#include "stochlab/moments.hpp"

using namespace stochlab;

namespace {

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-28s %10.4f %10.4f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int M = argc > 1 ? std::atoi(argv[1]) : 400;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 3;

  KernelSpec kernel;  // heat kernel, d = 1
  NoiseSpec noise;
  noise.steps = 128;
  noise.seed = 42;
  const SpectralGrid grid = SpectralGrid::for_kernel(kernel, 0.5 * noise.dt(), noise.horizon);
  TestFunctionSpec g;
  WindowSpec window{1.0, 2};

  std::printf("threads %d, M = %d, grid n = %d, steps = %d\n", omp_get_max_threads(), M,
              grid.points_per_axis(), noise.steps);
  std::printf("%-28s %10s %10s %9s\n", "stage", "serial s", "omp s", "speedup");

  FieldEnsemble a, b;
  const double ts = best_of(reps, [&] {
    a = convolve_brownian(kernel, grid, g, noise, M, window, Execution::Serial);
  });
  const double tp = best_of(reps, [&] {
    b = convolve_brownian(kernel, grid, g, noise, M, window, Execution::Parallel);
  });
  row("brownian convolution", ts, tp, a.values == b.values);

  NoiseSpec jumps = noise;
  jumps.kind = NoiseKind::CompensatedPoisson;
  jumps.jump = JumpSpec{};
  const double js = best_of(reps, [&] {
    a = convolve_poisson(kernel, grid, g, jumps, M, window, Execution::Serial);
  });
  const double jp = best_of(reps, [&] {
    b = convolve_poisson(kernel, grid, g, jumps, M, window, Execution::Parallel);
  });
  row("poisson convolution", js, jp, a.values == b.values);

  PairRequest req;
  req.rule = PairRule::DyadicLag;
  req.lags = {0.0625, 0.125, 0.25, 0.5};
  req.count = 2048;
  req.seed = 7;
  const auto pairs = sample_pairs(b, req);
  MomentField ms, mp;
  const double ms_t = best_of(reps, [&] { ms = estimate_pair_moments(b, pairs, 2.0, Execution::Serial); });
  const double mp_t = best_of(reps, [&] { mp = estimate_pair_moments(b, pairs, 2.0, Execution::Parallel); });
  row("pair moments", ms_t, mp_t, ms.estimate == mp.estimate && ms.stderr == mp.stderr);
  return 0;
}
