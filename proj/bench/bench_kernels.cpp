// Serial reference against the OpenMP kernels. Thread count follows
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "avi/kernels.hpp"

namespace k = avi::kernels;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Par>
void BM_blur(benchmark::State& st) {
  const int frames = 16, side = static_cast<int>(st.range(0));
  const auto in = noise(static_cast<std::size_t>(frames) * side * side, 1);
  std::vector<float> out(in.size());
  const auto taps = k::gaussian_kernel_1d(7, 1.5);
  for (auto _ : st) {
    if constexpr (Par)
      k::parallel::gaussian_blur(in.data(), out.data(), frames, side, side, taps);
    else
      k::serial::gaussian_blur(in.data(), out.data(), frames, side, side, taps);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(in.size()));
}

template <bool Par>
void BM_patch(benchmark::State& st) {
  const int d = 12;
  const auto rows = static_cast<std::size_t>(st.range(0));
  const auto in = noise(rows * d, 2);
  const auto basis = noise(static_cast<std::size_t>(d) * d, 3);
  std::vector<float> out(in.size());
  for (auto _ : st) {
    if constexpr (Par)
      k::parallel::patch_apply(in.data(), out.data(), rows, d, basis.data(), false);
    else
      k::serial::patch_apply(in.data(), out.data(), rows, d, basis.data(), false);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(rows));
}

template <bool Par>
void BM_attention(benchmark::State& st) {
  k::AttentionShape s;
  s.n = s.m = static_cast<int>(st.range(0));
  s.dim = 64;
  s.heads = 4;
  const auto q = noise(static_cast<std::size_t>(s.n) * s.dim, 4);
  const auto kk = noise(static_cast<std::size_t>(s.m) * s.dim, 5);
  const auto v = noise(static_cast<std::size_t>(s.m) * s.dim, 6);
  std::vector<float> out(static_cast<std::size_t>(s.n) * s.dim);
  std::vector<float> probs(static_cast<std::size_t>(s.heads) * s.n * s.m);
  const std::vector<k::KeyRange> all;
  for (auto _ : st) {
    if constexpr (Par)
      k::parallel::attention_forward<float>(s, q.data(), kk.data(), v.data(), all, out.data(), probs.data());
    else
      k::serial::attention_forward<float>(s, q.data(), kk.data(), v.data(), all, out.data(), probs.data());
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Par>
void BM_attention_backward(benchmark::State& st) {
  k::AttentionShape s;
  s.n = s.m = static_cast<int>(st.range(0));
  s.dim = 64;
  s.heads = 4;
  const auto q = noise(static_cast<std::size_t>(s.n) * s.dim, 7);
  const auto kk = noise(static_cast<std::size_t>(s.m) * s.dim, 8);
  const auto v = noise(static_cast<std::size_t>(s.m) * s.dim, 9);
  const auto dout = noise(static_cast<std::size_t>(s.n) * s.dim, 10);
  std::vector<float> out(dout.size()), probs(static_cast<std::size_t>(s.heads) * s.n * s.m);
  std::vector<float> dq(q.size()), dk(kk.size()), dv(v.size());
  const std::vector<k::KeyRange> all;
  k::serial::attention_forward<float>(s, q.data(), kk.data(), v.data(), all, out.data(), probs.data());
  for (auto _ : st) {
    if constexpr (Par)
      k::parallel::attention_backward<float>(s, q.data(), kk.data(), v.data(), all, probs.data(), dout.data(),
                                             dq.data(), dk.data(), dv.data());
    else
      k::serial::attention_backward<float>(s, q.data(), kk.data(), v.data(), all, probs.data(), dout.data(),
                                           dq.data(), dk.data(), dv.data());
    benchmark::DoNotOptimize(dq.data());
  }
}

}  // namespace

BENCHMARK(BM_blur<false>)->Name("blur/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_blur<true>)->Name("blur/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_patch<false>)->Name("patch_apply/serial")->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_patch<true>)->Name("patch_apply/parallel")->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_attention<false>)->Name("attention/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_attention<true>)->Name("attention/parallel")->Arg(128)->Arg(512);
BENCHMARK(BM_attention_backward<false>)->Name("attention_backward/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_attention_backward<true>)->Name("attention_backward/parallel")->Arg(128)->Arg(512);

BENCHMARK_MAIN();
