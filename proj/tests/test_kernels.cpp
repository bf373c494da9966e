#include <doctest.h>

#include <cmath>

#include "avi/kernels.hpp"
#include "avi/rng.hpp"

using namespace avi;
using namespace avi::kernels;

namespace {

std::vector<double> randv(std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = r.normal();
  return v;
}

// Straight softmax attention, one head at a time.
std::vector<double> attention_oracle(const AttentionShape& s, const std::vector<double>& q, const std::vector<double>& k,
                                     const std::vector<double>& v, const std::vector<KeyRange>& ranges) {
  const int dh = s.dim / s.heads;
  std::vector<double> out(static_cast<std::size_t>(s.n * s.dim), 0.0);
  for (int h = 0; h < s.heads; ++h)
    for (int i = 0; i < s.n; ++i) {
      const int b = ranges.empty() ? 0 : ranges[i].begin, e = ranges.empty() ? s.m : ranges[i].end;
      if (b >= e) continue;
      std::vector<double> w;
      double mx = -1e300;
      for (int j = b; j < e; ++j) {
        double dot = 0;
        for (int c = 0; c < dh; ++c) dot += q[i * s.dim + h * dh + c] * k[j * s.dim + h * dh + c];
        w.push_back(dot / std::sqrt(static_cast<double>(dh)));
        mx = std::max(mx, w.back());
      }
      double z = 0;
      for (auto& x : w) z += (x = std::exp(x - mx));
      for (int j = b; j < e; ++j)
        for (int c = 0; c < dh; ++c) out[i * s.dim + h * dh + c] += w[j - b] / z * v[j * s.dim + h * dh + c];
    }
  return out;
}

}  // namespace

TEST_CASE("gaussian taps are normalized and symmetric") {
  const auto t = gaussian_kernel_1d(7, 1.5);
  double sum = 0;
  for (float x : t) sum += x;
  CHECK(sum == doctest::Approx(1.0));
  for (int i = 0; i < 3; ++i) CHECK(t[i] == doctest::Approx(t[6 - i]));
  CHECK(gaussian_kernel_1d(1, 0.0) == std::vector<float>{1.0f});
}

TEST_CASE("blur: serial and parallel agree; impulse response is the outer product") {
  const int F = 2, H = 9, W = 11;
  std::vector<float> in(F * H * W, 0.0f), a(in.size()), b(in.size());
  in[0 * H * W + 4 * W + 5] = 1.0f;
  const auto taps = gaussian_kernel_1d(5, 1.0);
  serial::gaussian_blur(in.data(), a.data(), F, H, W, taps);
  parallel::gaussian_blur(in.data(), b.data(), F, H, W, taps);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx)
      CHECK(a[(4 + dy) * W + 5 + dx] == doctest::Approx(taps[dy + 2] * taps[dx + 2]).epsilon(1e-6));
  for (int i = H * W; i < F * H * W; ++i) CHECK(a[i] == 0.0f);
}

TEST_CASE("patch_apply matches a matrix product both ways") {
  const int d = 4;
  const std::size_t rows = 5;
  Rng r(1);
  std::vector<float> B(d * d), x(rows * d), y1(rows * d), y2(rows * d);
  for (auto& v : B) v = static_cast<float>(r.normal());
  for (auto& v : x) v = static_cast<float>(r.normal());
  for (bool tr : {false, true}) {
    serial::patch_apply(x.data(), y1.data(), rows, d, B.data(), tr);
    parallel::patch_apply(x.data(), y2.data(), rows, d, B.data(), tr);
    for (std::size_t row = 0; row < rows; ++row)
      for (int i = 0; i < d; ++i) {
        double acc = 0;
        for (int j = 0; j < d; ++j) acc += (tr ? B[j * d + i] : B[i * d + j]) * x[row * d + j];
        CHECK(y1[row * d + i] == doctest::Approx(acc).epsilon(1e-5));
        CHECK(y2[row * d + i] == doctest::Approx(acc).epsilon(1e-5));
      }
  }
}

TEST_CASE("attention forward matches the oracle, with and without ranges") {
  AttentionShape s{5, 7, 8, 2};
  const auto q = randv(40, 1), k = randv(56, 2), v = randv(56, 3);
  std::vector<KeyRange> ranges{{0, 3}, {2, 7}, {4, 4}, {0, 7}, {6, 7}};
  for (const auto& rg : {std::vector<KeyRange>{}, ranges}) {
    const auto want = attention_oracle(s, q, k, v, rg);
    std::vector<double> o1(40), o2(40), p1(2 * 5 * 7), p2(2 * 5 * 7);
    serial::attention_forward<double>(s, q.data(), k.data(), v.data(), rg, o1.data(), p1.data());
    parallel::attention_forward<double>(s, q.data(), k.data(), v.data(), rg, o2.data(), p2.data());
    for (int i = 0; i < 40; ++i) {
      CHECK(o1[i] == doctest::Approx(want[i]).epsilon(1e-10));
      CHECK(o2[i] == doctest::Approx(want[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("attention backward matches finite differences") {
  AttentionShape s{3, 4, 4, 2};
  auto q = randv(12, 4), k = randv(16, 5), v = randv(16, 6);
  const auto w = randv(12, 7);  // loss = sum(w * out)
  const std::vector<KeyRange> rg{{0, 2}, {1, 4}, {0, 4}};
  auto loss = [&]() {
    std::vector<double> o(12), p(24);
    serial::attention_forward<double>(s, q.data(), k.data(), v.data(), rg, o.data(), p.data());
    double l = 0;
    for (int i = 0; i < 12; ++i) l += w[i] * o[i];
    return l;
  };
  std::vector<double> o(12), p(24);
  parallel::attention_forward<double>(s, q.data(), k.data(), v.data(), rg, o.data(), p.data());
  std::vector<double> dq(12, 0), dk(16, 0), dv(16, 0), sq(12, 0), sk(16, 0), sv(16, 0);
  parallel::attention_backward<double>(s, q.data(), k.data(), v.data(), rg, p.data(), w.data(), dq.data(), dk.data(), dv.data());
  serial::attention_backward<double>(s, q.data(), k.data(), v.data(), rg, p.data(), w.data(), sq.data(), sk.data(), sv.data());
  auto check = [&](std::vector<double>& x, const std::vector<double>& g, const std::vector<double>& gs) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i], h = 1e-6;
      x[i] = keep + h;
      const double lp = loss();
      x[i] = keep - h;
      const double lm = loss();
      x[i] = keep;
      CHECK(g[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-6));
      CHECK(gs[i] == doctest::Approx(g[i]).epsilon(1e-10));
    }
  };
  check(q, dq, sq);
  check(k, dk, sk);
  check(v, dv, sv);
}
