#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "flicker/nn/checkpoint.hpp"
#include "flicker/nn/net.hpp"
#include "flicker/nn/train.hpp"

using namespace flicker;
using namespace flicker::nn;

namespace {

/// Reduced architecture used by the gradient check.
Architecture reduced_arch() {
  Architecture a;
  a.input_length = 64;
  a.in_channels = 2;
  a.conv1_filters = 4;
  a.conv2_filters = 8;
  a.conv_kernel = 5;
  a.lstm1_cells = 6;
  a.lstm2_cells = 3;
  a.dropout_rate = 0.0;
  return a;
}

std::vector<double> random_input(const Architecture& a, Rng& rng) {
  std::vector<double> x(static_cast<std::size_t>(a.input_length) * a.in_channels);
  for (auto& v : x) v = 2.0 * rng.uniform01() - 1.0;
  return x;
}

/// Finite differences are only meaningful where the loss is differentiable:
/// positive inputs and positive conv weights keep every ReLU strictly active
/// and every pool pair untied, so no kink sits inside the +-h probe.
std::vector<double> positive_input(const Architecture& a, Rng& rng) {
  std::vector<double> x(static_cast<std::size_t>(a.input_length) * a.in_channels);
  for (auto& v : x) v = 0.1 + rng.uniform01();
  return x;
}

template <typename T>
void make_differentiable_point(Net<T>& net) {
  const auto& lay = net.layout;
  for (std::size_t i = lay.conv1_w; i < lay.conv2_b + std::size_t(net.arch.conv2_filters); ++i)
    net.params[i] = std::abs(net.params[i]);
  for (int c = 0; c < net.arch.conv1_filters; ++c)
    net.params[lay.conv1_b + c] = T(0.05);
  for (int c = 0; c < net.arch.conv2_filters; ++c)
    net.params[lay.conv2_b + c] = T(0.05);
}

}  // namespace

TEST_CASE("conv1d: delta kernel reproduces ReLU(input)") {
  const int L = 12, Cin = 1, Cout = 1;
  std::vector<double> in(L);
  Rng rng(11);
  for (auto& v : in) v = 2.0 * rng.uniform01() - 1.0;

  for (int K : {3, 4}) {
    std::vector<double> w(static_cast<std::size_t>(K) * Cin, 0.0);
    w[(K - 1) / 2] = 1.0;  // the tap aligned with t under same padding
    std::vector<double> b(1, 0.0), out(L);
    detail::conv1d_forward(in.data(), L, Cin, w.data(), b.data(), Cout, K, out.data());
    for (int t = 0; t < L; ++t) CHECK(out[t] == doctest::Approx(std::max(in[t], 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("conv1d: all-ones kernel on all-ones input, zero-padded edges") {
  const int L = 10, K = 3;
  std::vector<double> in(L, 1.0), w(K, 1.0), b(1, 0.0), out(L);
  detail::conv1d_forward(in.data(), L, 1, w.data(), b.data(), 1, K, out.data());
  const std::vector<double> expected = {2, 3, 3, 3, 3, 3, 3, 3, 3, 2};
  for (int t = 0; t < L; ++t) CHECK(out[t] == doctest::Approx(expected[t]));
}

TEST_CASE("maxpool: pairwise max with earlier-index ties, odd tail dropped") {
  const std::vector<double> in = {1, 3, 2, 2, 5};
  std::vector<double> out(2);
  std::vector<int> argmax(2);
  detail::maxpool2_forward(in.data(), 5, 1, out.data(), argmax.data());
  CHECK(out[0] == 3);
  CHECK(out[1] == 2);
  CHECK(argmax[0] == 1);
  CHECK(argmax[1] == 2);

  const std::vector<double> flat(8, 7.0);
  std::vector<double> fout(4);
  std::vector<int> fam(4);
  detail::maxpool2_forward(flat.data(), 8, 1, fout.data(), fam.data());
  for (int p = 0; p < 4; ++p) CHECK(fam[p] == 2 * p);  // tie -> earlier
}

TEST_CASE("lstm: zero weights produce zero output") {
  const int L = 7, I = 3, H = 4;
  std::vector<double> in(L * I, 0.9), wx(4 * H * I, 0.0), wh(4 * H * H, 0.0),
      b(4 * H, 0.0), h(L * H, 1.0), zeros(H, 0.0);
  detail::LstmActs<double> acts;
  acts.resize(static_cast<std::size_t>(L) * H);
  detail::lstm_forward(in.data(), L, I, H, wx.data(), wh.data(), b.data(),
                       h.data(), acts, zeros.data());
  for (double v : h) CHECK(v == 0.0);
}

TEST_CASE("lstm: saturated input/candidate gates accumulate monotonically") {
  const int L = 2, I = 1, H = 1;
  const std::vector<double> in = {10.0, 10.0};
  std::vector<double> wx(4, 0.0), wh(4, 0.0), b(4, 0.0), h(2), zeros(1, 0.0);
  wx[0] = 5.0;  // input gate
  wx[2] = 5.0;  // candidate
  detail::LstmActs<double> acts;
  acts.resize(2);
  detail::lstm_forward(in.data(), L, I, H, wx.data(), wh.data(), b.data(),
                       h.data(), acts, zeros.data());
  CHECK(h[0] > 0.0);
  CHECK(h[1] > h[0]);
}

TEST_CASE("dropout: identity at rate 0 and in inference mode") {
  std::vector<double> in = {1.0, -2.0, 3.5}, out(3), mask(3);
  Rng rng(5);
  detail::dropout_forward(in.data(), 3, 0.0, &rng, out.data(), mask.data());
  CHECK(out == in);
  detail::dropout_forward(in.data(), 3, 0.5, nullptr, out.data(), mask.data());
  CHECK(out == in);
}

TEST_CASE("dropout: kept fraction concentrates around 1 - rate") {
  const std::size_t n = 1'000'000;
  std::vector<float> in(n, 1.f), out(n), mask(n);
  Rng rng(123);
  detail::dropout_forward(in.data(), n, 0.05, &rng, out.data(), mask.data());
  std::size_t kept = 0;
  for (float m : mask) kept += m != 0.f;
  const double frac = static_cast<double>(kept) / static_cast<double>(n);
  CHECK(frac > 0.948);
  CHECK(frac < 0.952);
}

TEST_CASE("forward: probabilities in (0,1), sum to 1, deterministic") {
  Architecture a = reduced_arch();
  Net<double> net(a);
  net.init_weights(42);
  Workspace<double> ws(a);
  Rng rng(7);

  for (int rep = 0; rep < 1000; ++rep) {
    const auto x = random_input(a, rng);
    const auto p = forward(net, x.data(), ws);
    CHECK(p[0] > 0.0);
    CHECK(p[1] > 0.0);
    CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-12);
  }

  const auto x = random_input(a, rng);
  const auto p1 = forward(net, x.data(), ws);
  const auto p2 = forward(net, x.data(), ws);
  CHECK(p1[0] == p2[0]);
  CHECK(p1[1] == p2[1]);
}

TEST_CASE("forward: all-zero weights give (0.5, 0.5); loss is ln 2") {
  Architecture a = reduced_arch();
  Net<double> net(a);  // zero-initialized parameter store
  Workspace<double> ws(a);
  Rng rng(3);
  const auto x = random_input(a, rng);
  const auto p = forward(net, x.data(), ws);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<double> grad(net.layout.total, 0.0);
  for (int label : {0, 1}) {
    const double loss = sample_loss_and_grad(net, x.data(), label, nullptr, ws,
                                             grad.data());
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
}

TEST_CASE("forward: saturated dense bias drives the loss to zero") {
  Architecture a = reduced_arch();
  Net<double> net(a);
  net.params[net.layout.dense_b + 1] = 40.0;
  net.params[net.layout.dense_b + 0] = -40.0;
  Workspace<double> ws(a);
  Rng rng(9);
  const auto x = random_input(a, rng);
  std::vector<double> grad(net.layout.total, 0.0);
  const double loss = sample_loss_and_grad(net, x.data(), 1, nullptr, ws, grad.data());
  CHECK(loss < 1e-12);
}

TEST_CASE("architecture: paper parameter counts and shape chain") {
  Architecture a;  // paper defaults, L = 5000
  CHECK(a.conv1_params() == 2 * 300 * 50 + 50);
  CHECK(a.conv2_params() == 50 * 300 * 100 + 100);
  CHECK(a.lstm1_params() == 4 * (100 + 50) * 50 + 4 * 50);
  CHECK(a.lstm2_params() == 4 * (50 + 10) * 10 + 4 * 10);
  CHECK(a.dense_params() == 10 * 2 + 2);
  CHECK(a.param_count() == std::size_t(30050 + 1500100 + 30200 + 2440 + 22));
  CHECK(a.pooled_length() == 2500);

  // Shape chain 5000x2 -> 5000x50 -> 5000x100 -> 2500x100 -> 2500x50 -> 50 -> 10 -> 2
  Net<float> net(a);
  Workspace<float> ws(a);
  CHECK(ws.conv1_out.size() == 5000u * 50);
  CHECK(ws.conv2_out.size() == 5000u * 100);
  CHECK(ws.pool_out.size() == 2500u * 100);
  CHECK(ws.lstm1_h.size() == 2500u * 50);
  CHECK(ws.lstm2_h.size() == 2500u * 10);
  CHECK(ws.drop3_out.size() == 10u);
  CHECK(a.classes == 2);
}

TEST_CASE("adam: first-step updates and zero-gradient fixed point") {
  SUBCASE("unit gradient moves a parameter by about -lr") {
    Adam adam(1);
    std::vector<float> p = {0.f};
    std::vector<float> g = {1.f};
    adam.step(std::span<float>(p), std::span<const float>(g), 1);
    CHECK(std::abs(p[0] + 0.01f) < 1e-9);
  }
  SUBCASE("zero gradients leave parameters untouched") {
    Adam adam(3);
    std::vector<float> p = {0.5f, -1.f, 2.f};
    const std::vector<float> orig = p;
    std::vector<float> g = {0.f, 0.f, 0.f};
    for (int i = 0; i < 10; ++i)
      adam.step(std::span<float>(p), std::span<const float>(g), 1);
    CHECK(p == orig);
  }
  SUBCASE("first step is scale-free (sign-like)") {
    Adam adam(2);
    std::vector<float> p = {0.f, 0.f};
    std::vector<float> g = {0.3f, 0.6f};
    adam.step(std::span<float>(p), std::span<const float>(g), 1);
    CHECK(p[0] == doctest::Approx(p[1]).epsilon(1e-6));
    CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
  }
}

TEST_CASE("gradient check: backprop matches central differences on the reduced model") {
  Architecture a = reduced_arch();
  Net<double> net(a);
  net.init_weights(2024);
  make_differentiable_point(net);

  const int batch = 3;
  Rng rng(77);
  std::vector<std::vector<double>> inputs;
  const int labels[batch] = {0, 1, 1};
  for (int s = 0; s < batch; ++s) inputs.push_back(positive_input(a, rng));

  Workspace<double> ws(a);
  auto batch_loss = [&]() {
    double total = 0;
    std::vector<double> scratch(net.layout.total, 0.0);
    for (int s = 0; s < batch; ++s) {
      const auto p = forward(net, inputs[s].data(), ws);
      total += -std::log(std::max(p[labels[s]], 1e-12));
    }
    (void)scratch;
    return total / batch;
  };

  std::vector<double> analytic(net.layout.total, 0.0);
  for (int s = 0; s < batch; ++s)
    sample_loss_and_grad(net, inputs[s].data(), labels[s], nullptr, ws,
                         analytic.data());
  for (auto& g : analytic) g /= batch;

  const double h = 1e-4;
  double max_rel = 0;
  for (std::size_t i = 0; i < net.layout.total; ++i) {
    const double saved = net.params[i];
    net.params[i] = saved + h;
    const double lp = batch_loss();
    net.params[i] = saved - h;
    const double lm = batch_loss();
    net.params[i] = saved;
    const double numeric = (lp - lm) / (2 * h);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
  }
  CAPTURE(max_rel);
  CHECK(max_rel < 1e-4);
}

TEST_CASE("checkpoint: byte-identical round trip, identical forward outputs") {
  Architecture a = reduced_arch();
  a.dropout_rate = 0.05;
  Net<float> net(a);
  net.init_weights(99);

  Checkpoint ckpt;
  ckpt.arch = a;
  ckpt.weights = net.params;
  ckpt.history.push_back({0.61234567, 0.71875, 0.52345678, 0.8125});
  ckpt.history.push_back({0.41234567, 0.90625, 0.42345678, 0.875});

  const std::string p1 = "ckpt_roundtrip_a.bin";
  const std::string p2 = "ckpt_roundtrip_b.bin";
  save_checkpoint(ckpt, p1);
  const Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(loaded, p2);

  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(p1) == slurp(p2));
  CHECK(loaded.history.size() == 2);
  CHECK(loaded.arch == a);

  Net<float> net2 = to_net(loaded);
  Workspace<float> ws1(a), ws2(a);
  Rng rng(123);
  for (int rep = 0; rep < 4; ++rep) {
    std::vector<float> x(static_cast<std::size_t>(a.input_length) * 2);
    for (auto& v : x) v = static_cast<float>(2.0 * rng.uniform01() - 1.0);
    const auto q1 = forward(net, x.data(), ws1);
    const auto q2 = forward(net2, x.data(), ws2);
    CHECK(q1[0] == q2[0]);
    CHECK(q1[1] == q2[1]);
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}
