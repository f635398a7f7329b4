#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "flicker/errors.hpp"
#include "flicker/nn/kernels.hpp"
#include "flicker/rng.hpp"

namespace flicker::nn {

/// Layer stack: conv1 -> conv2 -> dropout -> maxpool(2) -> lstm1(seq) ->
/// dropout -> lstm2(last) -> dropout -> dense softmax. Both conv layers use
/// 'same' padding (even kernels pad (K-1)/2 left, the rest right) and ReLU.
struct Architecture {
  int input_length = 5000;
  int in_channels = 2;
  int conv1_filters = 50;
  int conv2_filters = 100;
  int conv_kernel = 300;
  int lstm1_cells = 50;
  int lstm2_cells = 10;
  int classes = 2;
  double dropout_rate = 0.05;

  int pooled_length() const { return input_length / 2; }

  std::size_t conv1_weights() const {
    return static_cast<std::size_t>(in_channels) * conv_kernel * conv1_filters;
  }
  std::size_t conv2_weights() const {
    return static_cast<std::size_t>(conv1_filters) * conv_kernel * conv2_filters;
  }
  static std::size_t lstm_params(int in, int cells) {
    return 4u * static_cast<std::size_t>(in + cells) * cells + 4u * cells;
  }
  std::size_t conv1_params() const { return conv1_weights() + conv1_filters; }
  std::size_t conv2_params() const { return conv2_weights() + conv2_filters; }
  std::size_t lstm1_params() const { return lstm_params(conv2_filters, lstm1_cells); }
  std::size_t lstm2_params() const { return lstm_params(lstm1_cells, lstm2_cells); }
  std::size_t dense_params() const {
    return static_cast<std::size_t>(lstm2_cells) * classes + classes;
  }
  std::size_t param_count() const {
    return conv1_params() + conv2_params() + lstm1_params() + lstm2_params() +
           dense_params();
  }

  bool operator==(const Architecture&) const = default;
};

/// Offsets of each layer's weights inside the flat parameter store.
/// Layout (also the checkpoint payload order):
///   conv W [out][k][in], conv b [out]
///   lstm Wx [gate][cell][in], Wh [gate][cell][cell], b [gate][cell]
///     with gate order {input, forget, candidate, output}
///   dense W [class][in], dense b [class]
struct ParamLayout {
  std::size_t conv1_w, conv1_b;
  std::size_t conv2_w, conv2_b;
  std::size_t lstm1_wx, lstm1_wh, lstm1_b;
  std::size_t lstm2_wx, lstm2_wh, lstm2_b;
  std::size_t dense_w, dense_b;
  std::size_t total;

  explicit ParamLayout(const Architecture& a) {
    std::size_t at = 0;
    conv1_w = at; at += a.conv1_weights();
    conv1_b = at; at += a.conv1_filters;
    conv2_w = at; at += a.conv2_weights();
    conv2_b = at; at += a.conv2_filters;
    const std::size_t l1 = static_cast<std::size_t>(a.lstm1_cells);
    const std::size_t l2 = static_cast<std::size_t>(a.lstm2_cells);
    lstm1_wx = at; at += 4u * l1 * a.conv2_filters;
    lstm1_wh = at; at += 4u * l1 * l1;
    lstm1_b = at; at += 4u * l1;
    lstm2_wx = at; at += 4u * l2 * a.lstm1_cells;
    lstm2_wh = at; at += 4u * l2 * l2;
    lstm2_b = at; at += 4u * l2;
    dense_w = at; at += static_cast<std::size_t>(a.classes) * a.lstm2_cells;
    dense_b = at; at += a.classes;
    total = at;
  }
};

namespace detail {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename T>
void conv1d_forward(const T* in, int L, int Cin, const T* w, const T* bias,
                    int Cout, int K, T* out) {
  const int pad_l = (K - 1) / 2;
  for (int co = 0; co < Cout; ++co) {
    const T* wrow = w + static_cast<std::size_t>(co) * K * Cin;
    const double b = static_cast<double>(bias[co]);
    for (int t = 0; t < L; ++t) {
      const int k0 = std::max(0, pad_l - t);
      const int k1 = std::min(K, L + pad_l - t);
      const int s0 = t - pad_l + k0;
      const double acc =
          b + dot_acc(wrow + static_cast<std::size_t>(k0) * Cin,
                      in + static_cast<std::size_t>(s0) * Cin,
                      static_cast<std::size_t>(k1 - k0) * Cin);
      out[static_cast<std::size_t>(t) * Cout + co] =
          acc > 0 ? static_cast<T>(acc) : T(0);
    }
  }
}

/// dout is the gradient at the post-ReLU output; `out` supplies the ReLU
/// mask (out > 0 iff the pre-activation was positive). din may be null.
template <typename T>
void conv1d_backward(const T* in, int L, int Cin, const T* w, int Cout, int K,
                     const T* out, const T* dout, T* dw, T* db, T* din) {
  const int pad_l = (K - 1) / 2;
  for (int co = 0; co < Cout; ++co) {
    const T* wrow = w + static_cast<std::size_t>(co) * K * Cin;
    T* dwrow = dw + static_cast<std::size_t>(co) * K * Cin;
    double dbias = 0;
    for (int t = 0; t < L; ++t) {
      const std::size_t idx = static_cast<std::size_t>(t) * Cout + co;
      if (!(out[idx] > 0)) continue;
      const T dpre = dout[idx];
      if (dpre == T(0)) continue;
      dbias += static_cast<double>(dpre);
      const int k0 = std::max(0, pad_l - t);
      const int k1 = std::min(K, L + pad_l - t);
      const int s0 = t - pad_l + k0;
      const std::size_t len = static_cast<std::size_t>(k1 - k0) * Cin;
      axpy(dpre, in + static_cast<std::size_t>(s0) * Cin,
           dwrow + static_cast<std::size_t>(k0) * Cin, len);
      if (din != nullptr)
        axpy(dpre, wrow + static_cast<std::size_t>(k0) * Cin,
             din + static_cast<std::size_t>(s0) * Cin, len);
    }
    db[co] += static_cast<T>(dbias);
  }
}

/// Non-overlapping pairwise max over time; ties keep the earlier index.
/// argmax stores absolute input row indices.
template <typename T>
void maxpool2_forward(const T* in, int L, int C, T* out, int* argmax) {
  const int P = L / 2;
  for (int p = 0; p < P; ++p) {
    const T* r0 = in + static_cast<std::size_t>(2 * p) * C;
    const T* r1 = r0 + C;
    T* o = out + static_cast<std::size_t>(p) * C;
    int* am = argmax + static_cast<std::size_t>(p) * C;
    for (int c = 0; c < C; ++c) {
      if (r0[c] >= r1[c]) {
        o[c] = r0[c];
        am[c] = 2 * p;
      } else {
        o[c] = r1[c];
        am[c] = 2 * p + 1;
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const T* dout, int P, int C, const int* argmax, T* din) {
  for (int p = 0; p < P; ++p) {
    const T* d = dout + static_cast<std::size_t>(p) * C;
    const int* am = argmax + static_cast<std::size_t>(p) * C;
    for (int c = 0; c < C; ++c)
      din[static_cast<std::size_t>(am[c]) * C + c] += d[c];
  }
}

/// Inverted dropout. With rng == nullptr (inference) or rate == 0 the mask is
/// all ones. Mask values are 0 or 1/(1-rate) and are reused by the backward
/// pass of the same call.
template <typename T>
void dropout_forward(const T* in, std::size_t n, double rate, Rng* rng, T* out,
                     T* mask) {
  if (rng == nullptr || rate <= 0) {
    for (std::size_t i = 0; i < n; ++i) {
      mask[i] = T(1);
      out[i] = in[i];
    }
    return;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng->uniform01() < rate ? T(0) : keep_scale;
    out[i] = in[i] * mask[i];
  }
}

/// Per-step LSTM activations retained for backpropagation through time.
template <typename T>
struct LstmActs {
  std::vector<T> gate_i, gate_f, gate_g, gate_o;  // [L][H], post-activation
  std::vector<T> cell, tanh_cell;                 // [L][H]

  void resize(std::size_t n) {
    gate_i.assign(n, T(0));
    gate_f.assign(n, T(0));
    gate_g.assign(n, T(0));
    gate_o.assign(n, T(0));
    cell.assign(n, T(0));
    tanh_cell.assign(n, T(0));
  }
};

/// Standard LSTM; h_0 = c_0 = 0. Writes the full hidden sequence [L][H].
template <typename T>
void lstm_forward(const T* in, int L, int I, int H, const T* wx, const T* wh,
                  const T* b, T* h_seq, LstmActs<T>& acts,
                  const T* zeros /* >= H entries */) {
  const std::size_t gate_stride = static_cast<std::size_t>(H) * I;
  const std::size_t rec_stride = static_cast<std::size_t>(H) * H;
  for (int t = 0; t < L; ++t) {
    const T* x = in + static_cast<std::size_t>(t) * I;
    const T* h_prev = t > 0 ? h_seq + static_cast<std::size_t>(t - 1) * H : zeros;
    const T* c_prev = t > 0 ? acts.cell.data() + static_cast<std::size_t>(t - 1) * H : zeros;
    const std::size_t row = static_cast<std::size_t>(t) * H;
    for (int cidx = 0; cidx < H; ++cidx) {
      double pre[4];
      for (int gate = 0; gate < 4; ++gate) {
        const std::size_t wrow = static_cast<std::size_t>(gate) * gate_stride +
                                 static_cast<std::size_t>(cidx) * I;
        const std::size_t rrow = static_cast<std::size_t>(gate) * rec_stride +
                                 static_cast<std::size_t>(cidx) * H;
        pre[gate] = static_cast<double>(b[gate * H + cidx]) +
                    dot_acc(wx + wrow, x, static_cast<std::size_t>(I)) +
                    dot_acc(wh + rrow, h_prev, static_cast<std::size_t>(H));
      }
      const double gi = logistic(pre[0]);
      const double gf = logistic(pre[1]);
      const double gg = std::tanh(pre[2]);
      const double go = logistic(pre[3]);
      const double c = gf * static_cast<double>(c_prev[cidx]) + gi * gg;
      const double tc = std::tanh(c);
      acts.gate_i[row + cidx] = static_cast<T>(gi);
      acts.gate_f[row + cidx] = static_cast<T>(gf);
      acts.gate_g[row + cidx] = static_cast<T>(gg);
      acts.gate_o[row + cidx] = static_cast<T>(go);
      acts.cell[row + cidx] = static_cast<T>(c);
      acts.tanh_cell[row + cidx] = static_cast<T>(tc);
      h_seq[row + cidx] = static_cast<T>(go * tc);
    }
  }
}

/// BPTT. dh_out is [L][H] when seq_grad, else [H] applied at the last step.
/// din (nullable) receives input gradients; dwx/dwh/db accumulate.
/// Scratch buffers dh_carry/dc_carry/da must hold H and 4*H entries.
template <typename T>
void lstm_backward(const T* in, int L, int I, int H, const T* wx, const T* wh,
                   const T* h_seq, const LstmActs<T>& acts, const T* dh_out,
                   bool seq_grad, T* dwx, T* dwh, T* db, T* din, T* dh_carry,
                   T* dc_carry, T* da, const T* zeros) {
  const std::size_t gate_stride = static_cast<std::size_t>(H) * I;
  const std::size_t rec_stride = static_cast<std::size_t>(H) * H;
  std::fill(dh_carry, dh_carry + H, T(0));
  std::fill(dc_carry, dc_carry + H, T(0));
  for (int t = L - 1; t >= 0; --t) {
    const std::size_t row = static_cast<std::size_t>(t) * H;
    const T* x = in + static_cast<std::size_t>(t) * I;
    const T* h_prev = t > 0 ? h_seq + static_cast<std::size_t>(t - 1) * H : zeros;
    const T* c_prev = t > 0 ? acts.cell.data() + static_cast<std::size_t>(t - 1) * H : zeros;
    for (int cidx = 0; cidx < H; ++cidx) {
      double dh = static_cast<double>(dh_carry[cidx]);
      if (seq_grad) {
        dh += static_cast<double>(dh_out[row + cidx]);
      } else if (t == L - 1) {
        dh += static_cast<double>(dh_out[cidx]);
      }
      const double gi = acts.gate_i[row + cidx];
      const double gf = acts.gate_f[row + cidx];
      const double gg = acts.gate_g[row + cidx];
      const double go = acts.gate_o[row + cidx];
      const double tc = acts.tanh_cell[row + cidx];
      double dc = static_cast<double>(dc_carry[cidx]) + dh * go * (1.0 - tc * tc);
      const double da_o = dh * tc * go * (1.0 - go);
      const double da_i = dc * gg * gi * (1.0 - gi);
      const double da_g = dc * gi * (1.0 - gg * gg);
      const double da_f = dc * static_cast<double>(c_prev[cidx]) * gf * (1.0 - gf);
      da[0 * H + cidx] = static_cast<T>(da_i);
      da[1 * H + cidx] = static_cast<T>(da_f);
      da[2 * H + cidx] = static_cast<T>(da_g);
      da[3 * H + cidx] = static_cast<T>(da_o);
      dc_carry[cidx] = static_cast<T>(dc * gf);
    }
    // Weight/bias gradients and the carried state for step t-1.
    std::fill(dh_carry, dh_carry + H, T(0));
    T* dx = din != nullptr ? din + static_cast<std::size_t>(t) * I : nullptr;
    for (int gate = 0; gate < 4; ++gate) {
      for (int cidx = 0; cidx < H; ++cidx) {
        const T a = da[gate * H + cidx];
        if (a == T(0)) continue;
        const std::size_t wrow = static_cast<std::size_t>(gate) * gate_stride +
                                 static_cast<std::size_t>(cidx) * I;
        const std::size_t rrow = static_cast<std::size_t>(gate) * rec_stride +
                                 static_cast<std::size_t>(cidx) * H;
        axpy(a, x, dwx + wrow, static_cast<std::size_t>(I));
        axpy(a, h_prev, dwh + rrow, static_cast<std::size_t>(H));
        db[gate * H + cidx] += a;
        if (dx != nullptr)
          axpy(a, wx + wrow, dx, static_cast<std::size_t>(I));
        axpy(a, wh + rrow, dh_carry, static_cast<std::size_t>(H));
      }
    }
  }
}

}  // namespace detail

/// Scratch buffers for one sample's forward/backward pass. Reusable across
/// calls; one instance per worker thread.
template <typename T>
struct Workspace {
  std::vector<T> conv1_out, conv2_out, drop1_out, drop1_mask;
  std::vector<T> pool_out;
  std::vector<int> pool_argmax;
  std::vector<T> lstm1_h, drop2_out, drop2_mask;
  detail::LstmActs<T> lstm1_acts, lstm2_acts;
  std::vector<T> lstm2_h, drop3_out, drop3_mask;
  std::vector<T> zeros;
  // backward scratch
  std::vector<T> d_drop1, d_lstm1_h, d_lstm1_in, d_lstm2_h, d_conv1_out;
  std::vector<T> dh_carry, dc_carry, da;
  std::array<double, 2> probs{};

  explicit Workspace(const Architecture& a) {
    const std::size_t L = a.input_length;
    const std::size_t P = a.pooled_length();
    conv1_out.resize(L * a.conv1_filters);
    conv2_out.resize(L * a.conv2_filters);
    drop1_out.resize(L * a.conv2_filters);
    drop1_mask.resize(L * a.conv2_filters);
    pool_out.resize(P * a.conv2_filters);
    pool_argmax.resize(P * a.conv2_filters);
    lstm1_h.resize(P * a.lstm1_cells);
    drop2_out.resize(P * a.lstm1_cells);
    drop2_mask.resize(P * a.lstm1_cells);
    lstm1_acts.resize(P * a.lstm1_cells);
    lstm2_acts.resize(P * a.lstm2_cells);
    lstm2_h.resize(P * a.lstm2_cells);
    drop3_out.resize(a.lstm2_cells);
    drop3_mask.resize(a.lstm2_cells);
    zeros.assign(std::max(a.lstm1_cells, a.lstm2_cells), T(0));
    d_drop1.resize(L * a.conv2_filters);
    d_lstm1_h.resize(P * a.lstm1_cells);
    d_lstm1_in.resize(P * a.conv2_filters);
    d_lstm2_h.resize(a.lstm2_cells);
    d_conv1_out.resize(L * a.conv1_filters);
    dh_carry.resize(std::max(a.lstm1_cells, a.lstm2_cells));
    dc_carry.resize(std::max(a.lstm1_cells, a.lstm2_cells));
    da.resize(4u * std::max(a.lstm1_cells, a.lstm2_cells));
  }
};

/// The classifier: flat parameter store plus the architecture that shapes it.
template <typename T>
struct Net {
  Architecture arch;
  ParamLayout layout;
  std::vector<T> params;

  explicit Net(const Architecture& a) : arch(a), layout(a), params(layout.total, T(0)) {
    if (a.input_length < 2 || a.input_length % 2 != 0)
      throw DataError("net: input_length must be even and >= 2");
    if (a.conv_kernel < 1 || a.conv_kernel > a.input_length)
      throw DataError("net: conv kernel must be in [1, input_length]");
  }

  /// Glorot-style uniform init for conv/dense and both LSTM kernels.
  /// Conv biases start slightly positive so the ReLU stacks pass signal from
  /// the first optimizer step; LSTM forget gates start at 1, other biases 0.
  void init_weights(std::uint64_t seed) {
    Rng rng(seed);
    auto fill_uniform = [&](std::size_t at, std::size_t n, double limit) {
      for (std::size_t i = 0; i < n; ++i)
        params[at + i] = static_cast<T>((2.0 * rng.uniform01() - 1.0) * limit);
    };
    const auto& a = arch;
    fill_uniform(layout.conv1_w, a.conv1_weights(),
                 std::sqrt(6.0 / (a.conv_kernel * (a.in_channels + a.conv1_filters))));
    fill_uniform(layout.conv2_w, a.conv2_weights(),
                 std::sqrt(6.0 / (a.conv_kernel * (a.conv1_filters + a.conv2_filters))));
    for (int c = 0; c < a.conv1_filters; ++c) params[layout.conv1_b + c] = T(0.05);
    for (int c = 0; c < a.conv2_filters; ++c) params[layout.conv2_b + c] = T(0.05);
    auto init_lstm = [&](std::size_t wx, std::size_t wh, std::size_t b, int in,
                         int cells) {
      fill_uniform(wx, 4u * cells * in, std::sqrt(6.0 / (in + cells)));
      fill_uniform(wh, 4u * cells * cells, std::sqrt(3.0 / cells));
      for (int c = 0; c < cells; ++c) params[b + cells + c] = T(1);  // forget gate
    };
    init_lstm(layout.lstm1_wx, layout.lstm1_wh, layout.lstm1_b, a.conv2_filters,
              a.lstm1_cells);
    init_lstm(layout.lstm2_wx, layout.lstm2_wh, layout.lstm2_b, a.lstm1_cells,
              a.lstm2_cells);
    fill_uniform(layout.dense_w,
                 static_cast<std::size_t>(a.classes) * a.lstm2_cells,
                 std::sqrt(6.0 / (a.lstm2_cells + a.classes)));
  }
};

/// Forward pass on one sample (input [L][in_channels], time-major). Dropout
/// is active only when dropout_rng is non-null. Returns (p_nonflicker,
/// p_flicker); the pair sums to 1.
template <typename T>
std::array<double, 2> forward(const Net<T>& net, const T* input,
                              Workspace<T>& ws, Rng* dropout_rng = nullptr) {
  const auto& a = net.arch;
  const auto& lay = net.layout;
  const T* par = net.params.data();
  const int L = a.input_length;
  const int P = a.pooled_length();

  detail::conv1d_forward(input, L, a.in_channels, par + lay.conv1_w,
                         par + lay.conv1_b, a.conv1_filters, a.conv_kernel,
                         ws.conv1_out.data());
  detail::conv1d_forward(ws.conv1_out.data(), L, a.conv1_filters,
                         par + lay.conv2_w, par + lay.conv2_b, a.conv2_filters,
                         a.conv_kernel, ws.conv2_out.data());
  detail::dropout_forward(ws.conv2_out.data(), ws.conv2_out.size(),
                          a.dropout_rate, dropout_rng, ws.drop1_out.data(),
                          ws.drop1_mask.data());
  detail::maxpool2_forward(ws.drop1_out.data(), L, a.conv2_filters,
                           ws.pool_out.data(), ws.pool_argmax.data());
  detail::lstm_forward(ws.pool_out.data(), P, a.conv2_filters, a.lstm1_cells,
                       par + lay.lstm1_wx, par + lay.lstm1_wh, par + lay.lstm1_b,
                       ws.lstm1_h.data(), ws.lstm1_acts, ws.zeros.data());
  detail::dropout_forward(ws.lstm1_h.data(), ws.lstm1_h.size(), a.dropout_rate,
                          dropout_rng, ws.drop2_out.data(), ws.drop2_mask.data());
  detail::lstm_forward(ws.drop2_out.data(), P, a.lstm1_cells, a.lstm2_cells,
                       par + lay.lstm2_wx, par + lay.lstm2_wh, par + lay.lstm2_b,
                       ws.lstm2_h.data(), ws.lstm2_acts, ws.zeros.data());
  const T* h_last = ws.lstm2_h.data() + static_cast<std::size_t>(P - 1) * a.lstm2_cells;
  detail::dropout_forward(h_last, static_cast<std::size_t>(a.lstm2_cells),
                          a.dropout_rate, dropout_rng, ws.drop3_out.data(),
                          ws.drop3_mask.data());

  double logits[2];
  for (int k = 0; k < a.classes; ++k) {
    logits[k] = static_cast<double>(par[lay.dense_b + k]) +
                dot_acc(par + lay.dense_w + static_cast<std::size_t>(k) * a.lstm2_cells,
                        ws.drop3_out.data(), static_cast<std::size_t>(a.lstm2_cells));
  }
  const double zmax = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - zmax);
  const double e1 = std::exp(logits[1] - zmax);
  ws.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
  return ws.probs;
}

/// Loss and parameter gradient of one sample; grad (param_count, pre-zeroed
/// or accumulating) receives d loss / d params. Dropout masks drawn in the
/// forward pass are reused on the way back. Returns -log(p_label) with the
/// probability clamped at 1e-12.
template <typename T>
double sample_loss_and_grad(const Net<T>& net, const T* input, int label,
                            Rng* dropout_rng, Workspace<T>& ws, T* grad) {
  if (label != 0 && label != 1) throw DataError("labels must be 0 or 1");
  const auto probs = forward(net, input, ws, dropout_rng);
  const double loss = -std::log(std::max(probs[label], 1e-12));

  const auto& a = net.arch;
  const auto& lay = net.layout;
  const T* par = net.params.data();
  const int L = a.input_length;
  const int P = a.pooled_length();

  // Softmax + cross-entropy: dlogits = p - onehot(label).
  T dlogits[2];
  for (int k = 0; k < a.classes; ++k)
    dlogits[k] = static_cast<T>(probs[k] - (k == label ? 1.0 : 0.0));

  // Dense.
  std::fill(ws.d_lstm2_h.begin(), ws.d_lstm2_h.end(), T(0));
  for (int k = 0; k < a.classes; ++k) {
    grad[lay.dense_b + k] += dlogits[k];
    const std::size_t wrow = lay.dense_w + static_cast<std::size_t>(k) * a.lstm2_cells;
    axpy(dlogits[k], ws.drop3_out.data(), grad + wrow,
         static_cast<std::size_t>(a.lstm2_cells));
    axpy(dlogits[k], par + wrow, ws.d_lstm2_h.data(),
         static_cast<std::size_t>(a.lstm2_cells));
  }
  for (int c = 0; c < a.lstm2_cells; ++c) ws.d_lstm2_h[c] *= ws.drop3_mask[c];

  // LSTM 2 (gradient only at the final step).
  std::fill(ws.d_lstm1_h.begin(), ws.d_lstm1_h.end(), T(0));
  detail::lstm_backward(ws.drop2_out.data(), P, a.lstm1_cells, a.lstm2_cells,
                        par + lay.lstm2_wx, par + lay.lstm2_wh,
                        ws.lstm2_h.data(), ws.lstm2_acts, ws.d_lstm2_h.data(),
                        /*seq_grad=*/false, grad + lay.lstm2_wx,
                        grad + lay.lstm2_wh, grad + lay.lstm2_b,
                        ws.d_lstm1_h.data(), ws.dh_carry.data(),
                        ws.dc_carry.data(), ws.da.data(), ws.zeros.data());
  for (std::size_t i = 0; i < ws.d_lstm1_h.size(); ++i)
    ws.d_lstm1_h[i] *= ws.drop2_mask[i];

  // LSTM 1 (full-sequence gradient).
  std::fill(ws.d_lstm1_in.begin(), ws.d_lstm1_in.end(), T(0));
  detail::lstm_backward(ws.pool_out.data(), P, a.conv2_filters, a.lstm1_cells,
                        par + lay.lstm1_wx, par + lay.lstm1_wh,
                        ws.lstm1_h.data(), ws.lstm1_acts, ws.d_lstm1_h.data(),
                        /*seq_grad=*/true, grad + lay.lstm1_wx,
                        grad + lay.lstm1_wh, grad + lay.lstm1_b,
                        ws.d_lstm1_in.data(), ws.dh_carry.data(),
                        ws.dc_carry.data(), ws.da.data(), ws.zeros.data());

  // Max pool scatter, then the dropout mask behind it.
  std::fill(ws.d_drop1.begin(), ws.d_drop1.end(), T(0));
  detail::maxpool2_backward(ws.d_lstm1_in.data(), P, a.conv2_filters,
                            ws.pool_argmax.data(), ws.d_drop1.data());
  for (std::size_t i = 0; i < ws.d_drop1.size(); ++i)
    ws.d_drop1[i] *= ws.drop1_mask[i];

  // Conv stack.
  std::fill(ws.d_conv1_out.begin(), ws.d_conv1_out.end(), T(0));
  detail::conv1d_backward(ws.conv1_out.data(), L, a.conv1_filters,
                          par + lay.conv2_w, a.conv2_filters, a.conv_kernel,
                          ws.conv2_out.data(), ws.d_drop1.data(),
                          grad + lay.conv2_w, grad + lay.conv2_b,
                          ws.d_conv1_out.data());
  detail::conv1d_backward(input, L, a.in_channels, par + lay.conv1_w,
                          a.conv1_filters, a.conv_kernel, ws.conv1_out.data(),
                          ws.d_conv1_out.data(), grad + lay.conv1_w,
                          grad + lay.conv1_b, static_cast<T*>(nullptr));
  return loss;
}

}  // namespace flicker::nn
