#include "flicker/nn/train.hpp"

#include <algorithm>
#include <cmath>

#include "flicker/parallel.hpp"

namespace flicker::nn {

void Adam::step(std::span<float> params, std::span<const float> grads,
                int threads) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  const std::size_t n = params.size();
  const std::size_t chunk = 1 << 16;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  parallel_for(chunks, threads, [&](std::size_t ci) {
    const std::size_t lo = ci * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) {
      const double g = grads[i];
      const double mi = beta1 * m[i] + (1.0 - beta1) * g;
      const double vi = beta2 * v[i] + (1.0 - beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      params[i] -= static_cast<float>(lr * (mi / bc1) /
                                      (std::sqrt(vi / bc2) + eps));
    }
  });
}

namespace {

std::uint64_t derive_dropout_seed(std::uint64_t base, std::size_t position) {
  // SplitMix64 scrambles additive seeds; keep streams distinct per position.
  return base + 0x9E3779B97F4A7C15ull * (position + 1);
}

void fisher_yates(std::vector<std::uint32_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

double batch_loss_and_grad(const Net<float>& net, const Dataset& data,
                           std::span<const std::uint32_t> batch,
                           std::uint64_t dropout_seed_base, int threads,
                           std::vector<float>& grad_out, int* correct_out) {
  const std::size_t bsz = batch.size();
  const std::size_t np = net.layout.total;
  grad_out.assign(np, 0.f);

  // Per-sample gradient buffers, reduced in index order afterwards.
  std::vector<std::vector<float>> sample_grads(bsz);
  std::vector<double> losses(bsz, 0.0);
  std::vector<char> correct(bsz, 0);

  threads = resolve_threads(threads);
  std::vector<Workspace<float>> workspaces;
  workspaces.reserve(threads);
  for (int i = 0; i < threads; ++i) workspaces.emplace_back(net.arch);

  const std::size_t workers = std::min<std::size_t>(threads, bsz ? bsz : 1);
  parallel_for(workers, threads, [&](std::size_t w) {
    Workspace<float>& ws = workspaces[w];
    const std::size_t lo = bsz * w / workers;
    const std::size_t hi = bsz * (w + 1) / workers;
    for (std::size_t s = lo; s < hi; ++s) {
      sample_grads[s].assign(np, 0.f);
      Rng drop_rng(derive_dropout_seed(dropout_seed_base, s));
      const int label = data.labels[batch[s]];
      losses[s] = sample_loss_and_grad(net, data.sample(batch[s]), label,
                                       net.arch.dropout_rate > 0 ? &drop_rng : nullptr,
                                       ws, sample_grads[s].data());
      correct[s] = (ws.probs[1] > ws.probs[0] ? 1 : 0) == label;
    }
  });

  // Elementwise mean over samples in fixed order; chunked over parameters.
  const double inv = bsz > 0 ? 1.0 / static_cast<double>(bsz) : 0.0;
  const std::size_t chunk = 1 << 14;
  const std::size_t chunks = (np + chunk - 1) / chunk;
  parallel_for(chunks, threads, [&](std::size_t ci) {
    const std::size_t lo = ci * chunk;
    const std::size_t hi = std::min(np, lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) {
      double acc = 0;
      for (std::size_t s = 0; s < bsz; ++s) acc += sample_grads[s][i];
      grad_out[i] = static_cast<float>(acc * inv);
    }
  });

  double loss = 0;
  int ncorrect = 0;
  for (std::size_t s = 0; s < bsz; ++s) {
    loss += losses[s];
    ncorrect += correct[s];
  }
  if (correct_out != nullptr) *correct_out = ncorrect;
  return loss * inv;
}

void evaluate_split(const Net<float>& net, const Dataset& data,
                    std::span<const std::uint32_t> indices, int threads,
                    double& loss_out, double& accuracy_out) {
  const std::size_t n = indices.size();
  std::vector<double> losses(n, 0.0);
  std::vector<char> correct(n, 0);
  threads = resolve_threads(threads);
  std::vector<Workspace<float>> workspaces;
  for (int i = 0; i < threads; ++i) workspaces.emplace_back(net.arch);
  const std::size_t workers = std::min<std::size_t>(threads, n ? n : 1);
  parallel_for(workers, threads, [&](std::size_t w) {
    Workspace<float>& ws = workspaces[w];
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    for (std::size_t s = lo; s < hi; ++s) {
      const int label = data.labels[indices[s]];
      const auto probs = forward(net, data.sample(indices[s]), ws, nullptr);
      losses[s] = -std::log(std::max(probs[label], 1e-12));
      correct[s] = (probs[1] > probs[0] ? 1 : 0) == label;
    }
  });
  double loss = 0;
  int ncorrect = 0;
  for (std::size_t s = 0; s < n; ++s) {
    loss += losses[s];
    ncorrect += correct[s];
  }
  loss_out = n ? loss / static_cast<double>(n) : 0.0;
  accuracy_out = n ? static_cast<double>(ncorrect) / static_cast<double>(n) : 0.0;
}

TrainResult train(Net<float>& net, const Dataset& data,
                  const TrainConfig& config) {
  if (data.count() == 0) throw DataError("train: empty dataset");
  if (!(config.val_fraction > 0 && config.val_fraction < 1))
    throw DataError("train: val_fraction must be in (0, 1)");
  if (data.length != net.arch.input_length)
    throw DataError("train: dataset length does not match the model input length");

  // Stratified shuffle/split so both classes appear in both sets.
  std::vector<std::uint32_t> by_class[2];
  for (std::size_t i = 0; i < data.count(); ++i) {
    const int label = data.labels[i];
    if (label != 0 && label != 1) throw DataError("train: labels must be 0 or 1");
    by_class[label].push_back(static_cast<std::uint32_t>(i));
  }
  if (by_class[0].empty() || by_class[1].empty())
    throw DataError("train: both classes must be present");

  Rng shuffle_rng(config.shuffle_seed);
  std::vector<std::uint32_t> train_idx, val_idx;
  for (auto& cls : by_class) {
    fisher_yates(cls, shuffle_rng);
    const std::size_t nval = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(config.val_fraction * static_cast<double>(cls.size()))));
    if (nval >= cls.size())
      throw DataError("train: validation split leaves no training samples");
    val_idx.insert(val_idx.end(), cls.begin(), cls.begin() + nval);
    train_idx.insert(train_idx.end(), cls.begin() + nval, cls.end());
  }
  if (train_idx.size() < static_cast<std::size_t>(config.batch_size))
    throw DataError("train: training split smaller than one batch");

  Adam adam(net.layout.total);
  adam.lr = config.lr;

  TrainResult result;
  result.best_weights = net.params;
  double best_val_acc = -1.0;
  int epochs_since_best = 0;
  std::vector<float> grads;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    fisher_yates(train_idx, shuffle_rng);
    double epoch_loss = 0;
    std::size_t epoch_correct = 0, seen = 0;
    const std::uint64_t epoch_seed_base =
        config.shuffle_seed ^ (0xD1B54A32D192ED03ull * (epoch + 1));

    for (std::size_t start = 0; start < train_idx.size();
         start += config.batch_size) {
      const std::size_t count =
          std::min<std::size_t>(config.batch_size, train_idx.size() - start);
      std::span<const std::uint32_t> batch(train_idx.data() + start, count);
      int correct = 0;
      const double loss = batch_loss_and_grad(
          net, data, batch, epoch_seed_base + start, config.threads, grads,
          &correct);
      adam.step(net.params, grads, config.threads);
      epoch_loss += loss * static_cast<double>(count);
      epoch_correct += correct;
      seen += count;
    }

    EpochStats stats;
    stats.loss = epoch_loss / static_cast<double>(seen);
    // Training accuracy is the model's end-of-epoch skill on the training
    // split (inference mode); the running in-batch count understates it
    // while the weights are still moving.
    double train_eval_loss = 0;
    evaluate_split(net, data, train_idx, config.threads, train_eval_loss,
                   stats.accuracy);
    evaluate_split(net, data, val_idx, config.threads, stats.val_loss,
                   stats.val_accuracy);
    result.history.push_back(stats);
    (void)epoch_correct;

    if (stats.val_accuracy > best_val_acc) {
      best_val_acc = stats.val_accuracy;
      result.best_weights = net.params;
      result.best_epoch = epoch;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace flicker::nn
