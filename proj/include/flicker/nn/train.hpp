#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flicker/nn/net.hpp"

namespace flicker::nn {

/// In-memory training set. Inputs are time-major float frames:
/// sample i occupies inputs[i*length*2 .. ), each frame = (raw, rollvar).
struct Dataset {
  int length = 0;
  std::vector<float> inputs;
  std::vector<int> labels;

  std::size_t count() const { return labels.size(); }
  const float* sample(std::size_t i) const {
    return inputs.data() + i * static_cast<std::size_t>(length) * 2;
  }
};

/// Adam with bias correction; moments live alongside the parameters.
struct Adam {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<float> m, v;
  std::int64_t t = 0;

  explicit Adam(std::size_t n) : m(n, 0.f), v(n, 0.f) {}
  void step(std::span<float> params, std::span<const float> grads, int threads);
};

struct TrainConfig {
  double lr = 0.01;
  int batch_size = 32;
  int max_epochs = 5;
  int patience = 2;      // early stopping on validation accuracy
  double val_fraction = 0.2;
  std::uint64_t shuffle_seed = 0;
  int threads = 0;  // 0 = auto
};

struct EpochStats {
  double loss = 0;       // running training loss (training mode)
  double accuracy = 0;   // running training accuracy
  double val_loss = 0;
  double val_accuracy = 0;
};

struct TrainResult {
  std::vector<float> best_weights;
  std::vector<EpochStats> history;
  int best_epoch = -1;  // 0-based epoch of the checkpointed weights
};

/// Mean loss and mean parameter gradient over a batch. Per-sample passes may
/// run on several threads; gradients are reduced in sample-index order, so
/// the result does not depend on the thread count. dropout_seed_base derives
/// one dropout stream per batch position. Returns the mean loss;
/// correct_out (optional) receives the number of argmax-correct samples.
double batch_loss_and_grad(const Net<float>& net, const Dataset& data,
                           std::span<const std::uint32_t> batch,
                           std::uint64_t dropout_seed_base, int threads,
                           std::vector<float>& grad_out, int* correct_out);

/// Inference-mode loss/accuracy over an index set.
void evaluate_split(const Net<float>& net, const Dataset& data,
                    std::span<const std::uint32_t> indices, int threads,
                    double& loss_out, double& accuracy_out);

/// Minibatch training with a stratified validation split, early stopping
/// (patience on validation accuracy) and best-weights checkpointing.
/// Throws DataError when the training split is smaller than one batch or a
/// class is missing.
TrainResult train(Net<float>& net, const Dataset& data, const TrainConfig& config);

}  // namespace flicker::nn
