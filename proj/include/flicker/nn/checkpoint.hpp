#pragma once

#include <string>
#include <vector>

#include "flicker/nn/net.hpp"
#include "flicker/nn/train.hpp"

namespace flicker::nn {

/// Serializable trained model: plain-text header (architecture, per-epoch
/// history) followed by the raw little-endian float32 weight payload in
/// ParamLayout order. Save -> load -> save is byte-identical.
struct Checkpoint {
  Architecture arch;
  std::vector<float> weights;
  std::vector<EpochStats> history;
  int format_version = 1;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Materialize a network from checkpoint weights.
Net<float> to_net(const Checkpoint& ckpt);

}  // namespace flicker::nn
