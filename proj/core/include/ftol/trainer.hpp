#pragma once

#include <functional>
#include <vector>

#include "ftol/data.hpp"
#include "ftol/network.hpp"

namespace ftol {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean weighted CE over the epoch
  double accuracy = 0.0;  // training accuracy before each update
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Minibatch SGD. Each epoch visits a fresh permutation drawn from
// (cfg.seed, shuffle stream, epoch); the final short batch is kept.
// Throws NumericalError if the loss or any activation stops being finite.
std::vector<EpochStats> train(Network& network, const Dataset& data,
                              const SgdConfig& cfg,
                              const EpochCallback& on_epoch = {});

// One epoch; exposed for tests that inspect per-epoch behaviour.
EpochStats train_epoch(Network& network, const Dataset& data,
                       const SgdConfig& cfg, std::size_t epoch);

}  // namespace ftol
