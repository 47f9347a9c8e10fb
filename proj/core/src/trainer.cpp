#include "ftol/trainer.hpp"

#include <cmath>
#include <numeric>

#include "ftol/model.hpp"
#include "ftol/random.hpp"

namespace ftol {

EpochStats train_epoch(Network& network, const Dataset& data,
                       const SgdConfig& cfg, std::size_t epoch) {
  cfg.validate();
  const std::size_t n = data.size();
  if (n == 0) throw ConfigError("training set is empty");
  if (cfg.class_weights.size() != network.class_count) {
    throw ConfigError("need one class weight per class");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(cfg.seed, Stream::kShuffle, epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

  Shape one_shape = data.images.shape();
  one_shape[0] = 1;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += cfg.batch_size) {
    const std::size_t stop = std::min(n, start + cfg.batch_size);
    const float inv_batch = 1.0f / static_cast<float>(stop - start);
    NetworkGradients<float> batch_grads;
    for (std::size_t b = start; b < stop; ++b) {
      const std::size_t idx = order[b];
      auto src = data.images.item(idx);
      Tensor x(one_shape, std::vector<float>(src.begin(), src.end()));
      auto trace = network.forward_trace(x);
      Tensor logits = trace.activations.back();
      logits.reshape(Shape{1, network.class_count});
      const int label = data.labels[idx];
      auto ce = softmax_weighted_ce(logits, std::span<const int>(&label, 1),
                                    cfg.class_weights);
      loss_sum += ce.loss;
      if (argmax(std::span<const float>(logits.data())) == label) ++correct;
      for (float& g : ce.grad_logits.data()) g *= inv_batch;
      batch_grads.accumulate(network.backward(trace, ce.grad_logits, false));
    }
    sgd_step(network, batch_grads, cfg);
  }
  EpochStats stats;
  stats.epoch = epoch;
  stats.loss = loss_sum / static_cast<double>(n);
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  if (!std::isfinite(stats.loss)) {
    throw NumericalError("training loss diverged in epoch " +
                         std::to_string(epoch));
  }
  return stats;
}

std::vector<EpochStats> train(Network& network, const Dataset& data,
                              const SgdConfig& cfg,
                              const EpochCallback& on_epoch) {
  cfg.validate();
  std::vector<EpochStats> history;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    history.push_back(train_epoch(network, data, cfg, epoch));
    if (on_epoch) on_epoch(history.back());
  }
  return history;
}

}  // namespace ftol
