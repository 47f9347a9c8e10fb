#include "ftol/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace ftol {

void JointCounts::add(int prediction, int label, std::uint64_t count) {
  if (prediction < 0 || static_cast<std::size_t>(prediction) >= classes_ ||
      label < 0 || static_cast<std::size_t>(label) >= classes_) {
    throw LabelRangeError("joint counts: pair (" + std::to_string(prediction) +
                          ", " + std::to_string(label) + ") outside 0.." +
                          std::to_string(classes_ - 1));
  }
  counts_[static_cast<std::size_t>(prediction) * classes_ +
          static_cast<std::size_t>(label)] += count;
  total_ += count;
}

void JointCounts::merge(const JointCounts& other) {
  if (other.classes_ != classes_) {
    throw ShapeError("cannot merge joints of different class counts");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

JointCounts JointCounts::transposed() const {
  JointCounts out(classes_);
  for (std::size_t t = 0; t < classes_; ++t) {
    for (std::size_t y = 0; y < classes_; ++y) {
      out.counts_[y * classes_ + t] = counts_[t * classes_ + y];
    }
  }
  out.total_ = total_;
  return out;
}

std::vector<std::uint64_t> JointCounts::prediction_histogram() const {
  std::vector<std::uint64_t> h(classes_, 0);
  for (std::size_t t = 0; t < classes_; ++t) {
    for (std::size_t y = 0; y < classes_; ++y) h[t] += at(t, y);
  }
  return h;
}

std::vector<std::uint64_t> JointCounts::label_histogram() const {
  std::vector<std::uint64_t> h(classes_, 0);
  for (std::size_t t = 0; t < classes_; ++t) {
    for (std::size_t y = 0; y < classes_; ++y) h[y] += at(t, y);
  }
  return h;
}

JointCounts joint_counts(std::span<const int> predictions,
                         std::span<const int> labels, std::size_t classes) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("joint counts: " + std::to_string(predictions.size()) +
                     " predictions vs " + std::to_string(labels.size()) +
                     " labels");
  }
  JointCounts joint(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    joint.add(predictions[i], labels[i]);
  }
  return joint;
}

double entropy_bits(std::span<const std::uint64_t> histogram) {
  std::uint64_t n = 0;
  for (auto c : histogram) n += c;
  if (n == 0) return 0.0;
  // Summing in sorted order makes the result independent of the cell order.
  std::vector<std::uint64_t> sorted(histogram.begin(), histogram.end());
  std::sort(sorted.begin(), sorted.end());
  double h = 0.0;
  for (auto c : sorted) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log2(p);
  }
  return h;
}

double mutual_information(const JointCounts& joint) {
  if (joint.total() == 0) {
    throw ConfigError("mutual information of an empty joint");
  }
  const double h_y = entropy_bits(joint.label_histogram());
  const double h_t = entropy_bits(joint.prediction_histogram());
  const double h_joint = entropy_bits(joint.raw());
  // H(Y|T) = sum_t p(t) H(Y|T=t) = H(T,Y) - H(T). Grouping the sum as
  // (H(Y) + H(T)) - H(T,Y) makes the estimate bit-identical under
  // transposition. Rounding can leave a tiny negative residue at
  // independence.
  return std::max(0.0, (h_y + h_t) - h_joint);
}

double accuracy(const JointCounts& joint) {
  if (joint.total() == 0) return 0.0;
  std::uint64_t diag = 0;
  for (std::size_t k = 0; k < joint.classes(); ++k) diag += joint.at(k, k);
  return static_cast<double>(diag) / static_cast<double>(joint.total());
}

SnrDb snr_db(double x_norm, double delta_norm) {
  if (delta_norm == 0.0) return {kSnrCapDb};
  const double v = 20.0 * std::log10(1.0 + x_norm / delta_norm);
  return {std::clamp(v, 0.0, kSnrCapDb)};
}

SnrDb snr_db(std::span<const float> x, std::span<const float> delta) {
  if (x.size() != delta.size()) {
    throw ShapeError("snr: signal has " + std::to_string(x.size()) +
                     " values, perturbation " + std::to_string(delta.size()));
  }
  return snr_db(l2_norm(x), l2_norm(delta));
}

double delta_norm_for_snr(double x_norm, SnrDb snr) {
  if (!(snr.value > 0.0)) {
    throw ConfigError("SNR budget must be > 0 dB, got " +
                      std::to_string(snr.value));
  }
  return x_norm / (std::pow(10.0, snr.value / 20.0) - 1.0);
}

}  // namespace ftol
