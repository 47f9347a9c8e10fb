#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ftol/tensor.hpp"

namespace ftol {

// Empirical joint histogram of (prediction T, label Y); rows are T.
class JointCounts {
 public:
  explicit JointCounts(std::size_t classes = 10)
      : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return classes_; }
  std::uint64_t total() const { return total_; }

  std::uint64_t at(std::size_t t, std::size_t y) const {
    return counts_[t * classes_ + y];
  }
  void add(int prediction, int label, std::uint64_t count = 1);
  void merge(const JointCounts& other);
  JointCounts transposed() const;

  std::vector<std::uint64_t> prediction_histogram() const;  // row sums
  std::vector<std::uint64_t> label_histogram() const;       // column sums
  std::span<const std::uint64_t> raw() const { return counts_; }

  friend bool operator==(const JointCounts&, const JointCounts&) = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

JointCounts joint_counts(std::span<const int> predictions,
                         std::span<const int> labels,
                         std::size_t classes = 10);

// Plug-in entropy of a histogram in bits, with 0 log 0 = 0.
double entropy_bits(std::span<const std::uint64_t> histogram);

// I(T;Y) = H(Y) - H(Y|T) in bits, evaluated in double.
double mutual_information(const JointCounts& joint);

// Fraction of the joint on the diagonal.
double accuracy(const JointCounts& joint);

// Decibels, floored at 0; an exactly zero perturbation maps to the cap.
struct SnrDb {
  double value = 0.0;
};

inline constexpr double kSnrCapDb = 300.0;

// 20 log10(1 + ||x||_2 / ||delta||_2).
SnrDb snr_db(double x_norm, double delta_norm);
SnrDb snr_db(std::span<const float> x, std::span<const float> delta);

// ||delta|| = ||x|| / (10^(snr/20) - 1).
double delta_norm_for_snr(double x_norm, SnrDb snr);

}  // namespace ftol
