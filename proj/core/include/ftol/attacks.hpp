#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ftol/metrics.hpp"
#include "ftol/network.hpp"

namespace ftol {

enum class Norm { kL2, kLinf };

std::string norm_name(Norm norm);

// Adversarial objective. OneTgt maps label y to permutation[y].
struct Objective {
  enum class Kind { kMiscls, kOneTgt, kAllTgt };

  Kind kind = Kind::kMiscls;
  std::array<int, 10> permutation = shift_permutation();

  static constexpr std::array<int, 10> shift_permutation() {
    return {1, 2, 3, 4, 5, 6, 7, 8, 9, 0};
  }
  static Objective miscls() { return {Kind::kMiscls, shift_permutation()}; }
  static Objective one_target(
      std::array<int, 10> permutation = shift_permutation());
  static Objective all_targets() { return {Kind::kAllTgt, shift_permutation()}; }

  // "miscls", "one-tgt" or "all-tgt".
  static Objective parse(const std::string& name);
  std::string name() const;
  bool targeted() const { return kind != Kind::kMiscls; }

  // Attack targets for an input of the given label; -1 means untargeted.
  std::vector<int> targets_for(int label) const;
};

struct BimConfig {
  Norm norm = Norm::kL2;
  double epsilon = 0.0;
  int steps = 40;
  // 0 selects step_scale * epsilon / steps.
  double step_size = 0.0;
  double step_scale = 2.5;
  Objective objective;
  std::uint64_t seed = 0;
  // When > 0, stop once the mean adversarial margin over all rows reaches
  // this value. A row's adversarial margin is its prediction margin when the
  // prediction meets the objective, else 0.
  double stop_mean_margin = 0.0;

  double step_for(double eps) const {
    return step_size > 0.0 ? step_size : step_scale * eps / steps;
  }
  void validate() const;
};

struct SpatialTransform {
  double rotation_deg = 0.0;
  int shift_x = 0;  // columns, positive moves content right
  int shift_y = 0;  // rows, positive moves content down
};

// One row per attacked variant. AllTgt yields 9 rows per input, ordered by
// input then by target.
struct AttackResult {
  Tensor adversarial;
  std::vector<int> labels;   // original label of each row
  std::vector<int> targets;  // -1 for untargeted rows
  std::vector<int> preds;    // empty when no network was involved
  std::vector<double> per_example_norms;  // in the attack's own norm
  std::vector<double> per_example_l2;
  std::vector<double> per_example_snr;
  // CE(true) for untargeted rows, CE(target) for targeted rows.
  std::vector<double> losses;
  std::vector<SpatialTransform> transforms;  // spatial attack only
  int steps_run = 0;
  double achieved_snr = 0.0;  // mean of per_example_snr

  std::size_t rows() const { return labels.size(); }
};

// Per image, white Gaussian noise rescaled so that snr_db(x, delta) equals
// target_snr. Image i draws from sub-stream (seed, i).
AttackResult awgn(const Tensor& x_batch, SnrDb target_snr, std::uint64_t seed,
                  int threads = 1);

// Basic iterative method. Miscls ascends CE(true), targeted objectives
// descend CE(target). L2 steps along g/||g|| and projects onto the ball,
// Linf steps along sign(g) and clamps. No pixel-range clipping. A row stops
// early once its gradient norm drops below 1e-12.
AttackResult bim(const Network& network, const Tensor& x_batch,
                 std::span<const int> labels, const BimConfig& cfg,
                 int threads = 1);

// Same, with an epsilon per input image (cfg.epsilon is ignored).
AttackResult bim(const Network& network, const Tensor& x_batch,
                 std::span<const int> labels, const BimConfig& cfg,
                 std::span<const double> epsilons, int threads = 1);

// Per-image epsilon for a nominal SNR budget: the L2 radius from
// delta_norm_for_snr, divided by sqrt(D) for Linf so the ball's corners sit
// on the same SNR.
std::vector<double> epsilons_for_snr(const Tensor& x_batch, Norm norm,
                                     SnrDb budget);

struct FoolingConfig {
  double sigma = 0.1;
  std::vector<int> targets = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double stop_margin = 0.999;
  int max_iters = 2000;
  double step_size = 0.1;  // L2 length of each step
  std::uint64_t seed = 0;
};

struct FoolingResult {
  Tensor images;  // (targets, 1, 32, 32)
  std::vector<int> targets;
  std::vector<int> iterations;
  std::vector<double> margins;
  std::vector<int> preds;
  std::vector<bool> converged;
  // SNR of the initial noise against a unit-variance image of the same size.
  std::vector<double> initial_snr;
};

// Nominal SNR of N(0, sigma^2) noise against unit-variance data.
double nominal_noise_snr(double sigma);

// Targeted L2 descent from pure noise until the prediction is the target
// with margin >= stop_margin, or max_iters. Non-convergence is reported in
// the result, not thrown.
FoolingResult fooling_images(const Network& network, const FoolingConfig& cfg,
                             int threads = 1);

// Rotation about the image centre followed by translation; bilinear
// sampling with zero fill.
void transform_image(std::span<const float> src, std::size_t height,
                     std::size_t width, const SpatialTransform& transform,
                     std::span<float> dst);

struct SpatialBudget {
  double max_rotation_deg = 0.0;
  int max_translation_px = 0;
};

inline constexpr double kRotationStepDeg = 5.0;

// Transforms tried for a budget: rotations at multiples of 5 degrees within
// +-max, integer shifts within +-max on both axes. Identity comes first.
std::vector<SpatialTransform> spatial_grid(const SpatialBudget& budget);

// Per image, among grid transforms whose CE(true) is at least the clean
// loss: a misclassifying one if any (highest loss first), else the
// highest-loss one. Ties keep the earlier grid entry, so a zero budget
// returns the input.
AttackResult spatial_worst_of_grid(const Network& network,
                                   const Tensor& x_batch,
                                   std::span<const int> labels,
                                   const SpatialBudget& budget,
                                   int threads = 1);

}  // namespace ftol
