#include "ftol/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ftol/model.hpp"
#include "ftol/parallel.hpp"
#include "ftol/random.hpp"

namespace ftol {

std::string norm_name(Norm norm) { return norm == Norm::kL2 ? "l2" : "linf"; }

Objective Objective::one_target(std::array<int, 10> permutation) {
  std::array<bool, 10> seen{};
  for (std::size_t y = 0; y < 10; ++y) {
    const int t = permutation[y];
    if (t < 0 || t > 9 || seen[static_cast<std::size_t>(t)]) {
      throw ConfigError("one-tgt permutation is not a bijection over 0..9");
    }
    if (t == static_cast<int>(y)) {
      throw ConfigError("one-tgt permutation maps " + std::to_string(y) +
                        " to itself");
    }
    seen[static_cast<std::size_t>(t)] = true;
  }
  return {Kind::kOneTgt, permutation};
}

Objective Objective::parse(const std::string& name) {
  if (name == "miscls") return miscls();
  if (name == "one-tgt") return one_target();
  if (name == "all-tgt") return all_targets();
  throw ConfigError("unknown objective '" + name +
                    "' (expected miscls, one-tgt or all-tgt)");
}

std::string Objective::name() const {
  switch (kind) {
    case Kind::kMiscls:
      return "miscls";
    case Kind::kOneTgt:
      return "one-tgt";
    case Kind::kAllTgt:
      return "all-tgt";
  }
  return "?";
}

std::vector<int> Objective::targets_for(int label) const {
  switch (kind) {
    case Kind::kMiscls:
      return {-1};
    case Kind::kOneTgt:
      return {permutation[static_cast<std::size_t>(label)]};
    case Kind::kAllTgt: {
      std::vector<int> out;
      for (int t = 0; t < 10; ++t) {
        if (t != label) out.push_back(t);
      }
      return out;
    }
  }
  return {};
}

void BimConfig::validate() const {
  if (steps < 1) throw ConfigError("BIM needs at least one step");
  if (step_size < 0.0 || !(step_scale > 0.0)) {
    throw ConfigError("BIM step size must be positive");
  }
  if (stop_mean_margin < 0.0 || stop_mean_margin > 1.0) {
    throw ConfigError("stop mean margin must lie in [0, 1]");
  }
}

namespace {

Shape single_shape(const Tensor& batch) {
  Shape s = batch.shape();
  s[0] = 1;
  return s;
}

Tensor single(const Tensor& batch, std::size_t i) {
  auto src = batch.item(i);
  return Tensor(single_shape(batch), std::vector<float>(src.begin(), src.end()));
}

void check_batch(const Tensor& x, std::size_t labels) {
  if (x.rank() != 4) {
    throw ShapeError("attack expects an NCHW batch, got " +
                     shape_string(x.shape()));
  }
  if (labels != x.dim(0)) {
    throw ShapeError("attack: " + std::to_string(labels) + " labels for " +
                     std::to_string(x.dim(0)) + " images");
  }
}

struct RowEval {
  int pred = 0;
  double margin = 0.0;
  double loss = 0.0;  // CE against loss_label
};

RowEval evaluate_logits(std::span<const float> logits, int loss_label) {
  RowEval out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  std::vector<double> p(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(static_cast<double>(logits[k]) - m);
    z += p[k];
  }
  for (double& v : p) v /= z;
  out.pred = argmax(std::span<const float>(logits));
  out.margin = margin(std::span<const double>(p));
  out.loss = -(static_cast<double>(logits[static_cast<std::size_t>(loss_label)]) -
               m - std::log(z));
  return out;
}

RowEval evaluate(const Network& net, const Tensor& one, int loss_label) {
  Tensor logits = net.forward(one);
  return evaluate_logits(logits.data(), loss_label);
}

void fill_distortion(AttackResult& r, const Tensor& x_batch,
                     std::span<const std::size_t> sources, Norm norm) {
  const std::size_t m = sources.size();
  r.per_example_norms.resize(m);
  r.per_example_l2.resize(m);
  r.per_example_snr.resize(m);
  std::vector<float> delta(x_batch.item_size());
  double snr_sum = 0.0;
  for (std::size_t row = 0; row < m; ++row) {
    auto x = x_batch.item(sources[row]);
    auto adv = r.adversarial.item(row);
    for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = adv[k] - x[k];
    r.per_example_l2[row] = l2_norm(delta);
    r.per_example_norms[row] =
        norm == Norm::kL2 ? r.per_example_l2[row] : linf_norm(delta);
    r.per_example_snr[row] = snr_db(l2_norm(x), r.per_example_l2[row]).value;
    snr_sum += r.per_example_snr[row];
  }
  r.achieved_snr = m ? snr_sum / static_cast<double>(m) : kSnrCapDb;
}

}  // namespace

AttackResult awgn(const Tensor& x_batch, SnrDb target_snr, std::uint64_t seed,
                  int threads) {
  if (x_batch.rank() != 4) {
    throw ShapeError("awgn expects an NCHW batch, got " +
                     shape_string(x_batch.shape()));
  }
  if (!(target_snr.value > 0.0)) {
    throw ConfigError("AWGN target SNR must be > 0 dB");
  }
  const std::size_t n = x_batch.dim(0), d = x_batch.item_size();
  AttackResult r;
  r.adversarial = Tensor(x_batch.shape());
  r.labels.assign(n, -1);
  r.targets.assign(n, -1);
  r.per_example_norms.resize(n);
  r.per_example_l2.resize(n);
  r.per_example_snr.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, Stream::kAttack, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> noise(d);
    for (double& v : noise) v = normal(rng);
    auto x = x_batch.item(i);
    const double x_norm = l2_norm(x);
    const double want = delta_norm_for_snr(x_norm, target_snr);
    const double have = l2_norm(noise);
    const double scale = have > 0.0 ? want / have : 0.0;
    std::vector<float> delta(d);
    for (std::size_t k = 0; k < d; ++k) {
      delta[k] = static_cast<float>(noise[k] * scale);
    }
    auto adv = r.adversarial.item(i);
    for (std::size_t k = 0; k < d; ++k) adv[k] = x[k] + delta[k];
    r.per_example_l2[i] = l2_norm(delta);
    r.per_example_norms[i] = r.per_example_l2[i];
    r.per_example_snr[i] = snr_db(x_norm, r.per_example_l2[i]).value;
  });
  double sum = 0.0;
  for (double s : r.per_example_snr) sum += s;
  r.achieved_snr = n ? sum / static_cast<double>(n) : kSnrCapDb;
  r.steps_run = 1;
  return r;
}

std::vector<double> epsilons_for_snr(const Tensor& x_batch, Norm norm,
                                     SnrDb budget) {
  std::vector<double> eps(x_batch.dim(0));
  const double root_d = std::sqrt(static_cast<double>(x_batch.item_size()));
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double l2 = delta_norm_for_snr(l2_norm(x_batch.item(i)), budget);
    eps[i] = norm == Norm::kL2 ? l2 : l2 / root_d;
  }
  return eps;
}

AttackResult bim(const Network& network, const Tensor& x_batch,
                 std::span<const int> labels, const BimConfig& cfg,
                 int threads) {
  const std::vector<double> eps(x_batch.rank() ? x_batch.dim(0) : 0,
                                cfg.epsilon);
  return bim(network, x_batch, labels, cfg, eps, threads);
}

AttackResult bim(const Network& network, const Tensor& x_batch,
                 std::span<const int> labels, const BimConfig& cfg,
                 std::span<const double> epsilons, int threads) {
  cfg.validate();
  check_batch(x_batch, labels.size());
  if (epsilons.size() != labels.size()) {
    throw ShapeError("BIM: one epsilon per image required");
  }
  for (double e : epsilons) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw ConfigError("BIM epsilon must be > 0");
    }
  }

  std::vector<std::size_t> sources;
  AttackResult r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 9) {
      throw LabelRangeError("BIM: label " + std::to_string(labels[i]));
    }
    for (int t : cfg.objective.targets_for(labels[i])) {
      sources.push_back(i);
      r.labels.push_back(labels[i]);
      r.targets.push_back(t);
    }
  }
  const std::size_t m = sources.size();
  const std::size_t d = x_batch.item_size();
  std::vector<Tensor> adv(m);
  for (std::size_t row = 0; row < m; ++row) adv[row] = single(x_batch, sources[row]);
  std::vector<char> active(m, 1);
  const double sign = cfg.objective.targeted() ? -1.0 : 1.0;

  auto loss_label = [&](std::size_t row) {
    return r.targets[row] >= 0 ? r.targets[row] : r.labels[row];
  };
  auto adversarial_margin = [&](std::size_t row, const RowEval& e) {
    const bool met = r.targets[row] >= 0 ? e.pred == r.targets[row]
                                         : e.pred != r.labels[row];
    return met ? e.margin : 0.0;
  };

  for (int step = 0; step < cfg.steps; ++step) {
    parallel_for(m, threads, [&](std::size_t row) {
      if (!active[row]) return;
      const auto grad = input_gradient(
          network, adv[row],
          LossSpec{cfg.objective.targeted() ? LossKind::kTargetLabel
                                            : LossKind::kTrueLabel,
                   {loss_label(row)}});
      const auto g = grad.grad.data();
      const double g_norm = l2_norm(g);
      if (g_norm < 1e-12) {
        active[row] = 0;
        return;
      }
      const double eps = epsilons[sources[row]];
      const double alpha = cfg.step_for(eps);
      auto x0 = x_batch.item(sources[row]);
      auto x = adv[row].data();
      std::vector<double> delta(d);
      for (std::size_t k = 0; k < d; ++k) {
        const double dir = cfg.norm == Norm::kL2
                               ? g[k] / g_norm
                               : static_cast<double>((g[k] > 0) - (g[k] < 0));
        delta[k] = static_cast<double>(x[k]) + sign * alpha * dir -
                   static_cast<double>(x0[k]);
      }
      if (cfg.norm == Norm::kL2) {
        const double n2 = l2_norm(delta);
        if (n2 > eps) {
          for (double& v : delta) v *= eps / n2;
        }
      } else {
        for (double& v : delta) v = std::clamp(v, -eps, eps);
      }
      for (std::size_t k = 0; k < d; ++k) {
        x[k] = static_cast<float>(static_cast<double>(x0[k]) + delta[k]);
      }
    });
    r.steps_run = step + 1;
    if (std::none_of(active.begin(), active.end(), [](char a) { return a; })) {
      break;
    }
    if (cfg.stop_mean_margin > 0.0) {
      std::vector<double> margins(m);
      parallel_for(m, threads, [&](std::size_t row) {
        margins[row] =
            adversarial_margin(row, evaluate(network, adv[row], loss_label(row)));
      });
      double mean = 0.0;
      for (double v : margins) mean += v;
      mean /= static_cast<double>(m);
      if (mean >= cfg.stop_mean_margin) break;
    }
  }

  Shape out_shape = x_batch.shape();
  out_shape[0] = m;
  r.adversarial = Tensor(out_shape);
  r.preds.resize(m);
  r.losses.resize(m);
  parallel_for(m, threads, [&](std::size_t row) {
    std::copy(adv[row].data().begin(), adv[row].data().end(),
              r.adversarial.item(row).begin());
    const RowEval e = evaluate(network, adv[row], loss_label(row));
    r.preds[row] = e.pred;
    r.losses[row] = e.loss;
  });
  fill_distortion(r, x_batch, sources, cfg.norm);
  return r;
}

double nominal_noise_snr(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("noise sigma must be > 0");
  return 20.0 * std::log10(1.0 + 1.0 / sigma);
}

FoolingResult fooling_images(const Network& network, const FoolingConfig& cfg,
                             int threads) {
  if (!(cfg.sigma > 0.0)) throw ConfigError("fooling sigma must be > 0");
  if (!(cfg.step_size > 0.0)) throw ConfigError("fooling step must be > 0");
  if (cfg.max_iters < 0) throw ConfigError("max iterations must be >= 0");
  const std::size_t m = cfg.targets.size();
  const Shape one_shape{1, 1, kImageSide, kImageSide};
  const std::size_t d = kImageSide * kImageSide;

  FoolingResult out;
  out.targets = cfg.targets;
  out.images = Tensor(Shape{m, 1, kImageSide, kImageSide});
  out.iterations.assign(m, 0);
  out.margins.assign(m, 0.0);
  out.preds.assign(m, 0);
  out.converged.assign(m, false);
  out.initial_snr.assign(m, 0.0);
  std::vector<char> converged(m, 0);

  parallel_for(m, threads, [&](std::size_t row) {
    const int target = cfg.targets[row];
    if (target < 0 || static_cast<std::size_t>(target) >= network.class_count) {
      throw LabelRangeError("fooling target " + std::to_string(target));
    }
    Rng rng = make_rng(cfg.seed, Stream::kFool, static_cast<std::uint64_t>(target));
    std::normal_distribution<double> normal(0.0, cfg.sigma);
    Tensor x(one_shape);
    for (float& v : x.data()) v = static_cast<float>(normal(rng));
    out.initial_snr[row] =
        snr_db(std::sqrt(static_cast<double>(d)), l2_norm(x.data())).value;

    RowEval e = evaluate(network, x, target);
    int iter = 0;
    while (!(e.pred == target && e.margin >= cfg.stop_margin) &&
           iter < cfg.max_iters) {
      const auto grad =
          input_gradient(network, x, LossSpec::ce_target({target}));
      const double g_norm = l2_norm(grad.grad.data());
      if (g_norm < 1e-12) break;
      auto xs = x.data();
      auto g = grad.grad.data();
      for (std::size_t k = 0; k < d; ++k) {
        xs[k] = static_cast<float>(xs[k] - cfg.step_size * g[k] / g_norm);
      }
      ++iter;
      e = evaluate(network, x, target);
    }
    std::copy(x.data().begin(), x.data().end(), out.images.item(row).begin());
    out.iterations[row] = iter;
    out.margins[row] = e.margin;
    out.preds[row] = e.pred;
    converged[row] = e.pred == target && e.margin >= cfg.stop_margin;
  });
  for (std::size_t row = 0; row < m; ++row) out.converged[row] = converged[row];
  return out;
}

void transform_image(std::span<const float> src, std::size_t height,
                     std::size_t width, const SpatialTransform& transform,
                     std::span<float> dst) {
  if (src.size() != height * width || dst.size() != src.size()) {
    throw ShapeError("transform_image: buffer size mismatch");
  }
  const double theta = transform.rotation_deg * std::numbers::pi / 180.0;
  const double c = transform.rotation_deg == 0.0 ? 1.0 : std::cos(theta);
  const double s = transform.rotation_deg == 0.0 ? 0.0 : std::sin(theta);
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  auto sample = [&](long y, long x) -> double {
    if (y < 0 || x < 0 || y >= static_cast<long>(height) ||
        x >= static_cast<long>(width)) {
      return 0.0;
    }
    return src[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
  };
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) - cx - transform.shift_x;
      const double v = static_cast<double>(y) - cy - transform.shift_y;
      const double sx = c * u + s * v + cx;
      const double sy = -s * u + c * v + cy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      double value = (1 - ax) * (1 - ay) * sample(y0, x0);
      if (ax > 0) value += ax * (1 - ay) * sample(y0, x0 + 1);
      if (ay > 0) value += (1 - ax) * ay * sample(y0 + 1, x0);
      if (ax > 0 && ay > 0) value += ax * ay * sample(y0 + 1, x0 + 1);
      dst[y * width + x] = static_cast<float>(value);
    }
  }
}

std::vector<SpatialTransform> spatial_grid(const SpatialBudget& budget) {
  if (budget.max_rotation_deg < 0.0 || budget.max_translation_px < 0) {
    throw ConfigError("spatial budgets must be >= 0");
  }
  std::vector<double> rotations{0.0};
  const int rot_steps =
      static_cast<int>(std::floor(budget.max_rotation_deg / kRotationStepDeg + 1e-9));
  for (int k = 1; k <= rot_steps; ++k) {
    rotations.push_back(-k * kRotationStepDeg);
    rotations.push_back(k * kRotationStepDeg);
  }
  std::vector<std::pair<int, int>> shifts{{0, 0}};
  const int t = budget.max_translation_px;
  for (int dy = -t; dy <= t; ++dy) {
    for (int dx = -t; dx <= t; ++dx) {
      if (dx != 0 || dy != 0) shifts.emplace_back(dx, dy);
    }
  }
  std::vector<SpatialTransform> grid;
  grid.reserve(rotations.size() * shifts.size());
  for (double rot : rotations) {
    for (auto [dx, dy] : shifts) grid.push_back({rot, dx, dy});
  }
  return grid;
}

AttackResult spatial_worst_of_grid(const Network& network,
                                   const Tensor& x_batch,
                                   std::span<const int> labels,
                                   const SpatialBudget& budget, int threads) {
  check_batch(x_batch, labels.size());
  const auto grid = spatial_grid(budget);
  const std::size_t n = labels.size();
  const std::size_t channels = x_batch.dim(1), h = x_batch.dim(2),
                    w = x_batch.dim(3);
  const std::size_t plane = h * w;

  AttackResult r;
  r.adversarial = Tensor(x_batch.shape());
  r.labels.assign(labels.begin(), labels.end());
  r.targets.assign(n, -1);
  r.preds.resize(n);
  r.losses.resize(n);
  r.transforms.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    auto x = x_batch.item(i);
    Tensor candidates(Shape{grid.size(), channels, h, w});
    for (std::size_t g = 0; g < grid.size(); ++g) {
      auto dst = candidates.item(g);
      for (std::size_t c = 0; c < channels; ++c) {
        transform_image(x.subspan(c * plane, plane), h, w, grid[g],
                        dst.subspan(c * plane, plane));
      }
    }
    const Tensor logits = network.forward(candidates);
    const std::size_t k = network.class_count;
    // Only transforms at least as lossy as the identity compete; among those
    // a misclassifying one beats any that is not, then higher loss wins.
    // Growing the grid can therefore only flip a row to wrong.
    std::size_t best = 0;
    RowEval best_eval = evaluate_logits(logits.data().subspan(0, k), labels[i]);
    bool best_wrong = best_eval.pred != labels[i];
    const double clean_loss = best_eval.loss;
    for (std::size_t g = 1; g < grid.size(); ++g) {
      const RowEval e = evaluate_logits(
          logits.data().subspan(g * k, k), labels[i]);
      if (e.loss < clean_loss) continue;
      const bool wrong = e.pred != labels[i];
      if ((wrong && !best_wrong) ||
          (wrong == best_wrong && e.loss > best_eval.loss)) {
        best = g;
        best_eval = e;
        best_wrong = wrong;
      }
    }
    auto chosen = candidates.item(best);
    std::copy(chosen.begin(), chosen.end(), r.adversarial.item(i).begin());
    r.preds[i] = best_eval.pred;
    r.losses[i] = best_eval.loss;
    r.transforms[i] = grid[best];
  });
  std::vector<std::size_t> sources(n);
  for (std::size_t i = 0; i < n; ++i) sources[i] = i;
  fill_distortion(r, x_batch, sources, Norm::kL2);
  r.steps_run = 1;
  return r;
}

}  // namespace ftol
