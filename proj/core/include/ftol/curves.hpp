#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ftol/attacks.hpp"
#include "ftol/data.hpp"
#include "ftol/metrics.hpp"

namespace ftol {

// One sample of a characteristic curve. Strength is the achieved mean SNR in
// dB for noise and gradient attacks, or the maximum rotation in degrees for
// the spatial sweep.
struct CurvePoint {
  std::string attack;
  std::string objective;
  double strength = 0.0;
  double mi_bits = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
  JointCounts joint;
};

enum class AttackKind { kAwgn, kBimL2, kBimLinf, kSpatial };

std::string attack_name(AttackKind kind);
AttackKind parse_attack(const std::string& name);

struct AttackSpec {
  AttackKind kind = AttackKind::kAwgn;
  Objective objective;
  int steps = 40;
  double step_scale = 2.5;
  double stop_mean_margin = 0.0;
  std::uint64_t seed = 0;

  // Objective label used in outputs: "none" for AWGN and spatial.
  std::string objective_label() const;
};

// {40, 35, 30, 25, 20, 15, 10, 5, 2, 1} dB.
std::vector<double> default_snr_grid();

struct Sweep {
  std::vector<CurvePoint> points;
  // Set when a point failed; points holds what was computed before it.
  std::optional<std::string> error;
  std::exception_ptr failure;

  bool complete() const { return !error.has_value(); }
};

// Clean point at the SNR cap, then one point per grid value, pooling every
// attacked row (9 per image under all-tgt) against its original label.
Sweep sweep_snr(const Network& network, const Dataset& subset,
                const AttackSpec& spec, const std::vector<double>& snr_grid,
                int threads = 1);

// One point per budget; budgets must be non-decreasing in both components.
Sweep sweep_spatial(const Network& network, const Dataset& subset,
                    const std::vector<SpatialBudget>& budgets,
                    int threads = 1);

// Clean predictions summarised as a single point.
CurvePoint clean_point(const Network& network, const Dataset& subset,
                       const std::string& attack, const std::string& objective,
                       int threads = 1);

CurvePoint point_from_joint(const std::string& attack,
                            const std::string& objective, double strength,
                            JointCounts joint);

inline constexpr const char* kCsvHeader =
    "attack,objective,strength,mi_bits,accuracy,n";

// Header plus one row per point, 6 significant digits, LF endings. With
// embed_joint an extra `joint` column holds the row-major counts separated
// by spaces.
void emit_csv(const std::vector<CurvePoint>& points,
              const std::filesystem::path& path, bool embed_joint = false);
std::string format_csv(const std::vector<CurvePoint>& points,
                       bool embed_joint = false);
std::vector<CurvePoint> parse_csv(const std::string& text);

struct Series {
  std::string label;
  std::vector<CurvePoint> points;
};

struct SvgOptions {
  std::string title;
  std::string x_label = "SNR (dB)";
  // Plot decreasing strength to the right (SNR axes).
  bool descending_x = true;
  double width = 640;
  double height = 420;
};

// MI as solid polylines, accuracy as dashed polylines, one pair per series.
void render_svg(const std::vector<Series>& series,
                const std::filesystem::path& path,
                const SvgOptions& options = {});
std::string format_svg(const std::vector<Series>& series,
                       const SvgOptions& options = {});

// `<attack>-<objective>-<modeltag>` without extension.
std::string output_stem(const AttackSpec& spec, const std::string& model_tag);

}  // namespace ftol
