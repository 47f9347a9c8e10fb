#include "ftol/curves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ftol/model.hpp"

namespace ftol {

std::string attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kAwgn:
      return "awgn";
    case AttackKind::kBimL2:
      return "bim-l2";
    case AttackKind::kBimLinf:
      return "bim-linf";
    case AttackKind::kSpatial:
      return "spatial";
  }
  return "?";
}

AttackKind parse_attack(const std::string& name) {
  if (name == "awgn") return AttackKind::kAwgn;
  if (name == "bim-l2") return AttackKind::kBimL2;
  if (name == "bim-linf") return AttackKind::kBimLinf;
  if (name == "spatial") return AttackKind::kSpatial;
  throw ConfigError("unknown attack '" + name +
                    "' (expected awgn, bim-l2, bim-linf or spatial)");
}

std::string AttackSpec::objective_label() const {
  if (kind == AttackKind::kAwgn || kind == AttackKind::kSpatial) return "none";
  return objective.name();
}

std::vector<double> default_snr_grid() {
  return {40, 35, 30, 25, 20, 15, 10, 5, 2, 1};
}

CurvePoint point_from_joint(const std::string& attack,
                            const std::string& objective, double strength,
                            JointCounts joint) {
  CurvePoint p;
  p.attack = attack;
  p.objective = objective;
  p.strength = strength;
  p.n = joint.total();
  p.mi_bits = mutual_information(joint);
  p.accuracy = accuracy(joint);
  p.joint = std::move(joint);
  return p;
}

CurvePoint clean_point(const Network& network, const Dataset& subset,
                       const std::string& attack, const std::string& objective,
                       int threads) {
  const auto pred = predict(network, subset.images, threads);
  return point_from_joint(attack, objective, kSnrCapDb,
                          joint_counts(pred.labels, subset.labels));
}

Sweep sweep_snr(const Network& network, const Dataset& subset,
                const AttackSpec& spec, const std::vector<double>& snr_grid,
                int threads) {
  if (spec.kind == AttackKind::kSpatial) {
    throw ConfigError("spatial faults are swept with sweep_spatial");
  }
  if (subset.size() == 0) throw ConfigError("sweep over an empty subset");
  for (std::size_t i = 0; i < snr_grid.size(); ++i) {
    if (!(snr_grid[i] > 0.0)) {
      throw ConfigError("SNR grid values must be > 0 dB");
    }
    if (i > 0 && !(snr_grid[i] < snr_grid[i - 1])) {
      throw ConfigError("SNR grid must be strictly decreasing");
    }
  }
  const std::string attack = attack_name(spec.kind);
  const std::string objective = spec.objective_label();

  Sweep sweep;
  sweep.points.push_back(
      clean_point(network, subset, attack, objective, threads));
  for (double snr : snr_grid) {
    try {
      AttackResult result;
      if (spec.kind == AttackKind::kAwgn) {
        result = awgn(subset.images, SnrDb{snr}, spec.seed, threads);
        result.labels = subset.labels;
        result.preds = predict(network, result.adversarial, threads).labels;
      } else {
        BimConfig cfg;
        cfg.norm = spec.kind == AttackKind::kBimL2 ? Norm::kL2 : Norm::kLinf;
        cfg.steps = spec.steps;
        cfg.step_scale = spec.step_scale;
        cfg.objective = spec.objective;
        cfg.stop_mean_margin = spec.stop_mean_margin;
        cfg.seed = spec.seed;
        const auto eps = epsilons_for_snr(subset.images, cfg.norm, SnrDb{snr});
        result = bim(network, subset.images, subset.labels, cfg, eps, threads);
      }
      sweep.points.push_back(
          point_from_joint(attack, objective, result.achieved_snr,
                           joint_counts(result.preds, result.labels)));
    } catch (const Error& e) {
      sweep.error = "at " + std::to_string(snr) + " dB: " + e.what();
      sweep.failure = std::current_exception();
      break;
    }
  }
  return sweep;
}

Sweep sweep_spatial(const Network& network, const Dataset& subset,
                    const std::vector<SpatialBudget>& budgets, int threads) {
  for (std::size_t i = 1; i < budgets.size(); ++i) {
    if (budgets[i].max_rotation_deg < budgets[i - 1].max_rotation_deg ||
        budgets[i].max_translation_px < budgets[i - 1].max_translation_px) {
      throw ConfigError("spatial budgets must be non-decreasing");
    }
  }
  Sweep sweep;
  for (const auto& budget : budgets) {
    try {
      auto result = spatial_worst_of_grid(network, subset.images,
                                          subset.labels, budget, threads);
      sweep.points.push_back(
          point_from_joint("spatial", "none", budget.max_rotation_deg,
                           joint_counts(result.preds, result.labels)));
    } catch (const Error& e) {
      sweep.error = "at rotation " + std::to_string(budget.max_rotation_deg) +
                    ": " + e.what();
      sweep.failure = std::current_exception();
      break;
    }
  }
  return sweep;
}

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string format_csv(const std::vector<CurvePoint>& points,
                       bool embed_joint) {
  std::string out = kCsvHeader;
  if (embed_joint) out += ",joint";
  out += '\n';
  for (const auto& p : points) {
    out += p.attack + ',' + p.objective + ',' + g6(p.strength) + ',' +
           g6(p.mi_bits) + ',' + g6(p.accuracy) + ',' + std::to_string(p.n);
    if (embed_joint) {
      out += ',';
      const auto raw = p.joint.raw();
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(raw[i]);
      }
    }
    out += '\n';
  }
  return out;
}

void emit_csv(const std::vector<CurvePoint>& points,
              const std::filesystem::path& path, bool embed_joint) {
  write_text(path, format_csv(points, embed_joint));
}

std::vector<CurvePoint> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty curve CSV");
  const bool has_joint = line == std::string(kCsvHeader) + ",joint";
  if (line != kCsvHeader && !has_joint) {
    throw FormatError("unexpected curve CSV header '" + line + "'");
  }
  std::vector<CurvePoint> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != (has_joint ? 7u : 6u)) {
      throw FormatError("malformed curve CSV row '" + line + "'");
    }
    CurvePoint p;
    p.attack = f[0];
    p.objective = f[1];
    p.strength = std::stod(f[2]);
    p.mi_bits = std::stod(f[3]);
    p.accuracy = std::stod(f[4]);
    p.n = std::stoull(f[5]);
    if (has_joint) {
      std::istringstream cs(f[6]);
      std::vector<std::uint64_t> counts;
      std::uint64_t c = 0;
      while (cs >> c) counts.push_back(c);
      const auto k = static_cast<std::size_t>(
          std::llround(std::sqrt(static_cast<double>(counts.size()))));
      if (k * k != counts.size()) throw FormatError("joint is not square");
      JointCounts joint(k);
      for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t y = 0; y < k; ++y) {
          joint.add(static_cast<int>(t), static_cast<int>(y), counts[t * k + y]);
        }
      }
      p.joint = std::move(joint);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string format_svg(const std::vector<Series>& series,
                       const SvgOptions& options) {
  if (series.empty()) throw ConfigError("render_svg needs at least one series");
  const double mi_max = std::log2(10.0);
  const double left = 64, right = 64, top = 40, bottom = 56;
  const double plot_w = options.width - left - right;
  const double plot_h = options.height - top - bottom;

  // Points at the SNR cap (clean inputs) sit in a slot past the finite range.
  double lo = 0.0, hi = 0.0;
  bool any_finite = false, any_clean = false;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      if (p.strength >= kSnrCapDb) {
        any_clean = true;
        continue;
      }
      if (!any_finite) {
        lo = hi = p.strength;
        any_finite = true;
      }
      lo = std::min(lo, p.strength);
      hi = std::max(hi, p.strength);
    }
  }
  if (!any_finite) lo = hi = 0.0;
  const double span = hi > lo ? hi - lo : 1.0;
  const double clean_slot = hi + 0.1 * span;
  const double axis_hi = any_clean ? clean_slot : (hi > lo ? hi : lo + 1.0);
  auto x_of = [&](double strength) {
    const double v = strength >= kSnrCapDb ? clean_slot : strength;
    double f = (v - lo) / (axis_hi - lo);
    if (options.descending_x) f = 1.0 - f;
    return left + f * plot_w;
  };
  auto y_mi = [&](double mi) { return top + plot_h * (1.0 - mi / mi_max); };
  auto y_acc = [&](double acc) { return top + plot_h * (1.0 - acc); };

  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
     << g6(options.width) << "\" height=\"" << g6(options.height)
     << "\" viewBox=\"0 0 " << g6(options.width) << ' ' << g6(options.height)
     << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << g6(options.width) << "\" height=\""
     << g6(options.height) << "\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    os << "<text x=\"" << g6(options.width / 2) << "\" y=\"20\" "
       << "text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << xml_escape(options.title) << "</text>\n";
  }
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\""
     << left + plot_w << "\" y2=\"" << top + plot_h << "\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
     << "\" y2=\"" << top + plot_h << "\"/>\n";
  os << "<line x1=\"" << left + plot_w << "\" y1=\"" << top << "\" x2=\""
     << left + plot_w << "\" y2=\"" << top + plot_h << "\"/>\n";
  os << "</g>\n";

  os << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double y = top + plot_h * (1.0 - f);
    os << "<text x=\"" << left - 6 << "\" y=\"" << g6(y + 3)
       << "\" text-anchor=\"end\">" << g6(std::round(f * mi_max * 100) / 100)
       << "</text>\n";
    os << "<text x=\"" << left + plot_w + 6 << "\" y=\"" << g6(y + 3)
       << "\" text-anchor=\"start\">" << g6(f) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    os << "<text x=\"" << g6(x_of(v)) << "\" y=\"" << top + plot_h + 14
       << "\" text-anchor=\"middle\">" << g6(std::round(v * 10) / 10)
       << "</text>\n";
  }
  if (any_clean) {
    os << "<text x=\"" << g6(x_of(kSnrCapDb)) << "\" y=\"" << top + plot_h + 14
       << "\" text-anchor=\"middle\">clean</text>\n";
  }
  os << "<text x=\"" << g6(left + plot_w / 2) << "\" y=\""
     << options.height - 16 << "\" text-anchor=\"middle\">"
     << xml_escape(options.x_label) << "</text>\n";
  os << "<text x=\"14\" y=\"" << g6(top + plot_h / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << g6(top + plot_h / 2) << ")\">I(T;Y) bits (solid)</text>\n";
  os << "<text x=\"" << g6(options.width - 14) << "\" y=\""
     << g6(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(90 "
     << g6(options.width - 14) << ' ' << g6(top + plot_h / 2)
     << ")\">accuracy (dashed)</text>\n";
  os << "</g>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % std::size(kPalette)];
    std::ostringstream mi_pts, acc_pts;
    for (std::size_t i = 0; i < series[s].points.size(); ++i) {
      const auto& p = series[s].points[i];
      if (i) {
        mi_pts << ' ';
        acc_pts << ' ';
      }
      mi_pts << g6(x_of(p.strength)) << ',' << g6(y_mi(p.mi_bits));
      acc_pts << g6(x_of(p.strength)) << ',' << g6(y_acc(p.accuracy));
    }
    os << "<polyline fill=\"none\" stroke=\"" << colour
       << "\" stroke-width=\"2\" points=\"" << mi_pts.str() << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"" << colour
       << "\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\" points=\""
       << acc_pts.str() << "\"/>\n";
    const double ly = top + 14 + 16 * static_cast<double>(s);
    os << "<line x1=\"" << left + 10 << "\" y1=\"" << g6(ly) << "\" x2=\""
       << left + 34 << "\" y2=\"" << g6(ly) << "\" stroke=\"" << colour
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + 40 << "\" y=\"" << g6(ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << xml_escape(series[s].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void render_svg(const std::vector<Series>& series,
                const std::filesystem::path& path, const SvgOptions& options) {
  write_text(path, format_svg(series, options));
}

std::string output_stem(const AttackSpec& spec, const std::string& model_tag) {
  return attack_name(spec.kind) + "-" + spec.objective_label() + "-" +
         model_tag;
}

}  // namespace ftol
