#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "ftol/curves.hpp"
#include "ftol/model.hpp"
#include "support.hpp"

namespace ftol {
namespace {

Network small_net(std::uint64_t seed) {
  Network net;
  net.layers.emplace_back(ConvLayer("c1", 4, 1, 5, 5, 4, Padding::kSame));
  net.layers.emplace_back(ReluLayer{});
  net.layers.emplace_back(ConvLayer("fc", 10, 256, 1, 1, 1, Padding::kValid));
  init_gaussian(net, 0.3, seed);
  return net;
}

Dataset digits(std::size_t n, std::uint64_t seed) {
  return prepare_dataset(synthetic_digits(n, seed));
}

// Tag balance over elements; comments, declarations and attributes with '>'
// are not used by the renderer.
bool well_formed(const std::string& xml) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  int roots = 0;
  while ((pos = xml.find('<', pos)) != std::string::npos) {
    const std::size_t end = xml.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = xml.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?') continue;
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" /"));
    if (stack.empty()) ++roots;
    if (!self_closing) stack.push_back(name);
  }
  return stack.empty() && roots == 1;
}

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = s.find(needle); p != std::string::npos;
       p = s.find(needle, p + 1)) {
    ++n;
  }
  return n;
}

TEST(Names, ParseAndStems) {
  EXPECT_EQ(parse_attack("bim-l2"), AttackKind::kBimL2);
  EXPECT_EQ(attack_name(AttackKind::kBimLinf), "bim-linf");
  EXPECT_THROW(parse_attack("fgsm"), ConfigError);
  AttackSpec spec;
  spec.kind = AttackKind::kBimL2;
  spec.objective = Objective::one_target();
  EXPECT_EQ(output_stem(spec, "wd"), "bim-l2-one-tgt-wd");
  spec.kind = AttackKind::kAwgn;
  EXPECT_EQ(output_stem(spec, "wd"), "awgn-none-wd");
  EXPECT_EQ(default_snr_grid(),
            (std::vector<double>{40, 35, 30, 25, 20, 15, 10, 5, 2, 1}));
}

TEST(SweepSnr, PointCountAndCleanPoint) {
  Network net = small_net(1);
  Dataset ds = digits(20, 1);
  AttackSpec spec;
  const std::vector<double> grid{30, 10, 3};
  Sweep s = sweep_snr(net, ds, spec, grid);
  ASSERT_TRUE(s.complete());
  ASSERT_EQ(s.points.size(), 4u);
  EXPECT_EQ(s.points[0].strength, kSnrCapDb);
  CurvePoint clean = clean_point(net, ds, "awgn", "none");
  EXPECT_EQ(s.points[0].mi_bits, clean.mi_bits);
  EXPECT_EQ(s.points[0].accuracy, clean.accuracy);
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_NEAR(s.points[i].strength, grid[i - 1], 1e-6);
    EXPECT_EQ(s.points[i].n, 20u);
    EXPECT_GE(s.points[i].mi_bits, 0.0);
    EXPECT_LE(s.points[i].mi_bits, std::log2(10.0) + 1e-12);
    EXPECT_EQ(s.points[i].attack, "awgn");
    EXPECT_EQ(s.points[i].objective, "none");
    EXPECT_NEAR(s.points[i].mi_bits, mutual_information(s.points[i].joint), 0.0);
  }
}

TEST(SweepSnr, HighSnrNoiseKeepsAccuracy) {
  Network net = small_net(2);
  Dataset ds = digits(100, 2);
  Sweep s = sweep_snr(net, ds, AttackSpec{}, {60.0});
  ASSERT_EQ(s.points.size(), 2u);
  EXPECT_NEAR(s.points[1].accuracy, s.points[0].accuracy, 0.01);
}

TEST(SweepSnr, AllTargetsPoolNineRowsPerImage) {
  Network net = small_net(3);
  Dataset ds = digits(4, 3);
  AttackSpec spec;
  spec.kind = AttackKind::kBimL2;
  spec.objective = Objective::all_targets();
  spec.steps = 2;
  Sweep s = sweep_snr(net, ds, spec, {10.0});
  ASSERT_EQ(s.points.size(), 2u);
  EXPECT_EQ(s.points[0].n, 4u);
  EXPECT_EQ(s.points[1].n, 36u);
  EXPECT_EQ(s.points[1].objective, "all-tgt");
}

TEST(SweepSnr, RejectsBadGrids) {
  Network net = small_net(4);
  Dataset ds = digits(3, 4);
  EXPECT_THROW(sweep_snr(net, ds, AttackSpec{}, {10.0, 20.0}), ConfigError);
  EXPECT_THROW(sweep_snr(net, ds, AttackSpec{}, {10.0, 10.0}), ConfigError);
  EXPECT_THROW(sweep_snr(net, ds, AttackSpec{}, {10.0, 0.0}), ConfigError);
  AttackSpec spatial;
  spatial.kind = AttackKind::kSpatial;
  EXPECT_THROW(sweep_snr(net, ds, spatial, {10.0}), ConfigError);
}

TEST(SweepSnr, FailingPointKeepsPartialResults) {
  Network net = small_net(5);
  Dataset ds = digits(3, 5);
  AttackSpec spec;
  spec.kind = AttackKind::kBimL2;
  spec.steps = 1;
  // 1e-300 dB rounds the inverse SNR to an infinite radius, which BIM rejects.
  Sweep s = sweep_snr(net, ds, spec, {10.0, 1e-300});
  EXPECT_FALSE(s.complete());
  ASSERT_EQ(s.points.size(), 2u);
  EXPECT_NE(s.error->find("dB"), std::string::npos);
}

TEST(SweepSnr, DeterministicAcrossThreads) {
  Network net = small_net(6);
  Dataset ds = digits(8, 6);
  AttackSpec spec;
  spec.kind = AttackKind::kBimLinf;
  spec.objective = Objective::one_target();
  spec.steps = 3;
  const std::vector<double> grid{20, 5};
  EXPECT_EQ(format_csv(sweep_snr(net, ds, spec, grid, 1).points),
            format_csv(sweep_snr(net, ds, spec, grid, 4).points));
}

TEST(SweepSpatial, NestedBudgets) {
  Network net = small_net(7);
  Dataset ds = digits(12, 7);
  const std::vector<SpatialBudget> budgets{{0.0, 0}, {5.0, 1}, {10.0, 2}};
  Sweep s = sweep_spatial(net, ds, budgets);
  ASSERT_EQ(s.points.size(), 3u);
  EXPECT_EQ(s.points[0].accuracy, clean_point(net, ds, "spatial", "none").accuracy);
  EXPECT_LE(s.points[1].accuracy, s.points[0].accuracy);
  EXPECT_LE(s.points[2].accuracy, s.points[1].accuracy);
  EXPECT_EQ(s.points[2].strength, 10.0);
  EXPECT_THROW(sweep_spatial(net, ds, {{10.0, 1}, {5.0, 1}}), ConfigError);
}

TEST(Csv, HeaderOnlyForEmptyList) {
  EXPECT_EQ(format_csv({}), "attack,objective,strength,mi_bits,accuracy,n\n");
}

TEST(Csv, RoundTripAndLineCount) {
  Network net = small_net(8);
  Dataset ds = digits(10, 8);
  Sweep s = sweep_snr(net, ds, AttackSpec{}, {25.0, 12.5, 1.0});
  const std::string text = format_csv(s.points);
  EXPECT_EQ(count_of(text, "\n"), s.points.size() + 1);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  auto back = parse_csv(text);
  ASSERT_EQ(back.size(), s.points.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].attack, s.points[i].attack);
    EXPECT_NEAR(back[i].strength, s.points[i].strength,
                1e-5 * std::abs(s.points[i].strength));
    EXPECT_NEAR(back[i].mi_bits, s.points[i].mi_bits, 5e-6 * 4);
    EXPECT_NEAR(back[i].accuracy, s.points[i].accuracy, 5e-6);
    EXPECT_EQ(back[i].n, s.points[i].n);
  }
  EXPECT_EQ(format_csv(back), text);
}

TEST(Csv, EmbeddedJointReproducesMetrics) {
  Network net = small_net(9);
  Dataset ds = digits(10, 9);
  Sweep s = sweep_snr(net, ds, AttackSpec{}, {5.0});
  auto back = parse_csv(format_csv(s.points, true));
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].joint, s.points[i].joint);
    EXPECT_NEAR(mutual_information(back[i].joint), back[i].mi_bits, 5e-6 * 4);
    EXPECT_NEAR(accuracy(back[i].joint), back[i].accuracy, 5e-6);
  }
  EXPECT_THROW(parse_csv("a,b\n"), FormatError);
}

TEST(Csv, WritesFile) {
  auto dir = testing::temp_dir("csv");
  std::vector<CurvePoint> pts{point_from_joint("awgn", "none", 10.0,
                                               joint_counts(std::vector<int>{1, 2},
                                                            std::vector<int>{1, 3}))};
  emit_csv(pts, dir / "c.csv");
  std::ifstream in(dir / "c.csv", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), format_csv(pts));
  EXPECT_THROW(emit_csv(pts, dir / "no" / "such" / "c.csv"), IoError);
}

TEST(Svg, OneSeriesTwoPoints) {
  std::vector<CurvePoint> pts{
      point_from_joint("awgn", "none", 20.0, joint_counts(std::vector<int>{1}, std::vector<int>{1})),
      point_from_joint("awgn", "none", 5.0, joint_counts(std::vector<int>{2}, std::vector<int>{1}))};
  const std::string svg = format_svg({{"demo & <test>", pts}});
  EXPECT_EQ(count_of(svg, "<polyline"), 2u);
  EXPECT_EQ(count_of(svg, "stroke-dasharray"), 1u);
  EXPECT_TRUE(well_formed(svg));
  EXPECT_NE(svg.find("demo &amp; &lt;test&gt;"), std::string::npos);
  EXPECT_THROW(format_svg({}), ConfigError);
}

TEST(Svg, AxisSpansStrengthRange) {
  std::vector<CurvePoint> pts;
  for (double s : {40.0, 22.0, 3.0}) {
    pts.push_back(point_from_joint("awgn", "none", s,
                                   joint_counts(std::vector<int>{1}, std::vector<int>{1})));
  }
  SvgOptions opt;
  const std::string svg = format_svg({{"a", pts}}, opt);
  // Descending axis: 40 dB at the left edge, 3 dB at the right edge.
  const double left = 64, right = opt.width - 64;
  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, std::regex("points=\"([^\"]*)\"")));
  std::istringstream pts_in(m[1].str());
  std::vector<double> xs;
  std::string pair;
  while (pts_in >> pair) xs.push_back(std::stod(pair.substr(0, pair.find(','))));
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_NEAR(xs.front(), left, 1e-3);
  EXPECT_NEAR(xs.back(), right, 1e-3);
}

TEST(Svg, MultipleSeriesAndCleanSlot) {
  Network net = small_net(10);
  Dataset ds = digits(6, 10);
  Sweep a = sweep_snr(net, ds, AttackSpec{}, {20.0, 2.0});
  const std::string svg = format_svg({{"a", a.points}, {"b", a.points}});
  EXPECT_EQ(count_of(svg, "<polyline"), 4u);
  EXPECT_NE(svg.find(">clean<"), std::string::npos);
  EXPECT_TRUE(well_formed(svg));
}

}  // namespace
}  // namespace ftol
