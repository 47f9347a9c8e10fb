#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "ftol/data.hpp"
#include "support.hpp"

namespace ftol {
namespace {

const std::filesystem::path kFixture =
    std::filesystem::path(FTOL_FIXTURE_DIR) / "two_images.ftc";

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path write_bytes(const std::filesystem::path& p,
                                  const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
  return p;
}

RawDataset rgb_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RawDataset raw;
  raw.count = 1;
  raw.channels = 3;
  raw.pixels.resize(3 * 1024);
  std::fill_n(raw.pixels.begin(), 1024, r);
  std::fill_n(raw.pixels.begin() + 1024, 1024, g);
  std::fill_n(raw.pixels.begin() + 2048, 1024, b);
  raw.labels = {0};
  return raw;
}

TEST(Container, FixtureLoadsByteExact) {
  // Pixel (i, c, r, k) of the fixture is (37 i + 11 c + 3 r + k) mod 256.
  RawDataset raw = load_container(kFixture);
  ASSERT_EQ(raw.count, 2u);
  ASSERT_EQ(raw.channels, 3u);
  EXPECT_EQ(raw.labels, (std::vector<int>{7, 0}));
  ASSERT_EQ(raw.pixels.size(), 2u * 3 * 1024);
  std::size_t p = 0;
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c)
      for (int r = 0; r < 32; ++r)
        for (int k = 0; k < 32; ++k, ++p) {
          ASSERT_EQ(raw.pixels[p], (37 * i + 11 * c + 3 * r + k) % 256) << p;
        }
}

TEST(Container, RoundTripIsBitExact) {
  auto dir = testing::temp_dir("ftc");
  RawDataset raw = load_container(kFixture);
  save_container(raw, dir / "copy.ftc");
  EXPECT_EQ(read_bytes(dir / "copy.ftc"), read_bytes(kFixture));
}

TEST(Container, DistinctErrors) {
  auto dir = testing::temp_dir("ftc-bad");
  const std::string good = read_bytes(kFixture);

  std::string magic = good;
  magic[3] = '2';
  EXPECT_THROW(load_container(write_bytes(dir / "magic.ftc", magic)), FormatError);
  try {
    load_container(dir / "magic.ftc");
  } catch (const TruncationError&) {
    ADD_FAILURE() << "bad magic reported as truncation";
  } catch (const FormatError&) {
  }

  // Declared n = 3 against a 2-image payload.
  std::string more = good;
  more[5] = 3;
  EXPECT_THROW(load_container(write_bytes(dir / "more.ftc", more)), TruncationError);
  EXPECT_THROW(load_container(write_bytes(dir / "cut.ftc", good.substr(0, 100))),
               TruncationError);

  std::string label = good;
  label.back() = 10;
  EXPECT_THROW(load_container(write_bytes(dir / "label.ftc", label)), LabelRangeError);

  std::string channels = good;
  channels[4] = 2;
  EXPECT_THROW(load_container(write_bytes(dir / "chan.ftc", channels)), FormatError);

  EXPECT_THROW(load_container(write_bytes(dir / "tail.ftc", good + "z")), FormatError);
  EXPECT_THROW(load_container(dir / "missing.ftc"), IoError);
}

TEST(Greyscale, NtscExamples) {
  EXPECT_FLOAT_EQ(ntsc_greyscale(rgb_pixel(255, 255, 255))[0], 255.0f);
  EXPECT_FLOAT_EQ(ntsc_greyscale(rgb_pixel(255, 0, 0))[0], 76.245f);
  for (int v = 0; v < 256; v += 15) {
    const auto b = static_cast<std::uint8_t>(v);
    EXPECT_NEAR(ntsc_greyscale(rgb_pixel(b, b, b))[0], v, 1e-4);
  }
}

TEST(Greyscale, BoundedByChannelRange) {
  RawDataset raw = load_container(kFixture);
  Tensor g = ntsc_greyscale(raw);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t p = 0; p < 1024; ++p) {
      const std::size_t base = i * 3 * 1024 + p;
      const auto [lo, hi] = std::minmax(
          {raw.pixels[base], raw.pixels[base + 1024], raw.pixels[base + 2048]});
      const float v = g[i * 1024 + p];
      EXPECT_GE(v, lo - 1e-4);
      EXPECT_LE(v, hi + 1e-4);
    }
}

TEST(Greyscale, RejectsOtherChannelCounts) {
  RawDataset raw;
  raw.count = 1;
  raw.channels = 1;
  raw.pixels.assign(1024, 0);
  raw.labels = {0};
  EXPECT_THROW(ntsc_greyscale(raw), ConfigError);
  EXPECT_NO_THROW(greyscale(raw));
}

TEST(Standardize, TwoPixelImage) {
  Tensor t = standardize_per_image(Tensor(Shape{1, 1, 1, 2}, {0.0f, 2.0f}));
  EXPECT_FLOAT_EQ(t[0], -1.0f);
  EXPECT_FLOAT_EQ(t[1], 1.0f);
}

TEST(Standardize, ConstantImageBecomesZeros) {
  Tensor t = standardize_per_image(Tensor(Shape{1, 1, 4, 4}, 9.0f));
  for (float v : t.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Standardize, MomentsAndIdempotence) {
  Dataset ds = prepare_dataset(synthetic_digits(20, 3));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto img = ds.images.item(i);
    double m = 0.0, v = 0.0;
    for (float x : img) m += x;
    m /= static_cast<double>(img.size());
    for (float x : img) v += (x - m) * (x - m);
    EXPECT_LT(std::abs(m), 1e-5);
    EXPECT_LT(std::abs(std::sqrt(v / static_cast<double>(img.size())) - 1.0), 1e-3);
  }
  Tensor again = standardize_per_image(ds.images);
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_NEAR(again[i], ds.images[i], 1e-4);
  }
}

TEST(Standardize, DatasetScaleSharesOneDivisor) {
  Tensor in(Shape{2, 1, 1, 2}, {0, 2, 0, 6});
  Tensor t = standardize_dataset_scale(in);
  // Centred values (-1, 1, -3, 3); pooled population std sqrt(5).
  const float s = std::sqrt(5.0f);
  EXPECT_FLOAT_EQ(t[0], -1.0f / s);
  EXPECT_FLOAT_EQ(t[3], 3.0f / s);
}

TEST(ClassWeights, Examples) {
  std::vector<int> balanced(50);
  for (std::size_t i = 0; i < 50; ++i) balanced[i] = static_cast<int>(i % 10);
  for (double w : class_weights(balanced)) EXPECT_DOUBLE_EQ(w, 1.0);

  std::vector<int> skew(90, 0);
  skew.insert(skew.end(), 10, 1);
  auto w = class_weights(skew, 2);
  EXPECT_NEAR(w[0], 0.5555555555555556, 1e-15);
  EXPECT_NEAR(w[1], 5.0, 1e-15);

  double mean = 0.0;
  for (int y : skew) mean += w[static_cast<std::size_t>(y)];
  EXPECT_NEAR(mean / static_cast<double>(skew.size()), 1.0, 1e-6);
}

TEST(ClassWeights, EmptyClassIsAnError) {
  const std::vector<int> labels{0, 1, 2};
  EXPECT_THROW(class_weights(labels), DataError);
}

TEST(Subset, SeededAndDistinct) {
  Dataset ds = prepare_dataset(synthetic_digits(60, 1));
  Dataset a = sample_subset(ds, 25, 4), b = sample_subset(ds, 25, 4);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(sample_subset(ds, 25, 5).images, a.images);
  ASSERT_EQ(a.size(), 25u);
  EXPECT_EQ(a.images.shape(), (Shape{25, 1, 32, 32}));
  std::set<std::vector<float>> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto img = a.images.item(i);
    seen.emplace(img.begin(), img.end());
  }
  EXPECT_EQ(seen.size(), 25u);
  EXPECT_THROW(sample_subset(ds, 61, 0), ConfigError);
  EXPECT_EQ(kDefaultSubsetSize, 1000u);
}

TEST(Subset, FullSizeIsAPermutation) {
  Dataset ds = prepare_dataset(synthetic_digits(30, 2));
  Dataset all = sample_subset(ds, 30, 8);
  auto la = all.labels, lb = ds.labels;
  std::sort(la.begin(), la.end());
  std::sort(lb.begin(), lb.end());
  EXPECT_EQ(la, lb);
  std::multiset<std::vector<float>> x, y;
  for (std::size_t i = 0; i < 30; ++i) {
    x.emplace(ds.images.item(i).begin(), ds.images.item(i).end());
    y.emplace(all.images.item(i).begin(), all.images.item(i).end());
  }
  EXPECT_EQ(x, y);
}

TEST(LabelEntropy, Examples) {
  std::vector<int> uniform(100);
  for (std::size_t i = 0; i < 100; ++i) uniform[i] = static_cast<int>(i % 10);
  EXPECT_NEAR(label_entropy(uniform), 3.321928094887362, 1e-12);
  EXPECT_EQ(label_entropy(std::vector<int>(7, 4)), 0.0);
  const std::vector<int> skew{0, 0, 0, 1, 2, 3, 3, 9};
  const double h = label_entropy(skew);
  EXPECT_GE(h, 0.0);
  EXPECT_LE(h, std::log2(10.0));
}

TEST(SyntheticDigits, ReproducibleAndCoversClasses) {
  RawDataset a = synthetic_digits(40, 9), b = synthetic_digits(40, 9);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NO_THROW(a.validate());
  EXPECT_NO_THROW(class_weights(a.labels));
  EXPECT_NE(synthetic_digits(40, 10).pixels, a.pixels);
  EXPECT_EQ(synthetic_digits(5, 1, 1).channels, 1u);
}

}  // namespace
}  // namespace ftol
