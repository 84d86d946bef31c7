#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>

#include "lithoseg/imgcore/components.hpp"
#include "lithoseg/imgcore/contour.hpp"
#include "lithoseg/imgcore/filter.hpp"
#include "lithoseg/imgcore/geometry.hpp"
#include "lithoseg/imgcore/io.hpp"
#include "lithoseg/imgcore/morphology.hpp"
#include "lithoseg/imgcore/sample.hpp"
#include "lithoseg/imgcore/skeleton.hpp"
#include "lithoseg/imgcore/threshold.hpp"
#include "support.hpp"

using namespace lithoseg;
using namespace lithoseg::img;
using testing_support::disk_mask;
using testing_support::random_mask;
using testing_support::rect_mask;
using testing_support::scratch_dir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f << bytes;
}

}  // namespace

TEST(ImageIo, ZeroPgmLoadsAsZeros) {
  const auto dir = scratch_dir("io_zero");
  write_bytes(dir / "z.pgm", std::string("P5\n4 4\n255\n") + std::string(16, '\0'));
  const auto img = load_image(dir / "z.pgm");
  ASSERT_EQ(img.width(), 4);
  ASSERT_EQ(img.height(), 4);
  for (float v : img.data()) EXPECT_EQ(v, 0.0f);
}

TEST(ImageIo, ByteMappingBoundaries) {
  const auto dir = scratch_dir("io_map");
  std::string px = {static_cast<char>(255), static_cast<char>(128), static_cast<char>(127), 0};
  write_bytes(dir / "m.pgm", "P5\n4 1\n255\n" + px);
  const auto img = load_image(dir / "m.pgm");
  EXPECT_EQ(img(0, 0), 1.0f);
  const auto mask = load_mask(dir / "m.pgm");
  EXPECT_EQ(mask(1, 0), 1);
  EXPECT_EQ(mask(2, 0), 0);
  EXPECT_EQ(mask(3, 0), 0);
}

TEST(ImageIo, RandomImageRoundTripWithinHalfStep) {
  const auto dir = scratch_dir("io_rt");
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    GrayImage img(8, 8);
    for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
    for (const char* ext : {"a.png", "a.pgm"}) {
      save_image(dir / ext, img);
      const auto back = load_image(dir / ext);
      for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back.data()[i] - img.data()[i]), 1.0 / 510 + 1e-7);
    }
  }
}

TEST(ImageIo, MaskRoundTripIsExact) {
  const auto dir = scratch_dir("io_mask");
  Rng rng(3);
  const auto m = random_mask(rng, 13, 9);
  save_mask(dir / "m.png", m);
  EXPECT_EQ(load_mask(dir / "m.png"), m);
}

TEST(ImageIo, MissingAndCorruptFilesThrow) {
  const auto dir = scratch_dir("io_bad");
  EXPECT_THROW(load_image(dir / "nope.png"), IoError);
  write_bytes(dir / "bad.png", "not a png at all");
  EXPECT_THROW(load_image(dir / "bad.png"), IoError);
}

TEST(Bilinear, LatticePointIsExact) {
  GrayImage img(4, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 4; ++x) img(x, y) = static_cast<float>(x * 10 + y) / 100.0f;
  EXPECT_DOUBLE_EQ(bilinear_sample(img, {2, 3}), img(2, 3));
}

TEST(Bilinear, MidpointAndHandValue) {
  GrayImage a(2, 1, std::vector<float>{0.0f, 1.0f});
  EXPECT_DOUBLE_EQ(bilinear_sample(a, {0.5, 0.0}), 0.5);
  GrayImage b(2, 2, std::vector<float>{0.0f, 1.0f, 0.0f, 1.0f});
  EXPECT_DOUBLE_EQ(bilinear_sample(b, {0.25, 0.75}), 0.25);
}

TEST(Bilinear, OutsideDomainThrows) {
  GrayImage img(3, 3);
  EXPECT_THROW(bilinear_sample(img, {2.5, 1.0}), DomainError);
  EXPECT_THROW(bilinear_sample(img, {-0.1, 1.0}), DomainError);
}

TEST(Components, EmptyAndDiagonal) {
  EXPECT_EQ(count_components(BinaryMask(5, 5)), 0);
  BinaryMask m(3, 3);
  m(0, 0) = 1;
  m(1, 1) = 1;
  EXPECT_EQ(count_components(m, Connectivity::Four), 2);
  EXPECT_EQ(count_components(m, Connectivity::Eight), 1);
}

namespace {

// Breadth-first flood fill labelling in raster order of first touch.
LabelMap flood_fill_labels(const BinaryMask& m, bool eight, int& count) {
  LabelMap lab(m.width(), m.height());
  count = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y) || lab(x, y)) continue;
      ++count;
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      lab(x, y) = count;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (!eight && dx != 0 && dy != 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (!m.in_bounds(nx, ny) || !m(nx, ny) || lab(nx, ny)) continue;
            lab(nx, ny) = count;
            q.push({nx, ny});
          }
      }
    }
  return lab;
}

}  // namespace

TEST(Components, MatchesFloodFillOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_mask(rng, 16, 16, 0.45);
    for (bool eight : {false, true}) {
      int n = 0;
      const auto oracle = flood_fill_labels(m, eight, n);
      const auto cc = connected_components(m, eight ? Connectivity::Eight : Connectivity::Four);
      ASSERT_EQ(cc.count, n);
      EXPECT_EQ(cc.labels, oracle);
    }
  }
}

TEST(Morphology, EmptyDilateAndFullErode) {
  EXPECT_EQ(count_foreground(dilate(BinaryMask(6, 6), 2)), 0);
  const BinaryMask full(8, 7, std::uint8_t{1});
  const auto e = erode(full, 1);
  EXPECT_EQ(e, rect_mask(8, 7, 1, 1, 7, 6));
}

TEST(Morphology, SinglePixelDilatesToBlock) {
  BinaryMask m(7, 7);
  m(3, 3) = 1;
  EXPECT_EQ(dilate(m, 1), rect_mask(7, 7, 2, 2, 5, 5));
}

TEST(Morphology, RadiusZeroRejected) { EXPECT_THROW(erode(BinaryMask(3, 3), 0), DomainError); }

TEST(Otsu, BimodalSeparates) {
  GrayImage img(10, 10);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = i % 3 ? 0.1f : 0.9f;
  const double t = otsu_threshold(img);
  EXPECT_GT(t, 0.1);
  EXPECT_LT(t, 0.9);
}

TEST(Otsu, HalfHalfMixtureSelectsUpperPixels) {
  Rng rng(5);
  GrayImage img(20, 20);
  BinaryMask upper(20, 20);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const bool hi = i % 2 == 0;
    img.data()[i] = hi ? 0.8f : 0.2f;
    upper.data()[i] = hi;
  }
  EXPECT_EQ(threshold_above(img, otsu_threshold(img)), upper);
}

TEST(Otsu, ConstantImageThrows) { EXPECT_THROW(otsu_threshold(GrayImage(5, 5, 0.4f)), DomainError); }

TEST(Contours, EmptyMaskNoContours) { EXPECT_TRUE(trace_contours(BinaryMask(10, 10)).empty()); }

TEST(Contours, RectangleAreaMatchesPixelCount) {
  for (auto [w, h] : std::vector<std::pair<int, int>>{{5, 7}, {12, 3}, {20, 20}, {9, 31}}) {
    const auto m = rect_mask(40, 40, 4, 5, 4 + w, 5 + h);
    const auto cs = trace_contours(m);
    ASSERT_EQ(cs.size(), 1u);
    EXPECT_NEAR(signed_area(cs[0].points), static_cast<double>(w * h), 1.5);
  }
}

TEST(Contours, TwoComponentsTwoContours) {
  auto m = rect_mask(30, 30, 2, 2, 8, 8);
  for (int y = 15; y < 25; ++y)
    for (int x = 15; x < 25; ++x) m(x, y) = 1;
  EXPECT_EQ(trace_contours(m).size(), 2u);
}

TEST(Normals, CircleNormalsAreRadial) {
  const double r = 20.0, cx = 40.0, cy = 40.0;
  for (int window : {1, 2, 3, 5}) {
    Contour c;
    const int n = 240;
    for (int i = 0; i < n; ++i) {
      const double a = 2 * std::numbers::pi * i / n;
      c.points.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    c = estimate_normals(c, window);
    for (int i = 0; i < n; ++i) {
      const PointF radial{(c.points[i].x - cx) / r, (c.points[i].y - cy) / r};
      const double ang = std::acos(std::clamp(dot(radial, c.normals[i]), -1.0, 1.0));
      EXPECT_LT(ang * 180 / std::numbers::pi, 2.0);
    }
  }
}

TEST(Normals, SquareMidpointsAxisAligned) {
  Contour c;
  for (int i = 0; i < 10; ++i) c.points.push_back({double(i), 0});
  for (int i = 0; i < 10; ++i) c.points.push_back({10, double(i)});
  for (int i = 0; i < 10; ++i) c.points.push_back({double(10 - i), 10});
  for (int i = 0; i < 10; ++i) c.points.push_back({0, double(10 - i)});
  c = estimate_normals(c, 3);
  // Counter-clockwise in a y-up frame; outward on the y = 0 side is -y.
  EXPECT_EQ(c.normals[5], (PointF{0, -1}));
  EXPECT_EQ(c.normals[15], (PointF{1, 0}));
  EXPECT_EQ(c.normals[25], (PointF{0, 1}));
  EXPECT_EQ(c.normals[35], (PointF{-1, 0}));
}

TEST(Normals, ReversingOrderFlipsNormals) {
  const auto cs = trace_contours(disk_mask(40, 40, 20, 20, 12));
  ASSERT_EQ(cs.size(), 1u);
  Contour rev;
  rev.points.assign(cs[0].points.rbegin(), cs[0].points.rend());
  rev = estimate_normals(rev, 3);
  const std::size_t n = rev.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = cs[0].normals[n - 1 - i];
    EXPECT_NEAR(a.x, -rev.normals[i].x, 1e-12);
    EXPECT_NEAR(a.y, -rev.normals[i].y, 1e-12);
  }
}

TEST(Normals, TracedNormalsPointOutward) {
  const auto cs = trace_contours(disk_mask(60, 60, 30, 30, 15));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_GT(signed_area(cs[0].points), 0.0);
  for (std::size_t i = 0; i < cs[0].size(); ++i) {
    const PointF out = cs[0].points[i] - PointF{30, 30};
    EXPECT_GT(dot(out, cs[0].normals[i]), 0.0);
  }
}

TEST(Skeleton, BarBecomesMiddleRow) {
  const auto m = rect_mask(110, 7, 5, 2, 105, 5);
  const auto s = skeletonize(m);
  EXPECT_GT(count_foreground(s), 80);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 110; ++x)
      if (s(x, y)) EXPECT_EQ(y, 3);
}

TEST(Skeleton, SinglePixelFixedPoint) {
  BinaryMask m(5, 5);
  m(2, 2) = 1;
  EXPECT_EQ(skeletonize(m), m);
}

TEST(Skeleton, PreservesComponentCount) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    BinaryMask m(48, 48);
    const int blobs = 1 + static_cast<int>(rng.below(4));
    for (int b = 0; b < blobs; ++b) {
      const double cx = rng.uniform(6, 42), cy = rng.uniform(6, 42), r = rng.uniform(2, 7);
      const auto d = disk_mask(48, 48, cx, cy, r);
      for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] |= d.data()[i];
    }
    EXPECT_EQ(count_components(skeletonize(m)), count_components(m));
  }
}

TEST(LineFit, CollinearZeroResidual) {
  std::vector<PointF> pts{{0, 1}, {1, 3}, {2, 5}, {3, 7}};
  EXPECT_NEAR(max_abs_residual(fit_line_ls(pts), pts), 0.0, 1e-12);
}

TEST(LineFit, HandExample) {
  std::vector<PointF> pts{{0, 0}, {1, 1}, {2, 0}};
  const auto l = fit_line_ls(pts);
  EXPECT_NEAR(std::abs(l.direction.x), 1.0, 1e-12);
  EXPECT_NEAR(l.point.y, 1.0 / 3.0, 1e-12);
  const double sign = l.direction.x > 0 ? 1.0 : -1.0;
  EXPECT_NEAR(sign * l.residual(pts[0]), -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(sign * l.residual(pts[1]), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(sign * l.residual(pts[2]), -1.0 / 3.0, 1e-12);
}

TEST(LineFit, RotationEquivariance) {
  Rng rng(9);
  std::vector<PointF> pts;
  for (int i = 0; i < 30; ++i) pts.push_back({i * 1.0, 0.3 * i + 0.5 * rng.normal()});
  const double a = std::numbers::pi / 6;
  std::vector<PointF> rot;
  for (auto p : pts) rot.push_back(rotate(p, a));
  const auto l0 = fit_line_ls(pts);
  const auto l1 = fit_line_ls(rot);
  const auto d = rotate(l0.direction, a);
  EXPECT_NEAR(std::abs(cross(d, l1.direction)), 0.0, 1e-9);
  const double s = dot(d, l1.direction) > 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(l0.residual(pts[i]), s * l1.residual(rot[i]), 1e-9);
}

TEST(BoxFilter, ConstantImageUnchanged) {
  const GrayImage img(9, 6, 0.3f);
  const auto f = box_filter(img, 2);
  for (float v : f.data()) EXPECT_NEAR(v, 0.3f, 1e-6);
}
