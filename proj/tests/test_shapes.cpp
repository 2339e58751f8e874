#include "lampdet/error.hpp"
#include "lampdet/shapes.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lampdet;
using namespace lampdet::testing;

TEST(Blobs, SingleSquare) {
  GrayImage img = blank(40, 30);
  fill_rect(img, 5, 6, 14, 15, 255);
  const auto blobs = extract_blobs(img, 220, 1);
  ASSERT_EQ(blobs.size(), 1u);
  EXPECT_EQ(blobs[0].area(), 100);
  EXPECT_EQ(blobs[0].box.min_x, 5);
  EXPECT_EQ(blobs[0].box.max_y, 15);
  EXPECT_EQ(blobs[0].max_intensity, 255);
  EXPECT_NEAR(blobs[0].centroid().x(), 9.5, 1e-12);
}

TEST(Blobs, DiagonalPixelsConnect) {
  GrayImage img = blank(10, 10);
  for (int i = 0; i < 6; ++i) img.at(i + 1, i + 1) = 250;
  EXPECT_EQ(extract_blobs(img, 220, 1).size(), 1u);
}

TEST(Blobs, SortedByArea) {
  GrayImage img = blank(80, 40);
  fill_rect(img, 2, 2, 6, 6, 255);
  fill_rect(img, 20, 5, 39, 24, 255);
  fill_rect(img, 50, 5, 59, 14, 255);
  const auto blobs = extract_blobs(img, 220, 1);
  ASSERT_EQ(blobs.size(), 3u);
  EXPECT_EQ(blobs[0].area(), 400);
  EXPECT_EQ(blobs[1].area(), 100);
  EXPECT_EQ(blobs[2].area(), 25);
  EXPECT_EQ(extract_blobs(img, 220, 30).size(), 2u);
}

TEST(Blobs, MatchesFloodFillOracle) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> px(0, 255);
  for (int trial = 0; trial < 25; ++trial) {
    GrayImage img = blank(48, 40);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(px(rng));
    for (int thr : {128, 200, 240}) {
      for (int min_area : {1, 3, 10}) {
        EXPECT_EQ(static_cast<int>(extract_blobs(img, thr, min_area).size()),
                  flood_fill_count(img, thr, min_area))
            << "trial " << trial << " thr " << thr << " min_area " << min_area;
      }
    }
  }
}

TEST(Blobs, AreaSumsAndThreshold) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> px(0, 255);
  GrayImage img = blank(64, 64);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(px(rng));
  int above = 0;
  for (auto v : img.data) above += v >= 180;
  int total = 0;
  for (const auto& b : extract_blobs(img, 180, 1)) {
    total += b.area();
    for (const auto& p : b.pixels) EXPECT_GE(img.at(p.x(), p.y()), 180);
  }
  EXPECT_EQ(total, above);
}

TEST(Contour, SquareThroughPixelCentres) {
  GrayImage img = blank(30, 30);
  fill_rect(img, 10, 10, 19, 19, 255);
  const auto blobs = extract_blobs(img, 220, 1);
  const Contour c = trace_contour(blobs.at(0));
  EXPECT_NEAR(c.area, 81.0, 1e-9);
  EXPECT_NEAR(c.points.front().x(), 10.0, 1e-12);
  EXPECT_NEAR(c.points.front().y(), 10.0, 1e-12);
  for (const auto& p : c.points) {
    const bool on_edge = p.x() == 10 || p.x() == 19 || p.y() == 10 || p.y() == 19;
    EXPECT_TRUE(on_edge) << p.transpose();
  }
}

TEST(Contour, SinglePixelIsDegenerate) {
  GrayImage img = blank(10, 10);
  img.at(4, 4) = 255;
  const auto blobs = extract_blobs(img, 220, 1);
  try {
    trace_contour(blobs.at(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateBlob);
  }
}

TEST(Classify, DiscAndSquare) {
  GrayImage img = blank(200, 100);
  fill_ellipse(img, 50, 50, 30, 30, 0.0, 255);
  fill_rect(img, 120, 20, 179, 79, 255);
  const auto blobs = extract_blobs(img, 220, 1);
  ASSERT_EQ(blobs.size(), 2u);
  // Largest first: the 60x60 square.
  EXPECT_EQ(classify_shape(trace_contour(blobs[0])), ShapeKind::Polygonal);
  EXPECT_EQ(classify_shape(trace_contour(blobs[1])), ShapeKind::Circular);
}

TEST(Classify, ThresholdBoundary) {
  Contour c;
  c.perimeter = 14.0;
  c.area = 14.0;  // ratio exactly 14
  EXPECT_EQ(classify_shape(c, 14.0), ShapeKind::Polygonal);
  c.area = 14.01;
  EXPECT_EQ(classify_shape(c, 14.0), ShapeKind::Circular);
}

TEST(Simplify, RectangleHasFourCorners) {
  GrayImage img = blank(120, 100);
  fill_rect(img, 20, 30, 99, 69, 255);
  const Contour c = trace_contour(extract_blobs(img, 220, 1).at(0));
  const auto v = simplify_polygon(c, 2.5);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_NEAR(v[0].x(), 20, 1e-9);
  EXPECT_NEAR(v[0].y(), 30, 1e-9);
  // Counterclockwise as displayed means negative area in a y-up frame.
  EXPECT_LT(signed_area(v), 0.0);
  EXPECT_NEAR(polygon_area(v), 79.0 * 39.0, 1e-9);
}

TEST(Simplify, RotatedQuadrilateral) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(0.0, kPi / 2), jit(-6.0, 6.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = ang(rng);
    std::vector<Vec2> poly;
    const Vec2 c(100, 90);
    for (int k = 0; k < 4; ++k) {
      const double t = a + k * kPi / 2;
      const double r = 55.0 + jit(rng);
      poly.emplace_back(c.x() + r * std::cos(t), c.y() + 0.8 * r * std::sin(t));
    }
    GrayImage img = blank(200, 180);
    fill_convex(img, poly, 255);
    const Contour cont = trace_contour(extract_blobs(img, 220, 1).at(0));
    const auto v = merge_short_edges(simplify_polygon(cont, 2.5));
    ASSERT_EQ(v.size(), 4u) << "trial " << trial;
    for (const auto& q : v) {
      double best = 1e9;
      for (const auto& p : poly) best = std::min(best, (p - q).norm());
      EXPECT_LT(best, 4.0) << "trial " << trial;
    }
  }
}

TEST(Simplify, TooFewVertices) {
  Contour c;
  c.points = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  try {
    simplify_polygon(c, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewVertices);
  }
}

TEST(MergeShortEdges, ClippedCornerRestored) {
  // Square with its top-right corner cut by a 2 px chamfer.
  const std::vector<Vec2> v = {Vec2(0, 0), Vec2(0, 40), Vec2(40, 40), Vec2(40, 2), Vec2(38, 0)};
  const auto m = merge_short_edges(v);
  ASSERT_EQ(m.size(), 4u);
  bool found = false;
  for (const auto& p : m) found |= (p - Vec2(40, 0)).norm() < 1e-9;
  EXPECT_TRUE(found);
  EXPECT_EQ(m[0], Vec2(0, 0));
}

TEST(MergeShortEdges, LeavesQuadrilateralAlone) {
  const std::vector<Vec2> v = {Vec2(0, 0), Vec2(0, 40), Vec2(1, 40), Vec2(1, 0)};
  EXPECT_EQ(merge_short_edges(v), v);
}

TEST(MergeShortEdges, KeepsLongEdges) {
  std::vector<Vec2> hex;
  for (int k = 0; k < 6; ++k)
    hex.emplace_back(50 + 30 * std::cos(k * kPi / 3), 50 + 30 * std::sin(k * kPi / 3));
  EXPECT_EQ(merge_short_edges(hex).size(), 6u);
}

TEST(Ellipse, ExactPointsRecovered) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = 10 + 60 * u(rng), b = a * (0.2 + 0.79 * u(rng));
    const double th = kPi * u(rng);
    const Vec2 c(300 * u(rng), 200 * u(rng));
    std::vector<Vec2> pts;
    for (int k = 0; k < 40; ++k) {
      const double t = 2 * kPi * k / 40;
      const Vec2 local(a * std::cos(t), b * std::sin(t));
      pts.emplace_back(c.x() + std::cos(th) * local.x() - std::sin(th) * local.y(),
                       c.y() + std::sin(th) * local.x() + std::cos(th) * local.y());
    }
    const Ellipse e = fit_ellipse(pts);
    EXPECT_NEAR((e.center - c).norm(), 0.0, 1e-6 * a);
    EXPECT_NEAR(e.semi_major, a, 1e-6 * a);
    EXPECT_NEAR(e.semi_minor, b, 1e-6 * a);
    EXPECT_GE(e.angle, 0.0);
    EXPECT_LT(e.angle, kPi);
    double d = std::abs(e.angle - th);
    d = std::min(d, kPi - d);
    if (a - b > 1e-3 * a) {
      EXPECT_LT(d, 1e-5);
    }
    EXPECT_NEAR(e.area(), kPi * a * b, 1e-5 * a * b);
  }
}

TEST(Ellipse, DegenerateInput) {
  std::vector<Vec2> line;
  for (int k = 0; k < 10; ++k) line.emplace_back(k, 2 * k);
  EXPECT_THROW(fit_ellipse(line), Error);
  EXPECT_THROW(fit_ellipse({Vec2(0, 0), Vec2(1, 1), Vec2(2, 0)}), Error);
}

TEST(ObserveShape, DiscIsCircular) {
  GrayImage img = blank(160, 120);
  fill_ellipse(img, 80, 60, 40, 25, 0.3, 255);
  const auto blob = extract_blobs(img, 220, 1).at(0);
  const ShapeObservation obs = observe_shape(trace_contour(blob), blob.box, 14.0, 2.5);
  ASSERT_EQ(obs.kind, ShapeKind::Circular);
  EXPECT_NEAR(obs.ellipse.center.x(), 80, 0.5);
  EXPECT_NEAR(obs.ellipse.center.y(), 60, 0.5);
  EXPECT_NEAR(obs.ellipse.semi_major, 40, 1.0);
  EXPECT_NEAR(obs.ellipse.semi_minor, 25, 1.0);
  EXPECT_NEAR(obs.ellipse.angle, 0.3, 0.03);
}
