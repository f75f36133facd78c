#include <doctest.h>

#include <random>

#include "damagekit/error.hpp"
#include "damagekit/geometry.hpp"
#include "damagekit/image.hpp"
#include "damagekit/json_codec.hpp"
#include "damagekit/labels.hpp"
#include "damagekit/random.hpp"
#include "damagekit/rle.hpp"
#include "oracles.hpp"

using namespace damagekit;

namespace {

BinaryMask row(std::vector<std::uint8_t> bits) {
  const int w = static_cast<int>(bits.size());
  return BinaryMask(w, 1, std::move(bits));
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Usage;
}

}  // namespace

TEST_CASE("rasterize: integer square covers exactly its 16 pixels") {
  const PolygonOutline square({{0, 0}, {4, 0}, {4, 4}, {0, 4}});
  const auto m = rasterize(square, 8, 8);
  CHECK(m.area() == 16);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(m.get(x, y) == (x < 4 && y < 4));
}

TEST_CASE("rasterize: L-shaped hexagon has area 20") {
  const std::vector<Point2> l{{0, 0}, {6, 0}, {6, 2}, {2, 2}, {2, 6}, {0, 6}};
  const auto m = rasterize(PolygonOutline(l), 8, 8);
  CHECK(m.area() == 20);
  CHECK(m == oracle::rasterize_by_points(l, 8, 8));
}

TEST_CASE("rasterize: fewer than three vertices is an invalid polygon") {
  CHECK(kind_of([] { PolygonOutline({{0, 0}, {1, 1}}); }) == ErrorKind::InvalidPolygon);
  CHECK(kind_of([] { PolygonOutline({{0, 0}, {1, 1}, {NAN, 2}}); }) == ErrorKind::InvalidPolygon);
}

TEST_CASE("rasterize: vertices outside the raster are clipped, not rejected") {
  const PolygonOutline big({{-10, -10}, {20, -10}, {20, 20}, {-10, 20}});
  CHECK(rasterize(big, 5, 3).area() == 15);
  const PolygonOutline away({{50, 50}, {60, 50}, {60, 60}});
  CHECK(rasterize(away, 5, 3).area() == 0);
}

TEST_CASE("rasterize: agrees with per-pixel point-in-polygon on random polygons") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> dim(1, 32);
  for (int trial = 0; trial < 300; ++trial) {
    const int w = dim(rng), h = dim(rng);
    const auto v = oracle::random_polygon(rng, w, h, 12);
    CHECK(rasterize(PolygonOutline(v), w, h) == oracle::rasterize_by_points(v, w, h));
  }
}

TEST_CASE("rasterize: half-integer vertices put centers on edges without disagreement") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> coord(-4, 44);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point2> v(3 + trial % 6);
    for (auto& p : v) p = {coord(rng) / 2.0, coord(rng) / 2.0};
    CHECK(rasterize(PolygonOutline(v), 20, 20) == oracle::rasterize_by_points(v, 20, 20));
  }
}

TEST_CASE("rle: worked examples") {
  CHECK(rle_encode(row({0, 0, 1, 1, 1, 0})).counts == std::vector<std::uint64_t>{2, 3, 1});
  CHECK(rle_encode(BinaryMask(2, 2)).counts == std::vector<std::uint64_t>{4});
  CHECK(rle_encode(row({1, 1, 0, 1})).counts == std::vector<std::uint64_t>{0, 2, 1, 1});
  CHECK(rle_decode({{2, 3, 1}}, 6, 1) == row({0, 0, 1, 1, 1, 0}));
  CHECK(kind_of([] { rle_decode({{5}}, 2, 2); }) == ErrorKind::CorruptRle);
}

TEST_CASE("rle: string form round trips") {
  const RunLengths r{{0, 2, 1, 1}};
  CHECK(to_string(r) == "0 2 1 1");
  CHECK(parse_run_lengths("0 2 1 1") == r);
}

TEST_CASE("rle: round trip on 1000 random masks") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(1, 40);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = dim(rng), h = dim(rng);
    const double p = density(rng);
    BinaryMask m(w, h);
    std::bernoulli_distribution bit(p);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) m.set(x, y, bit(rng));
    const auto runs = rle_encode(m);
    REQUIRE(rle_decode(runs, w, h) == m);
    REQUIRE(mask_from_json(mask_to_json(m), "/mask") == m);
  }
}

TEST_CASE("mask_overlap: worked examples and invariants") {
  const auto a = oracle::rect_mask(10, 10, 0, 0, 5, 2);
  CHECK(mask_overlap(a, a) == Overlap{10, 10});
  const auto b = oracle::rect_mask(10, 10, 0, 5, 10, 2);
  CHECK(mask_overlap(a, b) == Overlap{0, 30});
  const auto bar1 = oracle::rect_mask(8, 1, 0, 0, 4, 1);
  const auto bar2 = oracle::rect_mask(8, 1, 2, 0, 4, 1);
  CHECK(mask_overlap(bar1, bar2) == Overlap{2, 6});
  CHECK(kind_of([&] { mask_overlap(a, bar1); }) == ErrorKind::DimensionMismatch);

  std::mt19937_64 rng(5);
  std::bernoulli_distribution bit(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    BinaryMask p(9, 7), q(9, 7);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) {
        p.set(x, y, bit(rng));
        q.set(x, y, bit(rng));
      }
    const auto pq = mask_overlap(p, q);
    CHECK(pq == mask_overlap(q, p));
    CHECK(pq.intersection <= std::min(p.area(), q.area()));
    CHECK(pq.union_area == p.area() + q.area() - pq.intersection);
  }
}

TEST_CASE("dilate_square: 10x10 square grows to 14x14 at radius 2") {
  const auto m = oracle::rect_mask(30, 30, 10, 10, 10, 10);
  CHECK(dilate_square(m, 2).area() == 196);
  CHECK(dilate_square(m, 0) == m);
  // Clipped at the border.
  CHECK(dilate_square(oracle::rect_mask(12, 12, 0, 0, 10, 10), 2).area() == 144);
}

TEST_CASE("resampling and flips") {
  std::mt19937_64 rng(3);
  const auto img = oracle::random_image(rng, 13, 9);
  CHECK(flip_horizontal(flip_horizontal(img)) == img);
  CHECK(resize_bilinear(img, img.size()) == img);
  const auto m = oracle::rect_mask(13, 9, 2, 2, 5, 3);
  CHECK(flip_horizontal(flip_horizontal(m)) == m);
  CHECK(flip_horizontal(m).get(13 - 1 - 2, 2));
  CHECK(resize_nearest(m, {26, 18}).area() == 4 * m.area());
}

TEST_CASE("crop and place are inverse on contained masks") {
  const auto m = oracle::rect_mask(20, 20, 5, 6, 4, 3);
  const Rect r{3, 4, 10, 10};
  CHECK(place_mask(crop_mask(m, r), {20, 20}, r.x, r.y) == m);
  CHECK(crop_mask(m, r).area() == m.area());
}

TEST_CASE("class labels parse case-insensitively and list accepted values") {
  CHECK(parse_class_label("Damage") == ClassLabel::Damage);
  CHECK(parse_class_label("DIRT") == ClassLabel::Dirt);
  try {
    parse_class_label("rust");
    FAIL("expected UnknownClass");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownClass);
    CHECK(std::string(e.what()).find("damage") != std::string::npos);
    CHECK(std::string(e.what()).find("dirt") != std::string::npos);
  }
}

TEST_CASE("random streams are reproducible and named streams differ") {
  RandomStream a(derive_seed(1, "x", 0)), b(derive_seed(1, "x", 0)), c(derive_seed(1, "x", 1));
  for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
  CHECK(derive_seed(1, "x", 0) != derive_seed(1, "y", 0));
  CHECK(derive_seed(1, "x", 0) != derive_seed(2, "x", 0));
  RandomStream r(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform01();
    CHECK((u >= 0.0 && u < 1.0));
    const auto k = r.uniform_int(-3, 3);
    CHECK((k >= -3 && k <= 3));
  }
  (void)c;
}

TEST_CASE("json parse errors carry the byte offset") {
  try {
    parse_json("{\"a\": [1, 2,, 3]}", "doc");
    FAIL("expected Parse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}
