#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library code it is checking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "damagekit/blend.hpp"
#include "damagekit/geometry.hpp"
#include "damagekit/image.hpp"
#include "damagekit/labels.hpp"
#include "damagekit/tile.hpp"

namespace oracle {

using damagekit::BinaryMask;
using damagekit::ClassLabel;
using damagekit::Instance;
using damagekit::Point2;
using damagekit::RasterImage;

// Classic crossing-number test (W. R. Franklin's pnpoly).
inline bool point_in_polygon(const std::vector<Point2>& v, double px, double py) {
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if (((v[i].y > py) != (v[j].y > py)) &&
        (px < (v[j].x - v[i].x) * (py - v[i].y) / (v[j].y - v[i].y) + v[i].x)) {
      inside = !inside;
    }
  }
  return inside;
}

inline BinaryMask rasterize_by_points(const std::vector<Point2>& v, int width, int height) {
  BinaryMask m(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (point_in_polygon(v, x + 0.5, y + 0.5)) m.set(x, y);
  return m;
}

// Random simple-or-not polygon with 3..max_vertices vertices; some vertices
// may fall outside the raster.
inline std::vector<Point2> random_polygon(std::mt19937_64& rng, int width, int height, int max_vertices = 9) {
  std::uniform_int_distribution<int> count(3, max_vertices);
  std::uniform_real_distribution<double> ux(-0.2 * width, 1.2 * width);
  std::uniform_real_distribution<double> uy(-0.2 * height, 1.2 * height);
  std::vector<Point2> v(count(rng));
  for (auto& p : v) p = {ux(rng), uy(rng)};
  return v;
}

// --- dense Poisson system ---------------------------------------------------

struct DenseSystem {
  std::vector<std::pair<int, int>> pixels;
  std::vector<std::vector<double>> a;   // n x n
  std::vector<std::vector<double>> b;   // channel x n
};

// Builds the seamless-cloning equations straight from the definition.
inline DenseSystem build_dense(const damagekit::blend::CloneTask& t) {
  DenseSystem s;
  const auto& r = t.region;
  std::vector<int> index(static_cast<std::size_t>(r.width()) * r.height(), -1);
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      if (r.get(x, y)) {
        index[static_cast<std::size_t>(y) * r.width() + x] = static_cast<int>(s.pixels.size());
        s.pixels.emplace_back(x, y);
      }
  const std::size_t n = s.pixels.size();
  const int channels = t.destination.channels();
  s.a.assign(n, std::vector<double>(n, 0.0));
  s.b.assign(channels, std::vector<double>(n, 0.0));
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  for (std::size_t k = 0; k < n; ++k) {
    const auto [x, y] = s.pixels[k];
    s.a[k][k] = 4.0;
    for (int d = 0; d < 4; ++d) {
      const int qx = x + dx[d], qy = y + dy[d];
      const int j = index[static_cast<std::size_t>(qy) * r.width() + qx];
      if (j >= 0) s.a[k][j] -= 1.0;
      for (int c = 0; c < channels; ++c) {
        if (j < 0) s.b[c][k] += t.destination.at(qx, qy, c);
        const double gp = t.source.at(x + t.source_offset.dx, y + t.source_offset.dy, c);
        const double gq = t.source.at(qx + t.source_offset.dx, qy + t.source_offset.dy, c);
        s.b[c][k] += gp - gq;
      }
    }
  }
  return s;
}

// Gaussian elimination with partial pivoting, all right-hand sides at once.
inline std::vector<std::vector<double>> solve_dense(DenseSystem s) {
  const std::size_t n = s.pixels.size();
  auto& a = s.a;
  auto& b = s.b;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    for (auto& rhs : b) std::swap(rhs[col], rhs[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      for (auto& rhs : b) rhs[r] -= f * rhs[col];
    }
  }
  std::vector<std::vector<double>> x(b.size(), std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < b.size(); ++c) {
    for (std::size_t i = n; i-- > 0;) {
      double acc = b[c][i];
      for (std::size_t k = i + 1; k < n; ++k) acc -= a[i][k] * x[c][k];
      x[c][i] = acc / a[i][i];
    }
  }
  return x;
}

inline RasterImage random_image(std::mt19937_64& rng, int width, int height, int channels = 3) {
  RasterImage img(width, height, channels);
  std::uniform_int_distribution<int> v(0, 255);
  for (auto& p : img.data()) p = static_cast<std::uint8_t>(v(rng));
  return img;
}

// Random blob region kept one pixel away from the image border, at most
// `max_pixels` set.
inline BinaryMask random_region(std::mt19937_64& rng, int width, int height, std::size_t max_pixels) {
  BinaryMask m(width, height);
  std::uniform_int_distribution<int> ux(1, width - 2), uy(1, height - 2), step(0, 3);
  int x = ux(rng), y = uy(rng);
  std::uniform_int_distribution<std::size_t> target_dist(1, max_pixels);
  const std::size_t target = target_dist(rng);
  std::size_t area = 0;
  for (int guard = 0; area < target && guard < 100000; ++guard) {
    if (!m.get(x, y)) {
      m.set(x, y);
      ++area;
    }
    const int d = step(rng);
    x = std::clamp(x + (d == 0) - (d == 1), 1, width - 2);
    y = std::clamp(y + (d == 2) - (d == 3), 1, height - 2);
  }
  return m;
}

// --- metrics ------------------------------------------------------------------

struct PrCounts {
  std::size_t kept = 0, matched = 0, truths = 0, detected = 0;
};

inline bool share_pixel(const BinaryMask& a, const BinaryMask& b) {
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      if (a.get(x, y) && b.get(x, y)) return true;
  return false;
}

inline bool class_ok(ClassLabel label, std::optional<ClassLabel> filter) { return !filter || *filter == label; }

// Pairwise enumeration over (prediction, ground truth) pairs of one image.
inline void count_pr(const std::vector<Instance>& truth, const std::vector<Instance>& preds, double threshold,
                     std::optional<ClassLabel> filter, PrCounts& out) {
  std::vector<const Instance*> kept, gts;
  for (const auto& p : preds)
    if (class_ok(p.label, filter) && p.confidence.value_or(1.0) >= threshold) kept.push_back(&p);
  for (const auto& g : truth)
    if (class_ok(g.label, filter)) gts.push_back(&g);
  out.kept += kept.size();
  out.truths += gts.size();
  for (const auto* p : kept) {
    bool hit = false;
    for (const auto* g : gts) hit = hit || (g->label == p->label && share_pixel(p->mask, g->mask));
    out.matched += hit;
  }
  for (const auto* g : gts) {
    bool hit = false;
    for (const auto* p : kept) hit = hit || (g->label == p->label && share_pixel(p->mask, g->mask));
    out.detected += hit;
  }
}

// Per-pixel counter: a pixel is predicted if any kept prediction covers it.
inline std::pair<std::size_t, std::size_t> count_iou(const std::vector<Instance>& truth,
                                                     const std::vector<Instance>& preds, int width, int height,
                                                     double threshold, std::optional<ClassLabel> filter) {
  std::size_t inter = 0, uni = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      bool p = false, g = false;
      for (const auto& i : preds)
        p = p || (class_ok(i.label, filter) && i.confidence.value_or(1.0) >= threshold && i.mask.get(x, y));
      for (const auto& i : truth) g = g || (class_ok(i.label, filter) && i.mask.get(x, y));
      inter += p && g;
      uni += p || g;
    }
  }
  return {inter, uni};
}

// --- merge ----------------------------------------------------------------------

// Groups by reachability over the overlap graph (Floyd-Warshall closure).
inline std::vector<BinaryMask> closure_groups(const std::vector<Instance>& in, std::size_t min_pixels = 1) {
  const std::size_t n = in.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || in[i].label != in[j].label) continue;
      std::size_t shared = 0;
      for (int y = 0; y < in[i].mask.height(); ++y)
        for (int x = 0; x < in[i].mask.width(); ++x) shared += in[i].mask.get(x, y) && in[j].mask.get(x, y);
      reach[i][j] = shared >= min_pixels;
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
  std::vector<BinaryMask> groups;
  std::vector<bool> done(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (done[i]) continue;
    BinaryMask u(in[i].mask.width(), in[i].mask.height());
    for (std::size_t j = 0; j < n; ++j) {
      if (!reach[i][j]) continue;
      done[j] = true;
      for (int y = 0; y < u.height(); ++y)
        for (int x = 0; x < u.width(); ++x)
          if (in[j].mask.get(x, y)) u.set(x, y);
    }
    groups.push_back(std::move(u));
  }
  return groups;
}

inline std::multiset<std::vector<std::uint8_t>> mask_bag(const std::vector<BinaryMask>& masks) {
  std::multiset<std::vector<std::uint8_t>> bag;
  for (const auto& m : masks) bag.emplace(m.bits().begin(), m.bits().end());
  return bag;
}

inline std::multiset<std::vector<std::uint8_t>> mask_bag(const std::vector<Instance>& instances) {
  std::multiset<std::vector<std::uint8_t>> bag;
  for (const auto& i : instances) bag.emplace(i.mask.bits().begin(), i.mask.bits().end());
  return bag;
}

inline BinaryMask rect_mask(int width, int height, int x, int y, int w, int h) {
  BinaryMask m(width, height);
  for (int yy = std::max(0, y); yy < std::min(height, y + h); ++yy)
    for (int xx = std::max(0, x); xx < std::min(width, x + w); ++xx) m.set(xx, yy);
  return m;
}

// Checks plan coverage and neighbour overlap by counting.
inline bool plan_invariants_hold(const damagekit::tile::TilingPlan& plan) {
  const auto& img = plan.image_size;
  std::vector<int> cover_x(img.width, 0), cover_y(img.height, 0);
  std::set<int> xs, ys;
  for (const auto& w : plan.windows) {
    if (w.x < 0 || w.y < 0 || w.x + w.width > img.width || w.y + w.height > img.height) return false;
    if (w.width != plan.window_size.width || w.height != plan.window_size.height) return false;
    xs.insert(w.x);
    ys.insert(w.y);
  }
  if (plan.windows.size() != xs.size() * ys.size()) return false;
  for (int x : xs)
    for (int i = x; i < x + plan.window_size.width; ++i) ++cover_x[i];
  for (int y : ys)
    for (int i = y; i < y + plan.window_size.height; ++i) ++cover_y[i];
  if (std::count(cover_x.begin(), cover_x.end(), 0) || std::count(cover_y.begin(), cover_y.end(), 0)) return false;
  auto overlap_ok = [&](const std::set<int>& origins, int size) {
    for (auto it = origins.begin(); std::next(it) != origins.end(); ++it)
      if (*it + size - *std::next(it) < plan.overlap) return false;
    return true;
  };
  if (!overlap_ok(xs, plan.window_size.width) || !overlap_ok(ys, plan.window_size.height)) return false;
  // Row-major order: y outer, x inner.
  for (std::size_t i = 1; i < plan.windows.size(); ++i) {
    const auto& a = plan.windows[i - 1];
    const auto& b = plan.windows[i];
    if (std::pair(a.y, a.x) >= std::pair(b.y, b.x)) return false;
  }
  return true;
}

}  // namespace oracle
