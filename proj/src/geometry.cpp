#include "damagekit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "damagekit/error.hpp"

namespace damagekit {

PolygonOutline::PolygonOutline(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) {
    throw Error(ErrorKind::InvalidPolygon,
                "polygon needs at least 3 vertices, got " + std::to_string(vertices_.size()));
  }
  for (const auto& v : vertices_) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
      throw Error(ErrorKind::InvalidPolygon, "polygon has a non-finite coordinate");
    }
  }
}

BinaryMask rasterize(const PolygonOutline& polygon, int width, int height) {
  BinaryMask mask(width, height);
  const auto& v = polygon.vertices();
  const std::size_t n = v.size();
  std::vector<double> crossings;
  crossings.reserve(n);

  for (int row = 0; row < height; ++row) {
    const double cy = row + 0.5;
    crossings.clear();
    // Half-open rule on y: an edge counts when exactly one endpoint is above cy.
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point2& a = v[i];
      const Point2& b = v[j];
      if ((a.y > cy) != (b.y > cy)) {
        crossings.push_back((b.x - a.x) * (cy - a.y) / (b.y - a.y) + a.x);
      }
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    // A center cx is inside iff an odd number of crossings lie strictly right of it,
    // i.e. crossings[2k] <= cx < crossings[2k+1].
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const double lo = crossings[k];
      const double hi = crossings[k + 1];
      const double start = std::clamp(lo, -1.0, static_cast<double>(width) + 1.0);
      const int first = std::max(static_cast<int>(std::ceil(start - 0.5)), 0);
      for (int col = first; col < width; ++col) {
        const double cx = col + 0.5;
        if (cx < lo) continue;
        if (cx >= hi) break;
        mask.set(col, row);
      }
    }
  }
  return mask;
}

}  // namespace damagekit
