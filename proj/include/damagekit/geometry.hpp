#pragma once

#include <vector>

#include "damagekit/image.hpp"

namespace damagekit {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Closed polygon in pixel coordinates; the last vertex connects back to the first.
class PolygonOutline {
 public:
  // Throws InvalidPolygon for fewer than 3 vertices or non-finite coordinates.
  explicit PolygonOutline(std::vector<Point2> vertices);

  const std::vector<Point2>& vertices() const { return vertices_; }

  friend bool operator==(const PolygonOutline&, const PolygonOutline&) = default;

 private:
  std::vector<Point2> vertices_;
};

// Sets pixel (x, y) iff its center (x + 0.5, y + 0.5) lies inside the polygon
// under the even-odd rule. Parts of the polygon outside the raster are dropped.
BinaryMask rasterize(const PolygonOutline& polygon, int width, int height);

}  // namespace damagekit
