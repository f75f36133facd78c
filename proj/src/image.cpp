#include "damagekit/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "damagekit/error.hpp"

namespace damagekit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidPolygon: return "invalid-polygon";
    case ErrorKind::CorruptRle: return "corrupt-rle";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::UnsupportedShape: return "unsupported-shape";
    case ErrorKind::UnknownClass: return "unknown-class";
    case ErrorKind::InvalidRegion: return "invalid-region";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::InvalidPlan: return "invalid-plan";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Io: return "io";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

namespace {

void require_dimensions(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::OutOfRange, "raster dimensions must be positive, got " +
                                           std::to_string(width) + "x" + std::to_string(height));
  }
}

void require_same_size(const BinaryMask& a, const BinaryMask& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "mask sizes differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

}  // namespace

Rect intersect(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.right(), b.right());
  const int y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return {};
  return {x0, y0, x1 - x0, y1 - y0};
}

RasterImage::RasterImage(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  require_dimensions(width, height);
  if (channels != 3 && channels != 4) {
    throw Error(ErrorKind::OutOfRange, "images must have 3 or 4 channels");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

RasterImage::RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  require_dimensions(width, height);
  if (channels != 3 && channels != 4) {
    throw Error(ErrorKind::OutOfRange, "images must have 3 or 4 channels");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorKind::DimensionMismatch, "image buffer length does not match dimensions");
  }
}

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
  require_dimensions(width, height);
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  require_dimensions(width, height);
  if (bits_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorKind::DimensionMismatch, "mask buffer length does not match dimensions");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::area() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BinaryMask::any() const {
  return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) != bits_.end();
}

Rect BinaryMask::bounding_box() const {
  int x0 = width_, y0 = height_, x1 = -1, y1 = -1;
  for (int y = 0; y < height_; ++y) {
    const std::uint8_t* row = bits_.data() + static_cast<std::size_t>(y) * width_;
    for (int x = 0; x < width_; ++x) {
      if (row[x]) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Overlap mask_overlap(const BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b);
  Overlap result;
  const auto ab = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    result.intersection += ab[i] & bb[i];
    result.union_area += ab[i] | bb[i];
  }
  return result;
}

bool masks_intersect(const BinaryMask& a, const BinaryMask& b, std::size_t min_pixels) {
  require_same_size(a, b);
  const auto ab = a.bits();
  const auto bb = b.bits();
  std::size_t shared = 0;
  for (std::size_t i = 0; i < ab.size(); ++i) {
    shared += ab[i] & bb[i];
    if (shared >= min_pixels) return true;
  }
  return false;
}

void mask_union_into(BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b);
  auto ab = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) ab[i] |= bb[i];
}

void mask_subtract_into(BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b);
  auto ab = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) ab[i] &= static_cast<std::uint8_t>(bb[i] ^ 1);
}

BinaryMask crop_mask(const BinaryMask& mask, const Rect& region) {
  if (intersect(region, {0, 0, mask.width(), mask.height()}) != region || region.empty()) {
    throw Error(ErrorKind::OutOfRange, "crop region outside mask bounds");
  }
  BinaryMask out(region.width, region.height);
  for (int y = 0; y < region.height; ++y) {
    for (int x = 0; x < region.width; ++x) {
      out.set(x, y, mask.get(region.x + x, region.y + y));
    }
  }
  return out;
}

RasterImage crop_image(const RasterImage& image, const Rect& region) {
  if (intersect(region, {0, 0, image.width(), image.height()}) != region || region.empty()) {
    throw Error(ErrorKind::OutOfRange, "crop region outside image bounds");
  }
  const int ch = image.channels();
  RasterImage out(region.width, region.height, ch);
  const auto src = image.data();
  auto dst = out.data();
  const std::size_t row_bytes = static_cast<std::size_t>(region.width) * ch;
  for (int y = 0; y < region.height; ++y) {
    const std::size_t s =
        (static_cast<std::size_t>(region.y + y) * image.width() + region.x) * ch;
    std::copy_n(src.begin() + s, row_bytes, dst.begin() + y * row_bytes);
  }
  return out;
}

BinaryMask place_mask(const BinaryMask& mask, Size canvas, int x, int y) {
  BinaryMask out(canvas.width, canvas.height);
  const Rect visible = intersect({x, y, mask.width(), mask.height()}, {0, 0, canvas.width, canvas.height});
  for (int yy = visible.y; yy < visible.bottom(); ++yy) {
    for (int xx = visible.x; xx < visible.right(); ++xx) {
      if (mask.get(xx - x, yy - y)) out.set(xx, yy);
    }
  }
  return out;
}

RasterImage resize_bilinear(const RasterImage& image, Size target) {
  require_dimensions(target.width, target.height);
  if (target == image.size()) return image;
  const int ch = image.channels();
  RasterImage out(target.width, target.height, ch);
  const double sx = static_cast<double>(image.width()) / target.width;
  const double sy = static_cast<double>(image.height()) / target.height;

  // Precompute horizontal taps once per column.
  std::vector<int> x0s(target.width), x1s(target.width);
  std::vector<double> wxs(target.width);
  for (int x = 0; x < target.width; ++x) {
    const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
    x0s[x] = static_cast<int>(fx);
    x1s[x] = std::min(x0s[x] + 1, image.width() - 1);
    wxs[x] = fx - x0s[x];
  }
  for (int y = 0; y < target.height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target.width; ++x) {
      const double wx = wxs[x];
      for (int c = 0; c < ch; ++c) {
        const double top = image.at(x0s[x], y0, c) * (1 - wx) + image.at(x1s[x], y0, c) * wx;
        const double bot = image.at(x0s[x], y1, c) * (1 - wx) + image.at(x1s[x], y1, c) * wx;
        const double v = top * (1 - wy) + bot * wy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, Size target) {
  require_dimensions(target.width, target.height);
  if (target == mask.size()) return mask;
  BinaryMask out(target.width, target.height);
  std::vector<int> xs(target.width);
  for (int x = 0; x < target.width; ++x) {
    xs[x] = std::min(static_cast<int>((x + 0.5) * mask.width() / target.width), mask.width() - 1);
  }
  for (int y = 0; y < target.height; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * mask.height() / target.height), mask.height() - 1);
    for (int x = 0; x < target.width; ++x) {
      if (mask.get(xs[x], sy)) out.set(x, y);
    }
  }
  return out;
}

RasterImage flip_horizontal(const RasterImage& image) {
  RasterImage out(image.width(), image.height(), image.channels());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        out.at(image.width() - 1 - x, y, c) = image.at(x, y, c);
      }
    }
  }
  return out;
}

BinaryMask flip_horizontal(const BinaryMask& mask) {
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) out.set(mask.width() - 1 - x, y);
    }
  }
  return out;
}

BinaryMask dilate_square(const BinaryMask& mask, int radius) {
  if (radius < 0) throw Error(ErrorKind::OutOfRange, "dilation radius must be non-negative");
  if (radius == 0) return mask;
  const int w = mask.width();
  const int h = mask.height();
  // Separable: horizontal pass then vertical pass.
  BinaryMask horizontal(w, h);
  for (int y = 0; y < h; ++y) {
    int last_set = -1'000'000;
    for (int x = 0; x < w + radius; ++x) {
      if (x < w && mask.get(x, y)) last_set = x;
      const int target = x - radius;
      if (target >= 0 && target < w) {
        // Set if any source in [target - r, target + r].
        if (last_set >= target - radius) horizontal.set(target, y);
      }
    }
  }
  BinaryMask out(w, h);
  for (int x = 0; x < w; ++x) {
    int last_set = -1'000'000;
    for (int y = 0; y < h + radius; ++y) {
      if (y < h && horizontal.get(x, y)) last_set = y;
      const int target = y - radius;
      if (target >= 0 && target < h && last_set >= target - radius) out.set(x, target);
    }
  }
  return out;
}

}  // namespace damagekit
