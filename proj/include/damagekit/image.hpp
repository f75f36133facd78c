#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace damagekit {

struct Size {
  int width = 0;
  int height = 0;

  friend bool operator==(const Size&, const Size&) = default;
};

// Axis-aligned pixel rectangle, half-open: [x, x + width) x [y, y + height).
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool empty() const { return width <= 0 || height <= 0; }
  int right() const { return x + width; }
  int bottom() const { return y + height; }
  bool contains(int px, int py) const {
    return px >= x && py >= y && px < right() && py < bottom();
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

Rect intersect(const Rect& a, const Rect& b);

// Row-major interleaved 8-bit raster with 3 (RGB) or 4 (RGBA) channels.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, int channels, std::uint8_t fill = 0);
  RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  Size size() const { return {width_, height_}; }
  bool empty() const { return data_.empty(); }

  std::uint8_t at(int x, int y, int c) const {
    return data_[index(x, y, c)];
  }
  std::uint8_t& at(int x, int y, int c) { return data_[index(x, y, c)]; }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

// Row-major occupancy raster; one byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  Size size() const { return {width_, height_}; }

  bool get(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool value = true) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0;
  }
  // Out-of-bounds reads are false.
  bool get_or_false(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_ && get(x, y);
  }

  std::size_t area() const;
  bool any() const;
  // Tight bounding box of set pixels; empty Rect when the mask is empty.
  Rect bounding_box() const;

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Overlap {
  std::size_t intersection = 0;
  std::size_t union_area = 0;

  friend bool operator==(const Overlap&, const Overlap&) = default;
};

Overlap mask_overlap(const BinaryMask& a, const BinaryMask& b);
bool masks_intersect(const BinaryMask& a, const BinaryMask& b, std::size_t min_pixels = 1);

// In-place a |= b, a &= ~b. Dimensions must match.
void mask_union_into(BinaryMask& a, const BinaryMask& b);
void mask_subtract_into(BinaryMask& a, const BinaryMask& b);

BinaryMask crop_mask(const BinaryMask& mask, const Rect& region);
RasterImage crop_image(const RasterImage& image, const Rect& region);

// Places `mask` with its top-left corner at (x, y) in a canvas of `canvas` size,
// discarding pixels that fall outside.
BinaryMask place_mask(const BinaryMask& mask, Size canvas, int x, int y);

// Pixel-center mapped resampling. Masks always use nearest neighbour.
RasterImage resize_bilinear(const RasterImage& image, Size target);
BinaryMask resize_nearest(const BinaryMask& mask, Size target);

RasterImage flip_horizontal(const RasterImage& image);
BinaryMask flip_horizontal(const BinaryMask& mask);

// Square (Chebyshev) structuring element; growth is clipped at the mask bounds.
BinaryMask dilate_square(const BinaryMask& mask, int radius);

}  // namespace damagekit
