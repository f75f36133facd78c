#include "damagekit/image_io.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "damagekit/error.hpp"

namespace damagekit {

namespace {

cv::Mat read_mat(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::Io, "image not found: " + path.string());
  }
  cv::Mat mat = cv::imread(path.string(), flags);
  if (mat.empty()) throw Error(ErrorKind::Io, "cannot decode image: " + path.string());
  if (mat.depth() != CV_8U) {
    mat.convertTo(mat, CV_8U, mat.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
  }
  return mat;
}

}  // namespace

RasterImage load_image(const std::filesystem::path& path, bool keep_alpha) {
  cv::Mat mat = read_mat(path, keep_alpha ? cv::IMREAD_UNCHANGED : cv::IMREAD_COLOR);
  const int src_ch = mat.channels();
  const bool has_alpha = src_ch == 2 || src_ch == 4;
  const int channels = keep_alpha && has_alpha ? 4 : 3;
  RasterImage image(mat.cols, mat.rows, channels);
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      const std::uint8_t* px = row + static_cast<std::size_t>(x) * src_ch;
      if (src_ch <= 2) {
        image.at(x, y, 0) = image.at(x, y, 1) = image.at(x, y, 2) = px[0];
      } else {
        image.at(x, y, 0) = px[2];
        image.at(x, y, 1) = px[1];
        image.at(x, y, 2) = px[0];
      }
      if (channels == 4) image.at(x, y, 3) = px[src_ch - 1];
    }
  }
  return image;
}

void save_image(const RasterImage& image, const std::filesystem::path& path) {
  const int ch = image.channels();
  cv::Mat mat(image.height(), image.width(), ch == 4 ? CV_8UC4 : CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width(); ++x) {
      std::uint8_t* px = row + static_cast<std::size_t>(x) * ch;
      px[0] = image.at(x, y, 2);
      px[1] = image.at(x, y, 1);
      px[2] = image.at(x, y, 0);
      if (ch == 4) px[3] = image.at(x, y, 3);
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) {
    throw Error(ErrorKind::Io, "cannot write image: " + path.string());
  }
}

Size read_image_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "image not found: " + path.string());
  std::array<unsigned char, 24> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  static constexpr std::array<unsigned char, 8> kPngSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (in.gcount() == 24 && std::equal(kPngSignature.begin(), kPngSignature.end(), header.begin())) {
    auto be32 = [&](int off) {
      return static_cast<int>((header[off] << 24) | (header[off + 1] << 16) | (header[off + 2] << 8) |
                              header[off + 3]);
    };
    return {be32(16), be32(20)};
  }
  const cv::Mat mat = read_mat(path, cv::IMREAD_UNCHANGED);
  return {mat.cols, mat.rows};
}

BinaryMask load_mask(const std::filesystem::path& path) {
  const cv::Mat mat = read_mat(path, cv::IMREAD_GRAYSCALE);
  BinaryMask mask(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      if (row[x]) mask.set(x, y);
    }
  }
  return mask;
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  cv::Mat mat(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) row[x] = mask.get(x, y) ? 255 : 0;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) {
    throw Error(ErrorKind::Io, "cannot write mask: " + path.string());
  }
}

}  // namespace damagekit
