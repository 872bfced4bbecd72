#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "meshvote/error.hpp"

namespace meshvote {

/// Row-major image with interleaved channels. `data.size() == width * height * channels`.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels <= 0) {
      throw PreconditionError("image dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }
  Image(int width, int height, int channels, std::vector<T> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw DimensionMismatch("image data length does not match width*height*channels");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool same_size(int width, int height) const noexcept {
    return width_ == width && height_ == height;
  }
  template <typename U>
  bool same_size(const Image<U>& other) const noexcept {
    return same_size(other.width(), other.height());
  }

  T& at(int x, int y, int c = 0) noexcept {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  const T& at(int x, int y, int c = 0) const noexcept {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& samples() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

/// 8-bit image: RGB color (3 channels) or a binary mask (1 channel, values 0/1).
using Bitmap = Image<std::uint8_t>;

/// Binary mask image, one channel, values in {0, 1}.
using MaskImage = Bitmap;

/// Per-pixel face ids; background pixels hold `kBackgroundFace`.
using FaceIndexMap = Image<std::uint32_t>;

inline constexpr std::uint32_t kBackgroundFace = 0xFFFFFFFFu;

/// Axis-aligned pixel-space box, half-open: pixel (i, j) covers [i, i+1) x [j, j+1).
struct PixelBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const noexcept { return x1 - x0; }
  double height() const noexcept { return y1 - y0; }
  double area() const noexcept {
    return (x1 > x0 && y1 > y0) ? (x1 - x0) * (y1 - y0) : 0.0;
  }
  bool valid_within(int image_width, int image_height) const noexcept {
    return x0 < x1 && y0 < y1 && x0 >= 0.0 && y0 >= 0.0 && x1 <= image_width &&
           y1 <= image_height;
  }

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

double box_iou(const PixelBox& a, const PixelBox& b) noexcept;

/// Tight half-open box around the nonzero pixels of a one-channel mask, if any.
std::optional<PixelBox> mask_bounding_box(const MaskImage& mask);

}  // namespace meshvote
