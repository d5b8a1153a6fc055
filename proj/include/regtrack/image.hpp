#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace regtrack {

/// Row-major grayscale raster with intensities in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, float fill = 0.0f);
  GrayImage(int width, int height, std::vector<float> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::span<const float> pixels() const { return pixels_; }
  std::span<float> pixels() { return pixels_; }

  float& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Bilinear sample; caller guarantees 0 <= x <= w-1 and 0 <= y <= h-1.
  float sample(double x, double y) const;

  double mean() const;
  double variance() const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_{0};
  int height_{0};
  std::vector<float> pixels_;
};

/// Luminance weights used when collapsing RGB to gray.
inline constexpr float kLumaR = 0.299f;
inline constexpr float kLumaG = 0.587f;
inline constexpr float kLumaB = 0.114f;

/// From 8-bit interleaved RGB.
GrayImage gray_from_rgb8(int width, int height, std::span<const std::uint8_t> rgb);

/// Binary PGM (P5) / PPM (P6), 8-bit. Other formats go through OpenCV when the
/// library was built with it; otherwise they throw std::runtime_error.
GrayImage load_gray_image(const std::filesystem::path& path);
void save_pgm(const GrayImage& image, const std::filesystem::path& path);

}  // namespace regtrack
