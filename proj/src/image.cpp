#include "regtrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#ifdef REGTRACK_HAVE_OPENCV
#include <opencv2/imgcodecs.hpp>
#endif

namespace regtrack {

GrayImage::GrayImage(int width, int height, float fill)
    : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height, fill) {
  if (width < 0 || height < 0) {
    throw std::invalid_argument("GrayImage: negative size");
  }
}

GrayImage::GrayImage(int width, int height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 0 || height < 0 ||
      pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw std::invalid_argument("GrayImage: pixel count does not match size");
  }
  for (float v : pixels_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw std::invalid_argument("GrayImage: intensity outside [0,1]");
    }
  }
}

float GrayImage::sample(double x, double y) const {
  const int x0 = std::min(static_cast<int>(x), width_ - 2 < 0 ? 0 : width_ - 2);
  const int y0 = std::min(static_cast<int>(y), height_ - 2 < 0 ? 0 : height_ - 2);
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
  const double bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

double GrayImage::mean() const {
  if (pixels_.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (float v : pixels_) {
    s += v;
  }
  return s / static_cast<double>(pixels_.size());
}

double GrayImage::variance() const {
  if (pixels_.empty()) {
    return 0.0;
  }
  const double m = mean();
  double s = 0.0;
  for (float v : pixels_) {
    s += (v - m) * (v - m);
  }
  return s / static_cast<double>(pixels_.size());
}

GrayImage gray_from_rgb8(int width, int height, std::span<const std::uint8_t> rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw std::invalid_argument("gray_from_rgb8: buffer size mismatch");
  }
  std::vector<float> px(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < px.size(); ++i) {
    const float v = kLumaR * rgb[3 * i] + kLumaG * rgb[3 * i + 1] + kLumaB * rgb[3 * i + 2];
    px[i] = std::clamp(v / 255.0f, 0.0f, 1.0f);
  }
  return GrayImage(width, height, std::move(px));
}

namespace {

// Reads the next header token, skipping whitespace and # comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) {
        return tok;
      }
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

GrayImage load_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open image " + path.string());
  }
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P6") {
    throw std::runtime_error(path.string() + ": unsupported netpbm variant " + magic);
  }
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error(path.string() + ": only 8-bit netpbm images are supported");
  }
  const std::size_t channels = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw std::runtime_error(path.string() + ": truncated pixel data");
  }
  if (channels == 3) {
    return gray_from_rgb8(w, h, raw);
  }
  std::vector<float> px(raw.size());
  std::transform(raw.begin(), raw.end(), px.begin(), [](std::uint8_t v) { return v / 255.0f; });
  return GrayImage(w, h, std::move(px));
}

}  // namespace

GrayImage load_gray_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm" || ext == ".ppm") {
    return load_netpbm(path);
  }
#ifdef REGTRACK_HAVE_OPENCV
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw std::runtime_error("cannot decode image " + path.string());
  }
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(bgr.cols) * bgr.rows * 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      const std::size_t o = (static_cast<std::size_t>(y) * bgr.cols + x) * 3;
      rgb[o] = row[3 * x + 2];
      rgb[o + 1] = row[3 * x + 1];
      rgb[o + 2] = row[3 * x];
    }
  }
  return gray_from_rgb8(bgr.cols, bgr.rows, rgb);
#else
  throw std::runtime_error("no decoder for " + path.string() + " (built without OpenCV)");
#endif
}

void save_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<std::uint8_t> raw(image.pixels().size());
  std::transform(image.pixels().begin(), image.pixels().end(), raw.begin(), [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  });
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

}  // namespace regtrack
