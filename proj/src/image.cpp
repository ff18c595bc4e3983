#include "fanet/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fanet {

Image Image::zeros(Index channel_count, Index height, Index width) {
  Image image;
  image.channels.assign(channel_count, Plane::Zero(height, width));
  return image;
}

bool Image::operator==(const Image& other) const {
  if (channel_count() != other.channel_count()) return false;
  for (Index c = 0; c < channel_count(); ++c) {
    const auto& a = channels[c];
    const auto& b = other.channels[c];
    if (a.rows() != b.rows() || a.cols() != b.cols() || !(a == b).all()) return false;
  }
  return true;
}

Plane luminance(const Image& image) {
  if (image.channel_count() == 3) {
    return 0.299f * image.channels[0] + 0.587f * image.channels[1] + 0.114f * image.channels[2];
  }
  if (image.channel_count() == 1) return image.channels[0];
  throw std::invalid_argument("luminance expects 1 or 3 channels");
}

Plane resize_bilinear(const Plane& plane, Index height, Index width) {
  if (plane.rows() == height && plane.cols() == width) return plane;
  const Index src_h = plane.rows();
  const Index src_w = plane.cols();
  const double scale_y = static_cast<double>(src_h) / height;
  const double scale_x = static_cast<double>(src_w) / width;

  struct Tap {
    Index lo, hi;
    float frac;
  };
  auto taps = [](Index n, Index src_n, double scale) {
    std::vector<Tap> out(n);
    for (Index i = 0; i < n; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(src_n - 1));
      const auto lo = static_cast<Index>(std::floor(s));
      out[i] = {lo, std::min(lo + 1, src_n - 1), static_cast<float>(s - lo)};
    }
    return out;
  };
  const auto ty = taps(height, src_h, scale_y);
  const auto tx = taps(width, src_w, scale_x);

  Plane out(height, width);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      const float top = plane(ty[y].lo, tx[x].lo) * (1 - tx[x].frac) + plane(ty[y].lo, tx[x].hi) * tx[x].frac;
      const float bottom = plane(ty[y].hi, tx[x].lo) * (1 - tx[x].frac) + plane(ty[y].hi, tx[x].hi) * tx[x].frac;
      out(y, x) = top * (1 - ty[y].frac) + bottom * ty[y].frac;
    }
  }
  return out;
}

Image resize_bilinear(const Image& image, Index height, Index width) {
  Image out;
  out.channels.reserve(image.channels.size());
  for (const auto& c : image.channels) out.channels.push_back(resize_bilinear(c, height, width));
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, Index height, Index width) {
  if (mask.height() == height && mask.width() == width) return mask;
  MaskArray out(height, width);
  for (Index y = 0; y < height; ++y) {
    const Index sy = std::min(static_cast<Index>((y + 0.5) * mask.height() / height), mask.height() - 1);
    for (Index x = 0; x < width; ++x) {
      const Index sx = std::min(static_cast<Index>((x + 0.5) * mask.width() / width), mask.width() - 1);
      out(y, x) = mask(sy, sx);
    }
  }
  return BinaryMask(std::move(out));
}

Image read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot read image " + path.string());
  Image image = Image::zeros(3, bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) image.channels[c](y, x) = row[x][2 - c] / 255.0f;
    }
  }
  return image;
}

BinaryMask read_mask(const std::filesystem::path& path, int threshold) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw std::runtime_error("cannot read mask " + path.string());
  MaskArray values(gray.rows, gray.cols);
  for (int y = 0; y < gray.rows; ++y) {
    const auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.cols; ++x) values(y, x) = row[x] > threshold ? 1 : 0;
  }
  return BinaryMask(std::move(values));
}

void write_image(const std::filesystem::path& path, const Image& image) {
  const int h = static_cast<int>(image.height());
  const int w = static_cast<int>(image.width());
  auto to_byte = [](float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); };
  cv::Mat out;
  if (image.channel_count() == 1) {
    out.create(h, w, CV_8UC1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at<std::uint8_t>(y, x) = to_byte(image.channels[0](y, x));
  } else {
    out.create(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) out.at<cv::Vec3b>(y, x)[2 - c] = to_byte(image.channels[c](y, x));
  }
  if (!cv::imwrite(path.string(), out)) throw std::runtime_error("cannot write " + path.string());
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  cv::Mat out(static_cast<int>(mask.height()), static_cast<int>(mask.width()), CV_8UC1);
  for (int y = 0; y < out.rows; ++y)
    for (int x = 0; x < out.cols; ++x) out.at<std::uint8_t>(y, x) = mask(y, x) ? 255 : 0;
  if (!cv::imwrite(path.string(), out)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace fanet
