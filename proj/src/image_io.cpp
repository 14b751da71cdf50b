#include "mqp/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace mqp::io {
namespace fs = std::filesystem;

namespace {

cv::Mat load(const fs::path& path, int flags) {
  cv::Mat img = cv::imread(path.string(), flags);
  if (img.empty()) throw MissingDependency("cannot read image: " + path.string());
  if (img.depth() != CV_8U) {
    img.convertTo(img, CV_8U, img.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
  }
  return img;
}

void store(const fs::path& path, const cv::Mat& img) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) {
    throw MissingDependency("cannot write image: " + path.string());
  }
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

SaliencyMap read_map(const fs::path& path) {
  cv::Mat img = load(path, cv::IMREAD_GRAYSCALE);
  SaliencyMap out(img.rows, img.cols);
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) out(y, x) = img.at<std::uint8_t>(y, x) / 255.0;
  return out;
}

void write_map(const fs::path& path, const SaliencyMap& map) {
  cv::Mat img(map.height(), map.width(), CV_8UC1);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) img.at<std::uint8_t>(y, x) = quantize(map(y, x));
  store(path, img);
}

BinaryMask read_mask(const fs::path& path) {
  cv::Mat img = load(path, cv::IMREAD_GRAYSCALE);
  BinaryMask out(img.rows, img.cols);
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) out(y, x) = img.at<std::uint8_t>(y, x) >= 128 ? 1 : 0;
  return out;
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
  cv::Mat img(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) img.at<std::uint8_t>(y, x) = mask(y, x) ? 255 : 0;
  store(path, img);
}

RgbImage read_rgb(const fs::path& path) {
  cv::Mat img = load(path, cv::IMREAD_COLOR);
  RgbImage out(img.rows, img.cols, 3);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      const auto& bgr = img.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) out(y, x, c) = bgr[2 - c] / 255.0;
    }
  }
  return out;
}

void write_rgb(const fs::path& path, const RgbImage& image) {
  if (image.channels() != 3) throw InvalidInput("write_rgb expects 3 channels");
  cv::Mat img(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      auto& bgr = img.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) bgr[2 - c] = quantize(image(y, x, c));
    }
  }
  store(path, img);
}

}  // namespace mqp::io
