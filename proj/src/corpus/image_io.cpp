#include "corpus/image_io.hpp"

#include <array>
#include <string_view>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "common/error.hpp"
#include "common/text.hpp"

namespace derm {
namespace {

cv::Mat to_bgr(cv::Mat image, const std::string& what) {
  if (image.empty()) fail(ErrorCode::kCorrupt, "cannot decode image: " + what);
  if (image.depth() != CV_8U) {
    cv::Mat converted;
    const double scale = image.depth() == CV_16U ? 1.0 / 257.0 : 1.0;
    image.convertTo(converted, CV_8U, scale);
    image = converted;
  }
  cv::Mat out;
  switch (image.channels()) {
    case 1: cv::cvtColor(image, out, cv::COLOR_GRAY2BGR); break;
    case 3: out = image; break;
    case 4: cv::cvtColor(image, out, cv::COLOR_BGRA2BGR); break;
    default: fail(ErrorCode::kCorrupt, "unsupported channel count in " + what);
  }
  return out;
}

}  // namespace

bool has_image_extension(const std::filesystem::path& path) {
  static constexpr std::array<std::string_view, 10> kExtensions = {
      ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp", ".ppm", ".pgm", ".pnm"};
  const auto ext = text::lower(path.extension().string());
  for (auto e : kExtensions) {
    if (ext == e) return true;
  }
  return false;
}

cv::Mat decode_image_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    fail(ErrorCode::kNotFound, "image not found: " + path.string());
  }
  return to_bgr(cv::imread(path.string(), cv::IMREAD_UNCHANGED), path.string());
}

cv::Mat decode_image_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) fail(ErrorCode::kCorrupt, "cannot decode image: empty upload");
  std::vector<std::uint8_t> buf(bytes.begin(), bytes.end());
  cv::Mat decoded;
  try {
    decoded = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception&) {
    decoded = cv::Mat();
  }
  return to_bgr(decoded, "uploaded bytes");
}

void write_image(const std::filesystem::path& path, const cv::Mat& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), image)) {
    fail(ErrorCode::kIo, "cannot write image " + path.string());
  }
}

}  // namespace derm
