#include "synthetic.hpp"

#include <atomic>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace fs = std::filesystem;

namespace testsupport {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

cv::Mat class_image(std::size_t label_index, std::size_t variant, int side) {
  static const std::array<cv::Scalar, 9> palette = {
      cv::Scalar(30, 30, 220),  cv::Scalar(40, 200, 40),  cv::Scalar(220, 40, 40),
      cv::Scalar(30, 220, 220), cv::Scalar(220, 40, 220), cv::Scalar(220, 220, 30),
      cv::Scalar(20, 20, 20),   cv::Scalar(235, 235, 235), cv::Scalar(40, 120, 200)};
  cv::Mat img(side, side, CV_8UC3, palette[label_index % 9]);
  // Stripe period and orientation differ per class.
  const int period = 4 + static_cast<int>(label_index);
  const cv::Scalar ink = cv::Scalar(255, 255, 255) - palette[label_index % 9];
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const int coord = label_index % 3 == 0 ? x : label_index % 3 == 1 ? y : x + y;
      if ((coord / period) % 4 == 0) {
        img.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>(ink[0]), static_cast<uchar>(ink[1]),
                                            static_cast<uchar>(ink[2]));
      }
    }
  }
  std::mt19937 gen(static_cast<unsigned>(label_index * 1000 + variant));
  std::uniform_int_distribution<int> jitter(-12, 12);
  for (auto it = img.begin<cv::Vec3b>(); it != img.end<cv::Vec3b>(); ++it) {
    for (int c = 0; c < 3; ++c) (*it)[c] = cv::saturate_cast<uchar>((*it)[c] + jitter(gen));
  }
  return img;
}

cv::Mat noise_image(unsigned seed, int side) {
  cv::Mat img(side, side, CV_8UC3);
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto it = img.begin<cv::Vec3b>(); it != img.end<cv::Vec3b>(); ++it) {
    *it = cv::Vec3b(static_cast<uchar>(d(gen)), static_cast<uchar>(d(gen)), static_cast<uchar>(d(gen)));
  }
  return img;
}

std::vector<fs::path> write_class_tree(const fs::path& root, std::size_t per_class, int side) {
  std::vector<fs::path> out;
  for (std::size_t c = 0; c < kLabelNames.size(); ++c) {
    const auto dir = root / kLabelNames[c];
    fs::create_directories(dir);
    for (std::size_t k = 0; k < per_class; ++k) {
      const auto p = dir / ("img_" + std::to_string(k) + ".png");
      cv::imwrite(p.string(), class_image(c, k, side));
      out.push_back(p);
    }
  }
  return out;
}

std::string encode_png(const cv::Mat& image) {
  std::vector<uchar> buf;
  cv::imencode(".png", image, buf);
  return std::string(buf.begin(), buf.end());
}

}  // namespace testsupport
