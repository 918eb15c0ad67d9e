#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

namespace testsupport {

// Canonical label names, spelled out independently of the library.
inline const std::array<std::string, 9> kLabelNames = {"Acne",       "Alopecia",         "Crust",
                                                       "Erythema",   "Leukoderma",       "PigmentedMaculae",
                                                       "Pustule",    "Ulcer",            "Wheal"};

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "dermclass");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// A solid per-class colour with a per-class stripe pattern; `variant` adds
// a little deterministic noise so images within a class differ.
cv::Mat class_image(std::size_t label_index, std::size_t variant, int side = 64);

// Random colour noise, seeded.
cv::Mat noise_image(unsigned seed, int side = 64);

// `<root>/<Label>/img_<k>.png`, `per_class` images per label. Returns the
// written paths.
std::vector<std::filesystem::path> write_class_tree(const std::filesystem::path& root, std::size_t per_class,
                                                    int side = 64);

std::string encode_png(const cv::Mat& image);

}  // namespace testsupport
