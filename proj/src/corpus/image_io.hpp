#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include <opencv2/core.hpp>

namespace derm {

bool has_image_extension(const std::filesystem::path& path);

// 3-channel 8-bit BGR. Grey and alpha inputs are converted. Throws kCorrupt
// when the data cannot be decoded and kNotFound for a missing file.
cv::Mat decode_image_file(const std::filesystem::path& path);
cv::Mat decode_image_bytes(std::span<const std::uint8_t> bytes);

void write_image(const std::filesystem::path& path, const cv::Mat& image);

}  // namespace derm
