#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <opencv2/imgproc.hpp>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "common/text.hpp"
#include "corpus/corpus.hpp"
#include "corpus/image_io.hpp"

namespace fs = std::filesystem;

namespace derm {

void AugmentationPlan::validate() const {
  if (target_per_class == 0) fail(ErrorCode::kInvalidArgument, "target_per_class must be > 0");
  if (ops.rotation && !(ops.rotation_degrees >= 0.0 && ops.rotation_degrees <= 180.0)) {
    fail(ErrorCode::kInvalidArgument, "rotation range must lie in [0, 180] degrees");
  }
  if (ops.random_crop &&
      !(ops.crop_scale_min > 0.0 && ops.crop_scale_min <= ops.crop_scale_max && ops.crop_scale_max <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "crop scale range must satisfy 0 < min <= max <= 1");
  }
  if (ops.brightness_jitter && !(ops.brightness_range >= 0.0 && ops.brightness_range < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "brightness range must lie in [0, 1)");
  }
}

std::string AugmentTransform::to_string() const {
  return "flip=" + std::string(flip ? "1" : "0") + ";rot=" + text::format_double(rotation_degrees) +
         ";scale=" + text::format_double(crop_scale) + ";cx=" + text::format_double(crop_x) +
         ";cy=" + text::format_double(crop_y) + ";bright=" + text::format_double(brightness);
}

AugmentTransform AugmentTransform::parse(const std::string& s) {
  AugmentTransform t;
  for (const auto& part : text::split(s, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kCorrupt, "bad transform: " + s);
    const auto key = part.substr(0, eq);
    const auto value = part.substr(eq + 1);
    if (key == "flip") t.flip = value == "1";
    else if (key == "rot") t.rotation_degrees = text::parse_double(value, "rot");
    else if (key == "scale") t.crop_scale = text::parse_double(value, "scale");
    else if (key == "cx") t.crop_x = text::parse_double(value, "cx");
    else if (key == "cy") t.crop_y = text::parse_double(value, "cy");
    else if (key == "bright") t.brightness = text::parse_double(value, "bright");
    else fail(ErrorCode::kCorrupt, "unknown transform key: " + key);
  }
  return t;
}

// Draw order is fixed regardless of which ops are enabled so toggling one op
// does not reshuffle the others.
AugmentTransform sample_transform(const AugmentationOps& ops, SeededRng& rng) {
  AugmentTransform t;
  const double flip = rng.unit();
  const double rot = rng.uniform(-1.0, 1.0);
  const double scale = rng.unit();
  const double cx = rng.unit();
  const double cy = rng.unit();
  const double bright = rng.uniform(-1.0, 1.0);
  if (ops.horizontal_flip) t.flip = flip < 0.5;
  if (ops.rotation) t.rotation_degrees = rot * ops.rotation_degrees;
  if (ops.random_crop) {
    t.crop_scale = ops.crop_scale_min + (ops.crop_scale_max - ops.crop_scale_min) * scale;
    t.crop_x = cx;
    t.crop_y = cy;
  }
  if (ops.brightness_jitter) t.brightness = 1.0 + bright * ops.brightness_range;
  return t;
}

cv::Mat apply_transform(const cv::Mat& image, const AugmentTransform& t) {
  cv::Mat out = image.clone();
  if (t.flip) cv::flip(out, out, 1);
  if (t.rotation_degrees != 0.0) {
    const cv::Point2f centre(static_cast<float>(out.cols) / 2.0f, static_cast<float>(out.rows) / 2.0f);
    const cv::Mat rotation = cv::getRotationMatrix2D(centre, t.rotation_degrees, 1.0);
    cv::Mat rotated;
    cv::warpAffine(out, rotated, rotation, out.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
    out = rotated;
  }
  if (t.crop_scale < 1.0) {
    const int w = std::max(1, static_cast<int>(std::lround(out.cols * t.crop_scale)));
    const int h = std::max(1, static_cast<int>(std::lround(out.rows * t.crop_scale)));
    const int x = static_cast<int>(std::floor((out.cols - w) * std::clamp(t.crop_x, 0.0, 1.0)));
    const int y = static_cast<int>(std::floor((out.rows - h) * std::clamp(t.crop_y, 0.0, 1.0)));
    cv::Mat resized;
    cv::resize(out(cv::Rect(x, y, w, h)), resized, image.size(), 0, 0, cv::INTER_LINEAR);
    out = resized;
  }
  if (t.brightness != 1.0) out.convertTo(out, -1, t.brightness, 0.0);
  return out;
}

std::size_t AugmentReport::total_added() const {
  std::size_t n = 0;
  for (auto a : added) n += a;
  return n;
}

DatasetManifest augment_to_target(const DatasetManifest& manifest, const AugmentationPlan& plan,
                                  AugmentReport* report) {
  plan.validate();
  for (const auto& r : manifest.records) {
    if (r.split == Split::kUnassigned) {
      fail(ErrorCode::kInvalidArgument, "record " + r.id + " is UNASSIGNED; run the split before augmenting");
    }
  }
  DatasetManifest out = manifest;
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> paths;
  for (const auto& r : manifest.records) {
    ids.insert(r.id);
    paths.insert(r.path);
  }
  AugmentReport local;

  for (auto label : kAllLabels) {
    std::size_t train_count = 0;
    std::vector<const ImageRecord*> sources;
    for (const auto& r : manifest.records) {
      if (r.label != label || r.split != Split::kTrain) continue;
      ++train_count;
      if (r.origin == Origin::kOriginal) sources.push_back(&r);
    }
    if (train_count >= plan.target_per_class) continue;
    if (sources.empty()) {
      fail(ErrorCode::kInvalidArgument,
           "class " + std::string(to_string(label)) + " has no ORIGINAL TRAIN records to augment from");
    }
    std::sort(sources.begin(), sources.end(),
              [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });
    SeededRng rng(plan.seed, 0xA06'0000ULL + index_of(label));
    rng.shuffle(std::span(sources));

    const auto needed = plan.target_per_class - train_count;
    std::size_t serial = 0;
    for (std::size_t i = 0; i < needed; ++i) {
      const ImageRecord& src = *sources[i % sources.size()];
      const auto transform = sample_transform(plan.ops, rng);

      const fs::path src_path(src.path);
      std::string id;
      fs::path path;
      do {
        const auto tag = "__aug" + std::to_string(serial++);
        id = src.id + "#" + tag.substr(2);
        const fs::path dir = plan.output_dir ? *plan.output_dir / std::string(to_string(label)) : src_path.parent_path();
        path = dir / (src_path.stem().string() + tag + ".png");
      } while (ids.contains(id) || paths.contains(path.generic_string()));

      write_image(path, apply_transform(decode_image_file(src_path), transform));

      ImageRecord rec;
      rec.id = id;
      rec.path = path.generic_string();
      rec.label = label;
      rec.origin = Origin::kAugmented;
      rec.source_id = src.id;
      rec.split = Split::kTrain;
      rec.transform = transform.to_string();
      ids.insert(rec.id);
      paths.insert(rec.path);
      out.records.push_back(std::move(rec));
      ++local.added[index_of(label)];
    }
  }
  if (report) *report = local;
  return out;
}

}  // namespace derm
