#include "modelzoo/checkpoint.hpp"

#include <cmath>
#include <sstream>

#include "common/digest.hpp"
#include "common/error.hpp"
#include "common/text.hpp"

namespace fs = std::filesystem;

namespace derm {
namespace {

std::string format_metric(double v) { return std::isnan(v) ? "nan" : text::format_double(v); }

double parse_metric(const std::string& v, std::string_view what) {
  return v == "nan" ? std::numeric_limits<double>::quiet_NaN() : text::parse_double(v, what);
}

}  // namespace

std::string CheckpointMetadata::serialize() const {
  std::ostringstream out;
  out << "# dermclass checkpoint metadata\n"
      << "format_version=" << format_version << '\n'
      << "backbone=" << backbone << '\n'
      << "strategy=" << to_string(strategy) << '\n'
      << "num_classes=" << num_classes << '\n'
      << "label_order=" << label_order << '\n'
      << "config_digest=" << config_digest << '\n'
      << "best_val_loss=" << format_metric(best_val_loss) << '\n'
      << "best_val_accuracy=" << format_metric(best_val_accuracy) << '\n'
      << "best_epoch=" << best_epoch << '\n'
      << "created_at=" << created_at << '\n'
      << "pretrained_source=" << pretrained_source << '\n'
      << "resize_shorter=" << preprocessing.resize_shorter << '\n'
      << "crop_side=" << preprocessing.crop_side << '\n'
      << "mean=" << text::format_double(preprocessing.mean[0]) << ',' << text::format_double(preprocessing.mean[1])
      << ',' << text::format_double(preprocessing.mean[2]) << '\n'
      << "stddev=" << text::format_double(preprocessing.stddev[0]) << ','
      << text::format_double(preprocessing.stddev[1]) << ',' << text::format_double(preprocessing.stddev[2]) << '\n'
      << "weights_sha256=" << weights_sha256 << '\n';
  return out.str();
}

CheckpointMetadata CheckpointMetadata::parse(const std::string& content) {
  std::map<std::string, std::string> kv;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kCorrupt, "checkpoint metadata: malformed line '" + t + "'");
    kv[t.substr(0, eq)] = t.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) fail(ErrorCode::kCorrupt, "checkpoint metadata: missing '" + key + "'");
    return it->second;
  };
  auto triple = [&](const std::string& key) {
    const auto parts = text::split(get(key), ',');
    if (parts.size() != 3) fail(ErrorCode::kCorrupt, "checkpoint metadata: '" + key + "' needs 3 values");
    std::array<float, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) out[i] = static_cast<float>(text::parse_double(parts[i], key));
    return out;
  };

  CheckpointMetadata m;
  try {
    m.format_version = static_cast<int>(text::parse_int(get("format_version"), "format_version"));
    if (m.format_version != kCheckpointFormatVersion) {
      fail(ErrorCode::kCorrupt, "unsupported checkpoint format_version " + std::to_string(m.format_version));
    }
    m.backbone = get("backbone");
    auto strategy = parse_strategy(get("strategy"));
    if (!strategy) fail(ErrorCode::kCorrupt, "checkpoint metadata: bad strategy");
    m.strategy = *strategy;
    m.num_classes = text::parse_int(get("num_classes"), "num_classes");
    m.label_order = get("label_order");
    m.config_digest = get("config_digest");
    m.best_val_loss = parse_metric(get("best_val_loss"), "best_val_loss");
    m.best_val_accuracy = parse_metric(get("best_val_accuracy"), "best_val_accuracy");
    m.best_epoch = static_cast<int>(text::parse_int(get("best_epoch"), "best_epoch"));
    m.created_at = get("created_at");
    m.pretrained_source = get("pretrained_source");
    m.preprocessing.resize_shorter = static_cast<int>(text::parse_int(get("resize_shorter"), "resize_shorter"));
    m.preprocessing.crop_side = static_cast<int>(text::parse_int(get("crop_side"), "crop_side"));
    m.preprocessing.mean = triple("mean");
    m.preprocessing.stddev = triple("stddev");
    m.weights_sha256 = get("weights_sha256");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorrupt) throw;
    fail(ErrorCode::kCorrupt, std::string("checkpoint metadata: ") + e.what());
  }
  return m;
}

CheckpointPaths CheckpointPaths::from(const fs::path& any) {
  fs::path stem = any;
  const auto ext = any.extension().string();
  if (ext == ".weights" || ext == ".meta") stem.replace_extension();
  CheckpointPaths p;
  p.weights = stem;
  p.weights += ".weights";
  p.meta = stem;
  p.meta += ".meta";
  return p;
}

CheckpointMetadata save_checkpoint(const ModelHandle& handle, CheckpointMetadata metadata, const fs::path& path) {
  const auto paths = CheckpointPaths::from(path);
  if (paths.weights.has_parent_path()) fs::create_directories(paths.weights.parent_path());

  torch::serialize::OutputArchive archive;
  handle.network_ptr()->save(archive);
  auto tmp = paths.weights;
  tmp += ".tmp";
  try {
    archive.save_to(tmp.string());
  } catch (const c10::Error& e) {
    fail(ErrorCode::kIo, "cannot write checkpoint weights " + paths.weights.string());
  }
  fs::rename(tmp, paths.weights);

  metadata.backbone = std::string(handle.backbone().display_name);
  metadata.strategy = handle.strategy();
  metadata.num_classes = handle.num_classes();
  metadata.label_order = canonical_label_order();
  metadata.preprocessing = handle.preprocessing();
  metadata.pretrained_source = handle.pretrained_source();
  if (metadata.created_at.empty()) metadata.created_at = text::utc_timestamp();
  metadata.weights_sha256 = sha256_file_hex(paths.weights);
  text::write_file_atomic(paths.meta, metadata.serialize());
  return metadata;
}

CheckpointMetadata read_checkpoint_metadata(const fs::path& path) {
  const auto paths = CheckpointPaths::from(path);
  if (!fs::exists(paths.meta) || !fs::exists(paths.weights)) {
    fail(ErrorCode::kNotFound, "checkpoint not found: " + path.string());
  }
  return CheckpointMetadata::parse(text::read_file(paths.meta));
}

LoadedCheckpoint load_checkpoint(const fs::path& path, std::optional<BackboneName> expected_backbone) {
  const auto paths = CheckpointPaths::from(path);
  auto meta = read_checkpoint_metadata(path);

  if (meta.label_order != canonical_label_order()) {
    fail(ErrorCode::kLabelOrderMismatch, "checkpoint label order '" + meta.label_order +
                                             "' differs from canonical '" + canonical_label_order() + "'");
  }
  const auto name = parse_backbone(meta.backbone);
  if (!name) fail(ErrorCode::kCorrupt, "checkpoint names unknown backbone '" + meta.backbone + "'");
  if (expected_backbone && *expected_backbone != *name) {
    fail(ErrorCode::kBackboneMismatch, "backbone mismatch: checkpoint holds " + meta.backbone + ", requested " +
                                           std::string(backbone_spec(*expected_backbone).display_name));
  }
  if (sha256_file_hex(paths.weights) != meta.weights_sha256) {
    fail(ErrorCode::kCorrupt, "checkpoint weights do not match their recorded digest: " + paths.weights.string());
  }

  auto handle = ModelHandle::blank(*name, meta.num_classes, meta.strategy, meta.preprocessing);
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(paths.weights.string());
    handle.network_ptr()->load(archive);
  } catch (const c10::Error& e) {
    fail(ErrorCode::kCorrupt, "cannot read checkpoint weights " + paths.weights.string());
  }
  handle.set_strategy(meta.strategy);
  handle.network().eval();
  handle.set_digest(meta.digest());
  handle.set_pretrained_source(meta.pretrained_source);
  return {std::move(handle), std::move(meta)};
}

}  // namespace derm
