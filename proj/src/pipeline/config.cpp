#include "pipeline/config.hpp"

#include <functional>
#include <sstream>

#include "common/digest.hpp"
#include "common/error.hpp"
#include "common/text.hpp"

namespace derm {
namespace {

using text::format_double;

struct Field {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

bool parse_bool(const std::string& v, const std::string& key) {
  const auto s = text::lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  fail(ErrorCode::kInvalidArgument, key + ": expected a boolean, got '" + v + "'");
}

std::size_t parse_count(const std::string& v, const std::string& key) {
  const auto n = text::parse_int(v, key);
  if (n < 0) fail(ErrorCode::kInvalidArgument, key + " must be >= 0");
  return static_cast<std::size_t>(n);
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

Field path_field(std::filesystem::path PipelinePaths::*member) {
  return {[member](const PipelineConfig& c) { return (c.paths.*member).generic_string(); },
          [member](PipelineConfig& c, const std::string& v) {
            if (v.empty()) fail(ErrorCode::kInvalidArgument, "path value must not be empty");
            c.paths.*member = v;
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"paths.corpus_dir", path_field(&PipelinePaths::corpus_dir)},
      {"paths.manifest", path_field(&PipelinePaths::manifest)},
      {"paths.checkpoint_dir", path_field(&PipelinePaths::checkpoint_dir)},
      {"paths.store_dir", path_field(&PipelinePaths::store_dir)},
      {"paths.runs_dir", path_field(&PipelinePaths::runs_dir)},
      {"paths.reports_dir", path_field(&PipelinePaths::reports_dir)},
      {"paths.augment_dir", path_field(&PipelinePaths::augment_dir)},
      {"paths.weights_dir", path_field(&PipelinePaths::weights_dir)},
      {"seed",
       {[](const PipelineConfig& c) { return std::to_string(c.seed); },
        [](PipelineConfig& c, const std::string& v) {
          const auto n = text::parse_int(v, "seed");
          if (n < 0) fail(ErrorCode::kInvalidArgument, "seed must be >= 0");
          c.seed = static_cast<std::uint64_t>(n);
          c.split.seed = c.augment.seed = c.train.seed = c.seed;
        }}},
      {"model.backbone",
       {[](const PipelineConfig& c) { return c.backbone; },
        [](PipelineConfig& c, const std::string& v) {
          if (!parse_backbone(v)) {
            fail(ErrorCode::kInvalidArgument, "unknown backbone '" + v + "' (expected one of " +
                                                  valid_backbone_names() + ")");
          }
          c.backbone = text::lower(v);
        }}},
      {"model.strategy",
       {[](const PipelineConfig& c) { return std::string(to_string(c.strategy)); },
        [](PipelineConfig& c, const std::string& v) {
          auto s = parse_strategy(v);
          if (!s) fail(ErrorCode::kInvalidArgument, "unknown strategy '" + v + "' (expected head_only or full)");
          c.strategy = *s;
        }}},
      {"model.init",
       {[](const PipelineConfig& c) { return std::string(c.init == WeightInit::kRandom ? "random" : "pretrained"); },
        [](PipelineConfig& c, const std::string& v) {
          const auto s = text::lower(v);
          if (s == "random") c.init = WeightInit::kRandom;
          else if (s == "pretrained") c.init = WeightInit::kPretrained;
          else fail(ErrorCode::kInvalidArgument, "model.init must be pretrained or random");
        }}},
      {"model.resize",
       {[](const PipelineConfig& c) { return std::to_string(c.preprocessing.resize_shorter); },
        [](PipelineConfig& c, const std::string& v) {
          c.preprocessing.resize_shorter = static_cast<int>(text::parse_int(v, "model.resize"));
        }}},
      {"model.crop",
       {[](const PipelineConfig& c) { return std::to_string(c.preprocessing.crop_side); },
        [](PipelineConfig& c, const std::string& v) {
          c.preprocessing.crop_side = static_cast<int>(text::parse_int(v, "model.crop"));
        }}},
      {"model.checkpoint",
       {[](const PipelineConfig& c) { return c.checkpoint ? c.checkpoint->generic_string() : std::string(); },
        [](PipelineConfig& c, const std::string& v) {
          if (v.empty()) c.checkpoint.reset();
          else c.checkpoint = v;
        }}},
      {"run.name",
       {[](const PipelineConfig& c) { return c.run_name; },
        [](PipelineConfig& c, const std::string& v) {
          if (v.find_first_of("/\\\t\n") != std::string::npos) {
            fail(ErrorCode::kInvalidArgument, "run.name must not contain path separators or whitespace controls");
          }
          c.run_name = v;
        }}},
      {"service.listen",
       {[](const PipelineConfig& c) { return c.listen; },
        [](PipelineConfig& c, const std::string& v) {
          PipelineConfig probe;
          probe.listen = v;
          probe.listen_address();
          c.listen = v;
        }}},
      {"split.train_fraction",
       {[](const PipelineConfig& c) { return format_double(c.split.train_fraction); },
        [](PipelineConfig& c, const std::string& v) { c.split.train_fraction = text::parse_double(v, "split.train_fraction"); }}},
      {"split.validation_fraction",
       {[](const PipelineConfig& c) { return format_double(c.split.validation_fraction); },
        [](PipelineConfig& c, const std::string& v) {
          c.split.validation_fraction = text::parse_double(v, "split.validation_fraction");
        }}},
      {"split.test_per_class",
       {[](const PipelineConfig& c) { return std::to_string(c.split.test_count_per_class); },
        [](PipelineConfig& c, const std::string& v) { c.split.test_count_per_class = parse_count(v, "split.test_per_class"); }}},
      {"augment.target_per_class",
       {[](const PipelineConfig& c) { return std::to_string(c.augment.target_per_class); },
        [](PipelineConfig& c, const std::string& v) {
          c.augment.target_per_class = parse_count(v, "augment.target_per_class");
        }}},
      {"augment.flip",
       {[](const PipelineConfig& c) { return bool_text(c.augment.ops.horizontal_flip); },
        [](PipelineConfig& c, const std::string& v) { c.augment.ops.horizontal_flip = parse_bool(v, "augment.flip"); }}},
      {"augment.rotation",
       {[](const PipelineConfig& c) { return bool_text(c.augment.ops.rotation); },
        [](PipelineConfig& c, const std::string& v) { c.augment.ops.rotation = parse_bool(v, "augment.rotation"); }}},
      {"augment.rotation_degrees",
       {[](const PipelineConfig& c) { return format_double(c.augment.ops.rotation_degrees); },
        [](PipelineConfig& c, const std::string& v) {
          c.augment.ops.rotation_degrees = text::parse_double(v, "augment.rotation_degrees");
        }}},
      {"augment.crop",
       {[](const PipelineConfig& c) { return bool_text(c.augment.ops.random_crop); },
        [](PipelineConfig& c, const std::string& v) { c.augment.ops.random_crop = parse_bool(v, "augment.crop"); }}},
      {"augment.crop_scale_min",
       {[](const PipelineConfig& c) { return format_double(c.augment.ops.crop_scale_min); },
        [](PipelineConfig& c, const std::string& v) {
          c.augment.ops.crop_scale_min = text::parse_double(v, "augment.crop_scale_min");
        }}},
      {"augment.crop_scale_max",
       {[](const PipelineConfig& c) { return format_double(c.augment.ops.crop_scale_max); },
        [](PipelineConfig& c, const std::string& v) {
          c.augment.ops.crop_scale_max = text::parse_double(v, "augment.crop_scale_max");
        }}},
      {"augment.brightness",
       {[](const PipelineConfig& c) { return bool_text(c.augment.ops.brightness_jitter); },
        [](PipelineConfig& c, const std::string& v) {
          c.augment.ops.brightness_jitter = parse_bool(v, "augment.brightness");
        }}},
      {"augment.brightness_range",
       {[](const PipelineConfig& c) { return format_double(c.augment.ops.brightness_range); },
        [](PipelineConfig& c, const std::string& v) {
          c.augment.ops.brightness_range = text::parse_double(v, "augment.brightness_range");
        }}},
      {"train.batch_size",
       {[](const PipelineConfig& c) { return std::to_string(c.train.batch_size); },
        [](PipelineConfig& c, const std::string& v) { c.train.batch_size = parse_count(v, "train.batch_size"); }}},
      {"train.learning_rate",
       {[](const PipelineConfig& c) { return format_double(c.train.learning_rate); },
        [](PipelineConfig& c, const std::string& v) { c.train.learning_rate = text::parse_double(v, "train.learning_rate"); }}},
      {"train.momentum",
       {[](const PipelineConfig& c) { return format_double(c.train.momentum); },
        [](PipelineConfig& c, const std::string& v) { c.train.momentum = text::parse_double(v, "train.momentum"); }}},
      {"train.lr_decay_factor",
       {[](const PipelineConfig& c) { return format_double(c.train.lr_decay.factor); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.lr_decay.factor = text::parse_double(v, "train.lr_decay_factor");
        }}},
      {"train.lr_decay_every",
       {[](const PipelineConfig& c) { return std::to_string(c.train.lr_decay.every_n_epochs); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.lr_decay.every_n_epochs = static_cast<int>(text::parse_int(v, "train.lr_decay_every"));
        }}},
      {"train.max_epochs",
       {[](const PipelineConfig& c) { return std::to_string(c.train.max_epochs); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.max_epochs = static_cast<int>(text::parse_int(v, "train.max_epochs"));
        }}},
      {"train.patience",
       {[](const PipelineConfig& c) { return std::to_string(c.train.early_stop_patience); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.early_stop_patience = static_cast<int>(text::parse_int(v, "train.patience"));
        }}},
      {"train.k_folds",
       {[](const PipelineConfig& c) { return std::to_string(c.train.k_folds); },
        [](PipelineConfig& c, const std::string& v) { c.train.k_folds = parse_count(v, "train.k_folds"); }}},
      {"train.threads",
       {[](const PipelineConfig& c) { return std::to_string(c.train.threads); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.threads = static_cast<int>(text::parse_int(v, "train.threads"));
        }}},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  it->second.set(*this, value);
}

std::string PipelineConfig::get(const std::string& key) const {
  auto it = fields().find(key);
  if (it == fields().end()) fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  return it->second.get(*this);
}

void PipelineConfig::validate() const {
  split.validate();
  augment.validate();
  train.validate();
  preprocessing.validate();
  if (!parse_backbone(backbone)) fail(ErrorCode::kInvalidArgument, "unknown backbone '" + backbone + "'");
  listen_address();
  for (const auto* p : {&paths.corpus_dir, &paths.manifest, &paths.checkpoint_dir, &paths.store_dir,
                        &paths.runs_dir, &paths.reports_dir, &paths.augment_dir}) {
    // A directory that does not exist yet must at least have a usable ancestor.
    auto probe = std::filesystem::absolute(*p);
    while (!probe.empty() && !std::filesystem::exists(probe) && probe != probe.parent_path()) {
      probe = probe.parent_path();
    }
    if (std::filesystem::exists(probe) && !std::filesystem::is_directory(probe) && probe != std::filesystem::absolute(*p)) {
      fail(ErrorCode::kInvalidArgument, "path " + p->string() + " lies under a non-directory " + probe.string());
    }
  }
}

std::string PipelineConfig::canonical_text() const {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(*this) + "\n";
  return out;
}

std::string PipelineConfig::digest() const { return sha256_hex(canonical_text()).substr(0, 16); }

std::string PipelineConfig::effective_run_name(bool cross_validation) const {
  if (!run_name.empty()) return run_name;
  auto name = backbone + "-" + text::lower(to_string(strategy));
  if (cross_validation) name += "-cv";
  return name;
}

BuildOptions PipelineConfig::build_options() const {
  BuildOptions o;
  o.init = init;
  o.weights_dir = paths.weights_dir;
  o.seed = seed;
  o.preprocessing = preprocessing;
  return o;
}

std::pair<std::string, int> PipelineConfig::listen_address() const {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    fail(ErrorCode::kInvalidArgument, "service.listen must be host:port, got '" + listen + "'");
  }
  const auto port = text::parse_int(listen.substr(colon + 1), "service.listen port");
  if (port < 0 || port > 65535) fail(ErrorCode::kInvalidArgument, "service.listen port out of range");
  return {listen.substr(0, colon), static_cast<int>(port)};
}

PipelineConfig parse_pipeline_config(const std::string& text, PipelineConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kInvalidArgument, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      base.set(text::trim(t.substr(0, eq)), text::trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorCode::kInvalidArgument, "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kNotFound, "config file not found: " + path.string());
  return parse_pipeline_config(text::read_file(path), std::move(base));
}

}  // namespace derm
