#include "modelzoo/model_handle.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/imgproc.hpp>

#include "common/error.hpp"
#include "common/text.hpp"

namespace fs = std::filesystem;

namespace derm {

std::string_view to_string(TuningStrategy strategy) {
  return strategy == TuningStrategy::kHeadOnly ? "HEAD_ONLY" : "FULL";
}

std::optional<TuningStrategy> parse_strategy(std::string_view s) {
  const auto v = text::lower(s);
  if (v == "head_only" || v == "head-only" || v == "head") return TuningStrategy::kHeadOnly;
  if (v == "full") return TuningStrategy::kFull;
  return std::nullopt;
}

void Preprocessing::validate() const {
  if (crop_side <= 0 || resize_shorter < crop_side) {
    fail(ErrorCode::kInvalidArgument, "preprocessing requires 0 < crop_side <= resize_shorter");
  }
  for (float s : stddev) {
    if (!(s > 0.0f)) fail(ErrorCode::kInvalidArgument, "normalisation stddev must be positive");
  }
}

torch::Tensor Preprocessing::to_tensor(const cv::Mat& bgr, bool training, SeededRng* rng) const {
  if (bgr.empty() || bgr.type() != CV_8UC3) {
    fail(ErrorCode::kInvalidArgument, "preprocessing expects a non-empty 8-bit 3-channel image");
  }
  const double scale = static_cast<double>(resize_shorter) / std::min(bgr.cols, bgr.rows);
  const int w = std::max(crop_side, static_cast<int>(std::lround(bgr.cols * scale)));
  const int h = std::max(crop_side, static_cast<int>(std::lround(bgr.rows * scale)));
  cv::Mat resized;
  cv::resize(bgr, resized, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);

  int x = (w - crop_side) / 2;
  int y = (h - crop_side) / 2;
  if (training) {
    if (!rng) fail(ErrorCode::kInvalidArgument, "random crop requires a generator");
    x = static_cast<int>(rng->below(static_cast<std::uint64_t>(w - crop_side + 1)));
    y = static_cast<int>(rng->below(static_cast<std::uint64_t>(h - crop_side + 1)));
  }
  cv::Mat rgb;
  cv::cvtColor(resized(cv::Rect(x, y, crop_side, crop_side)), rgb, cv::COLOR_BGR2RGB);

  auto t = torch::from_blob(rgb.data, {crop_side, crop_side, 3}, torch::kUInt8)
               .permute({2, 0, 1})
               .to(torch::kFloat32)
               .div_(255.0);
  const auto mean_t = torch::tensor({mean[0], mean[1], mean[2]}).view({3, 1, 1});
  const auto std_t = torch::tensor({stddev[0], stddev[1], stddev[2]}).view({3, 1, 1});
  return ((t - mean_t) / std_t).contiguous();
}

fs::path pretrained_weights_path(const fs::path& weights_dir, BackboneName name) {
  return weights_dir / (text::lower(backbone_spec(name).display_name) + ".pretrained.pt");
}

namespace {

bool is_head_param(std::string_view head, const std::string& name) {
  return name.size() > head.size() && name.compare(0, head.size(), head) == 0 && name[head.size()] == '.';
}

// Reads a plain `{name: tensor}` dict written by torch.save (see
// tools/export_pretrained.py) and copies every non-head entry.
void load_pretrained(ClassifierNetImpl& net, const fs::path& file, BackboneName name) {
  std::ifstream in(file, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::map<std::string, torch::Tensor> source;
  try {
    const auto dict = torch::pickle_load(bytes).toGenericDict();
    for (const auto& kv : dict) source.emplace(kv.key().toStringRef(), kv.value().toTensor());
  } catch (const c10::Error&) {
    fail(ErrorCode::kCorrupt, "cannot read pretrained weights " + file.string() +
                                  ": expected a plain dict of tensors saved with torch.save");
  }

  torch::NoGradGuard no_grad;
  const auto head = std::string(net.head_name());
  auto copy_into = [&](const std::string& key, torch::Tensor& dst) {
    if (is_head_param(head, key)) return;
    auto it = source.find(key);
    if (it == source.end()) {
      fail(ErrorCode::kCorrupt, file.string() + " lacks '" + key + "' for " +
                                    std::string(backbone_spec(name).display_name));
    }
    if (it->second.sizes() != dst.sizes()) {
      fail(ErrorCode::kCorrupt, file.string() + ": shape mismatch for '" + key + "'");
    }
    dst.copy_(it->second.to(dst.dtype()));
  };
  for (auto& p : net.named_parameters()) copy_into(p.key(), p.value());
  for (auto& b : net.named_buffers()) copy_into(b.key(), b.value());
}

void init_head(torch::nn::Linear& head, std::int64_t feature_dim, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  auto gen = at::make_generator<at::CPUGeneratorImpl>(SeededRng::mix(seed, 0x4EAD));
  head->weight.uniform_(-bound, bound, gen);
  head->bias.zero_();
}

}  // namespace

ModelHandle ModelHandle::blank(BackboneName name, std::int64_t num_classes, TuningStrategy strategy,
                               const Preprocessing& preprocessing) {
  if (num_classes <= 0) fail(ErrorCode::kInvalidArgument, "num_classes must be positive");
  preprocessing.validate();
  ModelHandle h;
  h.net_ = make_network(name, num_classes);
  h.name_ = name;
  h.num_classes_ = num_classes;
  h.preprocessing_ = preprocessing;
  h.set_strategy(strategy);
  h.net_->eval();
  return h;
}

ModelHandle ModelHandle::build(std::string_view backbone_name, std::int64_t num_classes, TuningStrategy strategy,
                               const BuildOptions& options) {
  const auto name = parse_backbone(backbone_name);
  if (!name) {
    fail(ErrorCode::kInvalidArgument,
         "unknown backbone '" + std::string(backbone_name) + "'; valid names: " + valid_backbone_names());
  }
  const auto weights = pretrained_weights_path(options.weights_dir, *name);
  if (options.init == WeightInit::kPretrained && !fs::exists(weights)) {
    fail(ErrorCode::kUnavailable,
         "pretrained weights unavailable for " + std::string(backbone_spec(*name).display_name) + ": expected " +
             weights.string() + "; create it with `python3 tools/export_pretrained.py --backbone " +
             text::lower(backbone_spec(*name).display_name) + " --out " + options.weights_dir.string() +
             "` (needs torchvision and network access)");
  }

  torch::manual_seed(options.seed);
  ModelHandle h = blank(*name, num_classes, strategy, options.preprocessing);
  if (options.init == WeightInit::kPretrained) {
    load_pretrained(*h.net_, weights, *name);
    h.pretrained_source_ = std::string(backbone_spec(*name).pretrained_source);
  } else {
    h.pretrained_source_ = "random (seed " + std::to_string(options.seed) + ")";
  }
  init_head(h.net_->head(), backbone_spec(*name).feature_dim, options.seed);
  return h;
}

const BackboneSpec& ModelHandle::backbone() const {
  require_initialized();
  return backbone_spec(name_);
}

void ModelHandle::require_initialized() const {
  if (!net_) fail(ErrorCode::kInvalidArgument, "model handle is not initialised");
}

ClassifierNetImpl& ModelHandle::network() {
  require_initialized();
  return *net_;
}

const ClassifierNetImpl& ModelHandle::network() const {
  require_initialized();
  return *net_;
}

void ModelHandle::set_strategy(TuningStrategy strategy) {
  require_initialized();
  strategy_ = strategy;
  const auto head = std::string(net_->head_name());
  for (auto& p : net_->named_parameters()) {
    p.value().set_requires_grad(strategy == TuningStrategy::kFull || is_head_param(head, p.key()));
  }
}

std::vector<torch::Tensor> ModelHandle::trainable_parameters() const {
  require_initialized();
  std::vector<torch::Tensor> out;
  for (const auto& p : net_->parameters()) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::string, torch::Tensor>> ModelHandle::backbone_parameters() const {
  require_initialized();
  std::vector<std::pair<std::string, torch::Tensor>> out;
  const auto head = std::string(net_->head_name());
  for (const auto& p : net_->named_parameters()) {
    if (!is_head_param(head, p.key())) out.emplace_back(p.key(), p.value());
  }
  return out;
}

ParameterReport ModelHandle::parameter_report() const {
  require_initialized();
  ParameterReport r;
  for (const auto& p : net_->named_parameters()) {
    const bool trainable = p.value().requires_grad();
    r.layers.push_back({p.key(), p.value().numel(), trainable});
    (trainable ? r.trainable_count : r.frozen_count) += p.value().numel();
  }
  return r;
}

void ModelHandle::set_training(bool training) {
  require_initialized();
  if (strategy_ == TuningStrategy::kHeadOnly) {
    net_->eval();
    net_->head()->train(training);
  } else {
    net_->train(training);
  }
}

torch::Tensor ModelHandle::logits(const torch::Tensor& batch) {
  require_initialized();
  if (strategy_ == TuningStrategy::kHeadOnly) {
    torch::Tensor feats;
    {
      torch::NoGradGuard no_grad;
      feats = net_->features(batch);
    }
    return net_->head()(feats);
  }
  return net_->forward(batch);
}

torch::Tensor ModelHandle::input_tensor(const cv::Mat& bgr, bool training, SeededRng* rng) const {
  return preprocessing_.to_tensor(bgr, training, rng);
}

ScoreVector ModelHandle::predict_scores(const cv::Mat& bgr_image) {
  require_initialized();
  if (num_classes_ != static_cast<std::int64_t>(kNumLabels)) {
    fail(ErrorCode::kInvalidArgument, "score vectors require a 9-way head");
  }
  torch::NoGradGuard no_grad;
  const bool was_training = net_->is_training();
  net_->eval();
  auto out = net_->forward(input_tensor(bgr_image, false, nullptr).unsqueeze(0))
                 .to(torch::kFloat64)
                 .contiguous();
  if (was_training) set_training(true);
  return ScoreVector::from_logits(std::span<const double>(out.data_ptr<double>(), kNumLabels));
}

void ModelHandle::zero_head() {
  require_initialized();
  torch::NoGradGuard no_grad;
  net_->head()->weight.zero_();
  net_->head()->bias.zero_();
}

void ModelHandle::copy_weights_from(const ModelHandle& other) {
  require_initialized();
  other.require_initialized();
  if (other.name_ != name_ || other.num_classes_ != num_classes_) {
    fail(ErrorCode::kBackboneMismatch, "cannot copy weights between different architectures");
  }
  torch::NoGradGuard no_grad;
  auto src_params = other.net_->named_parameters();
  for (auto& p : net_->named_parameters()) p.value().copy_(src_params[p.key()]);
  auto src_buffers = other.net_->named_buffers();
  for (auto& b : net_->named_buffers()) b.value().copy_(src_buffers[b.key()]);
}

ModelHandle ModelHandle::clone() const {
  require_initialized();
  ModelHandle h = blank(name_, num_classes_, strategy_, preprocessing_);
  h.copy_weights_from(*this);
  h.pretrained_source_ = pretrained_source_;
  h.digest_ = digest_;
  if (net_->is_training()) h.set_training(true);
  return h;
}

}  // namespace derm
