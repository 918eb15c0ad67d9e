#include "modelzoo/backbones.hpp"

#include <algorithm>
#include <cctype>

#include "common/error.hpp"

namespace nn = torch::nn;

namespace derm {

const std::array<BackboneSpec, 4>& backbone_specs() {
  static const std::array<BackboneSpec, 4> kSpecs = {{
      {BackboneName::kResNet18, "ResNet18", 224, 512, "ImageNet-1k (torchvision IMAGENET1K_V1)"},
      {BackboneName::kResNet50, "ResNet50", 224, 2048, "ImageNet-1k (torchvision IMAGENET1K_V1)"},
      {BackboneName::kResNet152, "ResNet152", 224, 2048, "ImageNet-1k (torchvision IMAGENET1K_V1)"},
      {BackboneName::kDenseNet161, "DenseNet161", 224, 2208, "ImageNet-1k (torchvision IMAGENET1K_V1)"},
  }};
  return kSpecs;
}

const BackboneSpec& backbone_spec(BackboneName name) {
  for (const auto& s : backbone_specs()) {
    if (s.name == name) return s;
  }
  fail(ErrorCode::kInternal, "backbone spec missing");
}

std::optional<BackboneName> parse_backbone(std::string_view name) {
  auto fold = [](std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
  };
  const auto wanted = fold(name);
  for (const auto& s : backbone_specs()) {
    if (fold(s.display_name) == wanted) return s.name;
  }
  return std::nullopt;
}

std::string valid_backbone_names() {
  std::string out;
  for (const auto& s : backbone_specs()) {
    if (!out.empty()) out += ", ";
    out += s.display_name;
  }
  return out;
}

namespace {

nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride = 1,
                std::int64_t padding = 0) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(false));
}

nn::BatchNorm2d batch_norm(std::int64_t channels) { return nn::BatchNorm2d(nn::BatchNorm2dOptions(channels)); }

nn::Sequential downsample_for(std::int64_t in, std::int64_t out, std::int64_t stride) {
  if (stride == 1 && in == out) return nullptr;
  nn::Sequential seq;
  seq->push_back(conv(in, out, 1, stride));
  seq->push_back(batch_norm(out));
  return seq;
}

// ---------------------------------------------------------------- ResNet

struct BasicBlockImpl : nn::Module {
  static constexpr std::int64_t kExpansion = 1;

  BasicBlockImpl(std::int64_t in, std::int64_t planes, std::int64_t stride)
      : conv1(register_module("conv1", conv(in, planes, 3, stride, 1))),
        bn1(register_module("bn1", batch_norm(planes))),
        conv2(register_module("conv2", conv(planes, planes, 3, 1, 1))),
        bn2(register_module("bn2", batch_norm(planes))),
        downsample(downsample_for(in, planes * kExpansion, stride)) {
    if (downsample) register_module("downsample", downsample);
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto out = torch::relu(bn1(conv1(x)));
    out = bn2(conv2(out));
    return torch::relu(out + (downsample ? downsample->forward(x) : x));
  }

  nn::Conv2d conv1;
  nn::BatchNorm2d bn1;
  nn::Conv2d conv2;
  nn::BatchNorm2d bn2;
  nn::Sequential downsample;
};

struct BottleneckImpl : nn::Module {
  static constexpr std::int64_t kExpansion = 4;

  BottleneckImpl(std::int64_t in, std::int64_t planes, std::int64_t stride)
      : conv1(register_module("conv1", conv(in, planes, 1))),
        bn1(register_module("bn1", batch_norm(planes))),
        conv2(register_module("conv2", conv(planes, planes, 3, stride, 1))),
        bn2(register_module("bn2", batch_norm(planes))),
        conv3(register_module("conv3", conv(planes, planes * kExpansion, 1))),
        bn3(register_module("bn3", batch_norm(planes * kExpansion))),
        downsample(downsample_for(in, planes * kExpansion, stride)) {
    if (downsample) register_module("downsample", downsample);
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto out = torch::relu(bn1(conv1(x)));
    out = torch::relu(bn2(conv2(out)));
    out = bn3(conv3(out));
    return torch::relu(out + (downsample ? downsample->forward(x) : x));
  }

  nn::Conv2d conv1;
  nn::BatchNorm2d bn1;
  nn::Conv2d conv2;
  nn::BatchNorm2d bn2;
  nn::Conv2d conv3;
  nn::BatchNorm2d bn3;
  nn::Sequential downsample;
};

template <typename BlockImpl>
class ResNetImpl : public ClassifierNetImpl {
 public:
  ResNetImpl(std::array<int, 4> layers, std::int64_t num_classes)
      : conv1_(register_module("conv1", conv(3, 64, 7, 2, 3))),
        bn1_(register_module("bn1", batch_norm(64))) {
    std::int64_t in = 64;
    const std::array<std::int64_t, 4> planes = {64, 128, 256, 512};
    for (std::size_t i = 0; i < 4; ++i) {
      nn::Sequential stage;
      for (int b = 0; b < layers[i]; ++b) {
        const std::int64_t stride = (i > 0 && b == 0) ? 2 : 1;
        stage->push_back(std::make_shared<BlockImpl>(in, planes[i], stride));
        in = planes[i] * BlockImpl::kExpansion;
      }
      stages_[i] = register_module("layer" + std::to_string(i + 1), stage);
    }
    fc_ = register_module("fc", nn::Linear(in, num_classes));

    for (auto& m : modules(/*include_self=*/false)) {
      if (auto* c = m->as<nn::Conv2d>()) {
        nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
      } else if (auto* b = m->as<nn::BatchNorm2d>()) {
        nn::init::ones_(b->weight);
        nn::init::zeros_(b->bias);
      }
    }
  }

  torch::Tensor features(const torch::Tensor& x) override {
    auto out = torch::relu(bn1_(conv1_(x)));
    out = torch::max_pool2d(out, 3, 2, 1);
    for (auto& stage : stages_) out = stage->forward(out);
    return torch::adaptive_avg_pool2d(out, {1, 1}).flatten(1);
  }

  nn::Linear& head() override { return fc_; }
  std::string_view head_name() const override { return "fc"; }

 private:
  nn::Conv2d conv1_;
  nn::BatchNorm2d bn1_;
  std::array<nn::Sequential, 4> stages_;
  nn::Linear fc_{nullptr};
};

// -------------------------------------------------------------- DenseNet

struct DenseLayerImpl : nn::Module {
  DenseLayerImpl(std::int64_t in, std::int64_t growth, std::int64_t bn_size)
      : norm1(register_module("norm1", batch_norm(in))),
        conv1(register_module("conv1", conv(in, bn_size * growth, 1))),
        norm2(register_module("norm2", batch_norm(bn_size * growth))),
        conv2(register_module("conv2", conv(bn_size * growth, growth, 3, 1, 1))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    auto out = conv1(torch::relu(norm1(x)));
    return conv2(torch::relu(norm2(out)));
  }

  nn::BatchNorm2d norm1;
  nn::Conv2d conv1;
  nn::BatchNorm2d norm2;
  nn::Conv2d conv2;
};
TORCH_MODULE(DenseLayer);

struct DenseBlockImpl : nn::Module {
  DenseBlockImpl(int num_layers, std::int64_t in, std::int64_t growth, std::int64_t bn_size) {
    for (int i = 0; i < num_layers; ++i) {
      layers.push_back(register_module("denselayer" + std::to_string(i + 1),
                                       DenseLayer(in + i * growth, growth, bn_size)));
    }
  }

  torch::Tensor forward(torch::Tensor x) {
    for (auto& layer : layers) x = torch::cat({x, layer->forward(x)}, 1);
    return x;
  }

  std::vector<DenseLayer> layers;
};
TORCH_MODULE(DenseBlock);

struct TransitionImpl : nn::Module {
  TransitionImpl(std::int64_t in, std::int64_t out)
      : norm(register_module("norm", batch_norm(in))), conv(register_module("conv", derm::conv(in, out, 1))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    return torch::avg_pool2d(conv(torch::relu(norm(x))), 2, 2);
  }

  nn::BatchNorm2d norm;
  nn::Conv2d conv;
};
TORCH_MODULE(Transition);

class DenseNetImpl : public ClassifierNetImpl {
 public:
  DenseNetImpl(std::int64_t init_features, std::int64_t growth, std::array<int, 4> blocks, std::int64_t bn_size,
               std::int64_t num_classes) {
    features_->push_back("conv0", conv(3, init_features, 7, 2, 3));
    features_->push_back("norm0", batch_norm(init_features));
    features_->push_back("relu0", nn::ReLU());
    features_->push_back("pool0", nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
    std::int64_t channels = init_features;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      features_->push_back("denseblock" + std::to_string(i + 1), DenseBlock(blocks[i], channels, growth, bn_size));
      channels += blocks[i] * growth;
      if (i + 1 < blocks.size()) {
        features_->push_back("transition" + std::to_string(i + 1), Transition(channels, channels / 2));
        channels /= 2;
      }
    }
    features_->push_back("norm5", batch_norm(channels));
    register_module("features", features_);
    classifier_ = register_module("classifier", nn::Linear(channels, num_classes));

    for (auto& m : modules(false)) {
      if (auto* c = m->as<nn::Conv2d>()) {
        nn::init::kaiming_normal_(c->weight);
      } else if (auto* b = m->as<nn::BatchNorm2d>()) {
        nn::init::ones_(b->weight);
        nn::init::zeros_(b->bias);
      }
    }
  }

  torch::Tensor features(const torch::Tensor& x) override {
    auto out = torch::relu(features_->forward(x));
    return torch::adaptive_avg_pool2d(out, {1, 1}).flatten(1);
  }

  nn::Linear& head() override { return classifier_; }
  std::string_view head_name() const override { return "classifier"; }

 private:
  nn::Sequential features_;
  nn::Linear classifier_{nullptr};
};

}  // namespace

std::shared_ptr<ClassifierNetImpl> make_network(BackboneName name, std::int64_t num_classes) {
  switch (name) {
    case BackboneName::kResNet18:
      return std::make_shared<ResNetImpl<BasicBlockImpl>>(std::array<int, 4>{2, 2, 2, 2}, num_classes);
    case BackboneName::kResNet50:
      return std::make_shared<ResNetImpl<BottleneckImpl>>(std::array<int, 4>{3, 4, 6, 3}, num_classes);
    case BackboneName::kResNet152:
      return std::make_shared<ResNetImpl<BottleneckImpl>>(std::array<int, 4>{3, 8, 36, 3}, num_classes);
    case BackboneName::kDenseNet161:
      return std::make_shared<DenseNetImpl>(96, 48, std::array<int, 4>{6, 12, 36, 24}, 4, num_classes);
  }
  fail(ErrorCode::kInternal, "unhandled backbone");
}

}  // namespace derm
