#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <torch/torch.h>

namespace derm {

enum class BackboneName { kResNet18, kResNet50, kResNet152, kDenseNet161 };

struct BackboneSpec {
  BackboneName name;
  std::string_view display_name;
  int input_side;
  std::int64_t feature_dim;
  std::string_view pretrained_source;
};

const std::array<BackboneSpec, 4>& backbone_specs();
const BackboneSpec& backbone_spec(BackboneName name);
// Case-insensitive ("resnet152" and "ResNet152" both parse).
std::optional<BackboneName> parse_backbone(std::string_view name);
std::string valid_backbone_names();

// Feature extractor plus a replaceable linear head. Submodule names follow
// the torchvision layout so ImageNet state dicts load by key.
class ClassifierNetImpl : public torch::nn::Module {
 public:
  // Pooled penultimate features, shape [N, feature_dim].
  virtual torch::Tensor features(const torch::Tensor& x) = 0;
  virtual torch::nn::Linear& head() = 0;
  // Parameter-name prefix of the head ("fc" or "classifier").
  virtual std::string_view head_name() const = 0;

  torch::Tensor forward(const torch::Tensor& x) { return head()(features(x)); }
};

std::shared_ptr<ClassifierNetImpl> make_network(BackboneName name, std::int64_t num_classes);

}  // namespace derm
