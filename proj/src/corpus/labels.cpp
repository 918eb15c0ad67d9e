#include "corpus/labels.hpp"

#include "common/error.hpp"

namespace derm {
namespace {

constexpr std::array<std::string_view, kNumLabels> kNames = {
    "Acne",       "Alopecia",         "Crust",   "Erythema", "Leukoderma",
    "PigmentedMaculae", "Pustule", "Ulcer",   "Wheal",
};

}  // namespace

DiseaseLabel label_at(std::size_t index) {
  if (index >= kNumLabels) {
    fail(ErrorCode::kInvalidArgument, "label index out of range: " + std::to_string(index));
  }
  return kAllLabels[index];
}

std::string_view to_string(DiseaseLabel label) { return kNames[index_of(label)]; }

std::optional<DiseaseLabel> parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (kNames[i] == name) return kAllLabels[i];
  }
  return std::nullopt;
}

std::string canonical_label_order() {
  std::string out;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (i) out.push_back(',');
    out += kNames[i];
  }
  return out;
}

}  // namespace derm
