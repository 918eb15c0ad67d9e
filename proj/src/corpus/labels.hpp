#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace derm {

// Canonical order is alphabetical; every score vector, confusion matrix row
// and checkpoint label list is indexed by it.
enum class DiseaseLabel : int {
  kAcne = 0,
  kAlopecia,
  kCrust,
  kErythema,
  kLeukoderma,
  kPigmentedMaculae,
  kPustule,
  kUlcer,
  kWheal,
};

inline constexpr std::size_t kNumLabels = 9;

inline constexpr std::array<DiseaseLabel, kNumLabels> kAllLabels = {
    DiseaseLabel::kAcne,       DiseaseLabel::kAlopecia,
    DiseaseLabel::kCrust,      DiseaseLabel::kErythema,
    DiseaseLabel::kLeukoderma, DiseaseLabel::kPigmentedMaculae,
    DiseaseLabel::kPustule,    DiseaseLabel::kUlcer,
    DiseaseLabel::kWheal,
};

constexpr std::size_t index_of(DiseaseLabel label) {
  return static_cast<std::size_t>(label);
}

DiseaseLabel label_at(std::size_t index);

std::string_view to_string(DiseaseLabel label);

// Exact canonical name only.
std::optional<DiseaseLabel> parse_label(std::string_view name);

// Canonical names joined by ',' in canonical order; stored in checkpoints.
std::string canonical_label_order();

}  // namespace derm
