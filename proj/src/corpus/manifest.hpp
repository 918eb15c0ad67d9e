#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corpus/labels.hpp"

namespace derm {

enum class Origin { kOriginal, kAugmented, kVetted };
enum class Split { kUnassigned, kTrain, kValidation, kTest };

std::string_view to_string(Origin origin);
std::string_view to_string(Split split);
std::optional<Origin> parse_origin(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

struct ImageRecord {
  std::string id;
  std::string path;
  DiseaseLabel label = DiseaseLabel::kAcne;
  Origin origin = Origin::kOriginal;
  // Original record id for AUGMENTED, case id for VETTED.
  std::optional<std::string> source_id;
  Split split = Split::kUnassigned;
  // Serialized transform for AUGMENTED records, empty otherwise.
  std::string transform;

  bool operator==(const ImageRecord&) const = default;
};

inline constexpr int kManifestSchemaVersion = 1;

struct DatasetManifest {
  int schema_version = kManifestSchemaVersion;
  std::uint64_t seed = 0;
  std::vector<ImageRecord> records;

  bool operator==(const DatasetManifest&) const = default;

  const ImageRecord* find(std::string_view id) const;
};

// Throws kCorrupt describing the first broken invariant.
void validate(const DatasetManifest& manifest);

// Line format: a header line `#dermclass-manifest<TAB>schema_version=N<TAB>seed=S`
// followed by one `key=value` tab-separated record per line.
std::string serialize(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace derm
