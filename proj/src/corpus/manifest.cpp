#include "corpus/manifest.hpp"

#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "common/error.hpp"
#include "common/text.hpp"

namespace derm {
namespace {

constexpr std::string_view kHeaderTag = "#dermclass-manifest";

}  // namespace

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::kOriginal: return "ORIGINAL";
    case Origin::kAugmented: return "AUGMENTED";
    case Origin::kVetted: return "VETTED";
  }
  return "?";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kUnassigned: return "UNASSIGNED";
    case Split::kTrain: return "TRAIN";
    case Split::kValidation: return "VALIDATION";
    case Split::kTest: return "TEST";
  }
  return "?";
}

std::optional<Origin> parse_origin(std::string_view s) {
  for (auto o : {Origin::kOriginal, Origin::kAugmented, Origin::kVetted}) {
    if (to_string(o) == s) return o;
  }
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  for (auto sp : {Split::kUnassigned, Split::kTrain, Split::kValidation, Split::kTest}) {
    if (to_string(sp) == s) return sp;
  }
  return std::nullopt;
}

const ImageRecord* DatasetManifest::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

void validate(const DatasetManifest& manifest) {
  std::unordered_map<std::string, const ImageRecord*> by_id;
  std::unordered_set<std::string> paths;
  for (const auto& r : manifest.records) {
    if (r.id.empty()) fail(ErrorCode::kCorrupt, "record with empty id");
    if (!by_id.emplace(r.id, &r).second) {
      fail(ErrorCode::kCorrupt, "duplicate record id: " + r.id);
    }
    if (!paths.insert(r.path).second) {
      fail(ErrorCode::kCorrupt, "path appears in more than one record: " + r.path);
    }
    const bool needs_source = r.origin != Origin::kOriginal;
    if (needs_source != r.source_id.has_value()) {
      fail(ErrorCode::kCorrupt, "record " + r.id + ": source_id must be set iff origin is AUGMENTED or VETTED");
    }
    if (r.split == Split::kTest && r.origin != Origin::kOriginal) {
      fail(ErrorCode::kCorrupt, "record " + r.id + ": only ORIGINAL records may be in TEST");
    }
  }
  for (const auto& r : manifest.records) {
    if (r.origin != Origin::kAugmented) continue;
    auto it = by_id.find(*r.source_id);
    if (it == by_id.end() || it->second->origin != Origin::kOriginal) {
      fail(ErrorCode::kCorrupt, "augmented record " + r.id + " refers to missing original " + *r.source_id);
    }
    if (it->second->label != r.label) {
      fail(ErrorCode::kCorrupt, "augmented record " + r.id + " label differs from its source");
    }
  }
}

std::string serialize(const DatasetManifest& manifest) {
  std::ostringstream out;
  out << kHeaderTag << "\tschema_version=" << manifest.schema_version
      << "\tseed=" << manifest.seed << '\n';
  for (const auto& r : manifest.records) {
    out << "id=" << text::escape_field(r.id)
        << "\tpath=" << text::escape_field(r.path)
        << "\tlabel=" << to_string(r.label)
        << "\torigin=" << to_string(r.origin)
        << "\tsource_id=" << text::escape_field(r.source_id.value_or(""))
        << "\tsplit=" << to_string(r.split)
        << "\ttransform=" << text::escape_field(r.transform) << '\n';
  }
  return out.str();
}

DatasetManifest parse_manifest(std::string_view content) {
  DatasetManifest manifest;
  std::istringstream in{std::string(content)};
  std::string line;
  if (!std::getline(in, line) || !line.starts_with(kHeaderTag)) {
    fail(ErrorCode::kCorrupt, "manifest header missing");
  }
  const auto header = text::parse_fields(std::string_view(line).substr(kHeaderTag.size()));
  auto get = [](const std::map<std::string, std::string>& fields, const std::string& key,
                std::size_t line_no) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) {
      fail(ErrorCode::kCorrupt, "manifest line " + std::to_string(line_no) + ": missing field '" + key + "'");
    }
    return it->second;
  };
  manifest.schema_version = static_cast<int>(text::parse_int(get(header, "schema_version", 1), "schema_version"));
  if (manifest.schema_version != kManifestSchemaVersion) {
    fail(ErrorCode::kCorrupt, "unsupported manifest schema_version " + std::to_string(manifest.schema_version));
  }
  manifest.seed = static_cast<std::uint64_t>(text::parse_int(get(header, "seed", 1), "seed"));

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = text::parse_fields(line);
    ImageRecord r;
    r.id = get(fields, "id", line_no);
    r.path = get(fields, "path", line_no);
    const auto& label = get(fields, "label", line_no);
    auto parsed_label = parse_label(label);
    if (!parsed_label) fail(ErrorCode::kCorrupt, "manifest line " + std::to_string(line_no) + ": unknown label " + label);
    r.label = *parsed_label;
    auto origin = parse_origin(get(fields, "origin", line_no));
    if (!origin) fail(ErrorCode::kCorrupt, "manifest line " + std::to_string(line_no) + ": bad origin");
    r.origin = *origin;
    const auto& source = get(fields, "source_id", line_no);
    if (!source.empty()) r.source_id = source;
    auto split = parse_split(get(fields, "split", line_no));
    if (!split) fail(ErrorCode::kCorrupt, "manifest line " + std::to_string(line_no) + ": bad split");
    r.split = *split;
    if (auto it = fields.find("transform"); it != fields.end()) r.transform = it->second;
    manifest.records.push_back(std::move(r));
  }
  validate(manifest);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  validate(manifest);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  text::write_file_atomic(path, serialize(manifest));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::kNotFound, "manifest not found: " + path.string());
  }
  return parse_manifest(text::read_file(path));
}

}  // namespace derm
