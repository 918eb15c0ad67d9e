#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"
#include "corpus/corpus.hpp"
#include "corpus/image_io.hpp"

namespace fs = std::filesystem;

namespace derm {

LabelMapping LabelMapping::defaults() {
  LabelMapping m;
  for (auto label : kAllLabels) m.add(std::string(to_string(label)), label);
  m.add("P. Maculae", DiseaseLabel::kPigmentedMaculae);
  m.add("P. Macula", DiseaseLabel::kPigmentedMaculae);
  m.add("Pigmented Maculae", DiseaseLabel::kPigmentedMaculae);
  m.add("Ulcers", DiseaseLabel::kUlcer);
  return m;
}

std::string LabelMapping::normalise(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

void LabelMapping::add(const std::string& name, DiseaseLabel label) {
  exact_[name] = label;
  normalised_[normalise(name)] = label;
}

std::optional<DiseaseLabel> LabelMapping::lookup(const std::string& name) const {
  if (auto it = exact_.find(name); it != exact_.end()) return it->second;
  if (auto it = normalised_.find(normalise(name)); it != normalised_.end()) return it->second;
  return std::nullopt;
}

namespace {

struct Candidate {
  fs::path path;
  std::string id;
  std::string label_name;
};

std::vector<Candidate> walk_folders(const fs::path& root) {
  std::vector<Candidate> out;
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const auto label_name = dir.path().filename().string();
    for (const auto& entry : fs::recursive_directory_iterator(dir.path())) {
      if (!entry.is_regular_file() || !has_image_extension(entry.path())) continue;
      out.push_back({entry.path(), fs::relative(entry.path(), root).generic_string(), label_name});
    }
  }
  return out;
}

std::vector<Candidate> read_sidecar(const fs::path& root, const fs::path& sidecar) {
  std::vector<Candidate> out;
  std::istringstream in(text::read_file(sidecar));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto tab = trimmed.find('\t');
    if (tab == std::string::npos) {
      fail(ErrorCode::kInvalidArgument, sidecar.string() + ":" + std::to_string(line_no) + ": expected path<TAB>label");
    }
    const fs::path rel = text::trim(trimmed.substr(0, tab));
    out.push_back({root / rel, rel.generic_string(), text::trim(trimmed.substr(tab + 1))});
  }
  return out;
}

}  // namespace

IngestResult ingest(const fs::path& root, const LabelMapping& mapping) {
  if (!fs::is_directory(root)) {
    fail(ErrorCode::kNotFound, "corpus directory not found: " + root.string());
  }
  const auto sidecar = root / "labels.tsv";
  auto candidates = fs::exists(sidecar) ? read_sidecar(root, sidecar) : walk_folders(root);
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "no images found under " + root.string());

  std::set<std::string> unknown;
  for (const auto& c : candidates) {
    if (!mapping.lookup(c.label_name)) unknown.insert(c.label_name);
  }
  if (!unknown.empty()) {
    std::string names;
    for (const auto& n : unknown) names += (names.empty() ? "" : ", ") + n;
    fail(ErrorCode::kInvalidArgument, "unknown label(s) without mapping: " + names);
  }

  std::set<std::string> seen;
  for (const auto& c : candidates) {
    std::error_code ec;
    auto canonical = fs::weakly_canonical(c.path, ec);
    const auto key = ec ? c.path.lexically_normal().string() : canonical.string();
    if (!seen.insert(key).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate image path: " + c.path.string());
    }
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.id < b.id; });

  IngestResult result;
  for (const auto& c : candidates) {
    try {
      (void)decode_image_file(c.path);
    } catch (const Error&) {
      result.unreadable.push_back(c.path);
      continue;
    }
    ImageRecord r;
    r.id = c.id;
    r.path = fs::absolute(c.path).lexically_normal().generic_string();
    r.label = *mapping.lookup(c.label_name);
    r.origin = Origin::kOriginal;
    r.split = Split::kUnassigned;
    result.manifest.records.push_back(std::move(r));
  }
  if (result.manifest.records.empty()) {
    fail(ErrorCode::kInvalidArgument, "no images found under " + root.string() + " (" +
                                          std::to_string(result.unreadable.size()) + " unreadable)");
  }
  return result;
}

ClassDistribution class_distribution(const DatasetManifest& manifest) {
  ClassDistribution d{};
  for (const auto& r : manifest.records) {
    auto& c = d[index_of(r.label)];
    switch (r.split) {
      case Split::kTrain: ++c.train; break;
      case Split::kValidation: ++c.validation; break;
      case Split::kTest: ++c.test; break;
      case Split::kUnassigned: ++c.unassigned; break;
    }
  }
  return d;
}

std::string render_distribution(const ClassDistribution& distribution) {
  std::ostringstream out;
  auto row = [&out](std::string_view name, const SplitCounts& c) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18.*s %9zu %11zu %7zu %11zu\n", static_cast<int>(name.size()),
                  name.data(), c.train, c.validation, c.test, c.unassigned);
    out << buf;
  };
  char header[160];
  std::snprintf(header, sizeof(header), "%-18s %9s %11s %7s %11s\n", "Disease", "Training", "Validation",
                "Test", "Unassigned");
  out << header;
  SplitCounts total;
  for (auto label : kAllLabels) {
    const auto& c = distribution[index_of(label)];
    row(to_string(label), c);
    total.train += c.train;
    total.validation += c.validation;
    total.test += c.test;
    total.unassigned += c.unassigned;
  }
  row("Total", total);
  return out.str();
}

}  // namespace derm
