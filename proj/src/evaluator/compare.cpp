#include <algorithm>
#include <cstdio>
#include <sstream>

#include "common/text.hpp"
#include "evaluator/evaluate.hpp"

namespace derm {
namespace {

std::string percent(double fraction) { return text::format_fixed(fraction * 100.0, 2) + "%"; }

std::vector<std::array<std::string, 5>> cells(const ComparisonTable& t) {
  std::vector<std::array<std::string, 5>> out;
  out.push_back({"Network", "Strategy", "Validation", "Time (min)", "Test Top-1"});
  for (const auto& r : t.rows) {
    out.push_back({r.network, r.strategy, percent(r.validation_accuracy), text::format_fixed(r.training_minutes, 2),
                   r.test_top1 ? percent(*r.test_top1) : "-"});
  }
  return out;
}

}  // namespace

ComparisonTable compare_runs(std::vector<ComparisonEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const ComparisonEntry& a, const ComparisonEntry& b) {
    return a.validation_accuracy > b.validation_accuracy;
  });
  return {std::move(entries)};
}

std::string ComparisonTable::to_text() const {
  const auto grid = cells(*this);
  std::array<std::size_t, 5> width{};
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      const auto& cell = grid[r][c];
      if (c) out << "  ";
      // Text columns left-aligned, numbers right-aligned.
      if (c < 2) out << cell << std::string(width[c] - cell.size(), ' ');
      else out << std::string(width[c] - cell.size(), ' ') << cell;
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 8, '-') << '\n';
    }
  }
  return out.str();
}

std::string ComparisonTable::to_tsv() const {
  std::ostringstream out;
  for (const auto& row : cells(*this)) {
    out << row[0] << '\t' << row[1] << '\t' << row[2] << '\t' << row[3] << '\t' << row[4] << '\n';
  }
  return out.str();
}

}  // namespace derm
