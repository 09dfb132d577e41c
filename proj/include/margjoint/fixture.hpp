#pragma once

#include <array>
#include <cstdint>

#include "binary_core.hpp"

namespace margjoint {

// Bundled summary-level clinical data: 12 oncology study datasets with the
// counts of two binary patient indicators. Multi-center studies appear once
// per region.
struct FixtureRow {
  const char* registry_id;
  const char* disease;
  const char* region;
  std::int64_t n;
  std::int64_t x;
  std::int64_t y;
};

inline constexpr std::array<FixtureRow, 12> kClinicalRows{{
    {"NCT00081796", "Breast Cancer", "Northeast", 338, 237, 218},
    {"NCT00081796", "Breast Cancer", "Midwest", 377, 268, 302},
    {"NCT00081796", "Breast Cancer", "South", 663, 459, 391},
    {"NCT00081796", "Breast Cancer", "West", 393, 235, 222},
    {"NCT00554229", "Prostate Cancer", "Northeast", 259, 199, 171},
    {"NCT00554229", "Prostate Cancer", "Midwest", 273, 209, 220},
    {"NCT00554229", "Prostate Cancer", "South", 512, 393, 288},
    {"NCT00554229", "Prostate Cancer", "West", 263, 173, 175},
    {"NCT00981058", "Lung Cancer", "", 545, 280, 455},
    {"NCT01169259", "Cancer Prevention", "", 24193, 16890, 17662},
    {"NCT00626548", "Prostate Cancer", "", 652, 457, 463},
    {"NCT00617669", "Prostate Cancer", "", 426, 296, 331},
}};

namespace detail {

constexpr std::int64_t fixture_total(std::int64_t FixtureRow::* field) {
  std::int64_t total = 0;
  for (const FixtureRow& r : kClinicalRows) total += r.*field;
  return total;
}

static_assert(fixture_total(&FixtureRow::n) == 28894);
static_assert(fixture_total(&FixtureRow::x) == 20096);
static_assert(fixture_total(&FixtureRow::y) == 20898);

}  // namespace detail

inline SummaryCollection clinical_fixture() {
  std::vector<MarginalSummary> records;
  records.reserve(kClinicalRows.size());
  for (const FixtureRow& r : kClinicalRows) records.emplace_back(r.n, r.x, r.y);
  return SummaryCollection(std::move(records));
}

}  // namespace margjoint
