#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dimino/dataset.hpp"

namespace dimino {

inline constexpr char kBlobMagic[8] = {'D', 'I', 'M', 'I', 'N', 'O', '0', '1'};

// min / max of every dimensionless number over a split, plus the span in
// decades.
struct DimlessAudit {
  struct Entry {
    double min = 0.0;
    double max = 0.0;
    double decades = 0.0;
  };
  std::map<std::string, Entry> numbers;
};

DimlessAudit audit_dimensionless(const std::vector<Sample>& samples);

// Writes manifest.json plus <split>.bin per split. float_bytes is 4 or 8.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds, int float_bytes = 8);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace dimino
