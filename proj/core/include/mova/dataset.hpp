#pragma once

#include <filesystem>

#include "mova/types.hpp"

namespace mova {

struct Violation {
  enum class Kind { empty_text, illegal_label, duplicate_id, unknown_aux_key };
  Kind kind;
  std::string instance_id;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Report-only; never mutates the dataset.
ValidationReport validate_dataset(const Dataset& dataset);

// Share of gold-positive instances for one dimension. Value 1 counts as
// positive for both binary and ternary schemes.
double positive_rate(const Dataset& dataset, std::string_view dimension);

// JSONL rows {id, text, aux?, labels?}; CSV with header-declared dimension
// columns. Label cells accept 0/1, -1/0/1 or Y/N/U per the framework scheme.
Dataset read_dataset_jsonl(const std::filesystem::path& path, const Framework& fw);
Dataset read_dataset_csv(const std::filesystem::path& path, const Framework& fw);
Dataset read_dataset(const std::filesystem::path& path, const Framework& fw);
void write_dataset_jsonl(const Dataset& dataset, const std::filesystem::path& path);

// Minimal RFC-4180 row reader shared by the CSV ingest paths.
std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path);

}  // namespace mova
