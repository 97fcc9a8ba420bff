#include "mova/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace mova {

namespace {

using json = nlohmann::json;

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int decode_label_cell(const LabelScheme& scheme, const json& value, const std::string& where) {
  std::optional<int> decoded;
  if (value.is_number_integer()) {
    decoded = scheme.decode(std::to_string(value.get<long>()));
  } else if (value.is_string()) {
    decoded = scheme.decode(value.get<std::string>());
  }
  if (!decoded) throw ParseError("illegal label value at " + where + ": " + value.dump());
  return *decoded;
}

}  // namespace

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  std::unordered_set<std::string> seen_ids;
  for (const auto& instance : dataset.instances) {
    if (trim_view(instance.text).empty())
      report.violations.push_back({Violation::Kind::empty_text, instance.id, "text is empty"});
    if (!seen_ids.insert(instance.id).second)
      report.violations.push_back(
          {Violation::Kind::duplicate_id, instance.id, "id occurs more than once"});
    if (instance.gold) {
      if (instance.gold->values.size() != dataset.framework.dimensions.size()) {
        report.violations.push_back(
            {Violation::Kind::illegal_label, instance.id,
             "label vector has " + std::to_string(instance.gold->values.size()) +
                 " values, framework has " +
                 std::to_string(dataset.framework.dimensions.size())});
      } else {
        for (std::size_t i = 0; i < instance.gold->values.size(); ++i) {
          if (!dataset.framework.scheme.is_legal(instance.gold->values[i]))
            report.violations.push_back(
                {Violation::Kind::illegal_label, instance.id,
                 dataset.framework.dimensions[i] + " = " +
                     std::to_string(instance.gold->values[i])});
        }
      }
    }
    for (const auto& [key, value] : instance.aux) {
      const auto& allowed = dataset.framework.aux_keys;
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        report.violations.push_back(
            {Violation::Kind::unknown_aux_key, instance.id, "aux key '" + key + "'"});
    }
  }
  return report;
}

double positive_rate(const Dataset& dataset, std::string_view dimension) {
  const std::size_t index = dataset.framework.dimension_index(dimension);
  if (dataset.instances.empty()) throw UsageError("positive_rate over an empty dataset");
  long positives = 0;
  for (const auto& instance : dataset.instances) {
    if (!instance.gold || instance.gold->values.size() <= index)
      throw UsageError("instance '" + instance.id + "' has no gold label for " +
                       std::string(dimension));
    if (instance.gold->values[index] == 1) ++positives;
  }
  return static_cast<double>(positives) / static_cast<double>(dataset.instances.size());
}

Dataset read_dataset_jsonl(const std::filesystem::path& path, const Framework& fw) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  Dataset dataset;
  dataset.name = path.stem().string();
  dataset.framework = fw;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!row.is_object() || !row.contains("id") || !row.contains("text"))
      throw ParseError(where + ": row needs 'id' and 'text' fields");

    TextInstance instance;
    instance.id = row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump();
    instance.text = row["text"].get<std::string>();
    if (row.contains("aux")) {
      for (const auto& [key, value] : row["aux"].items())
        instance.aux[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    if (row.contains("labels") && !row["labels"].is_null()) {
      LabelVector gold;
      gold.values.assign(fw.dimensions.size(), 0);
      std::vector<bool> filled(fw.dimensions.size(), false);
      for (const auto& [key, value] : row["labels"].items()) {
        if (!fw.has_dimension(key))
          throw ParseError(where + ": unknown label dimension '" + key + "'");
        const std::size_t i = fw.dimension_index(key);
        gold.values[i] = decode_label_cell(fw.scheme, value, where);
        filled[i] = true;
      }
      for (std::size_t i = 0; i < filled.size(); ++i)
        if (!filled[i])
          throw ParseError(where + ": missing label for dimension '" + fw.dimensions[i] + "'");
      instance.gold = std::move(gold);
    }
    dataset.instances.push_back(std::move(instance));
  }
  return dataset;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
      row.clear();
    } else {
      field.push_back(c);
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

Dataset read_dataset_csv(const std::filesystem::path& path, const Framework& fw) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw ParseError(path.string() + ": empty CSV");
  const auto& header = rows.front();

  int id_col = -1, text_col = -1;
  std::unordered_map<std::size_t, std::size_t> dim_cols;  // column -> dimension index
  std::unordered_map<std::size_t, std::string> aux_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(trim_view(header[c]));
    if (name == "id") {
      id_col = static_cast<int>(c);
    } else if (name == "text") {
      text_col = static_cast<int>(c);
    } else if (fw.has_dimension(name)) {
      dim_cols[c] = fw.dimension_index(name);
    } else {
      aux_cols[c] = name;
    }
  }
  if (id_col < 0 || text_col < 0)
    throw ParseError(path.string() + ": header must declare 'id' and 'text' columns");

  Dataset dataset;
  dataset.name = path.stem().string();
  dataset.framework = fw;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    const std::string where = path.string() + ":" + std::to_string(r + 1);
    auto cell = [&](std::size_t c) -> std::string {
      return c < cells.size() ? cells[c] : std::string();
    };
    TextInstance instance;
    instance.id = cell(static_cast<std::size_t>(id_col));
    instance.text = cell(static_cast<std::size_t>(text_col));
    for (const auto& [c, key] : aux_cols) {
      const std::string value = cell(c);
      if (!value.empty()) instance.aux[key] = value;
    }
    if (!dim_cols.empty()) {
      bool any = false, all = true;
      for (const auto& [c, dim_index] : dim_cols) {
        if (trim_view(cell(c)).empty())
          all = false;
        else
          any = true;
      }
      if (any && !all) throw ParseError(where + ": partially filled label columns");
      if (any && dim_cols.size() != fw.dimensions.size())
        throw ParseError(path.string() + ": label columns do not cover every dimension");
      if (any) {
        LabelVector gold;
        gold.values.assign(fw.dimensions.size(), 0);
        for (const auto& [c, dim_index] : dim_cols) {
          const auto decoded = fw.scheme.decode(cell(c));
          if (!decoded)
            throw ParseError(where + ": illegal label '" + cell(c) + "' for " +
                             fw.dimensions[dim_index]);
          gold.values[dim_index] = *decoded;
        }
        instance.gold = std::move(gold);
      }
    }
    dataset.instances.push_back(std::move(instance));
  }
  return dataset;
}

Dataset read_dataset(const std::filesystem::path& path, const Framework& fw) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return read_dataset_csv(path, fw);
  return read_dataset_jsonl(path, fw);
}

void write_dataset_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  for (const auto& instance : dataset.instances) {
    json row;
    row["id"] = instance.id;
    row["text"] = instance.text;
    if (!instance.aux.empty()) row["aux"] = instance.aux;
    if (instance.gold) {
      json labels = json::object();
      for (std::size_t i = 0; i < dataset.framework.dimensions.size(); ++i)
        labels[dataset.framework.dimensions[i]] = instance.gold->values[i];
      row["labels"] = std::move(labels);
    }
    out << row.dump() << '\n';
  }
}

}  // namespace mova
