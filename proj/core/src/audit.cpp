#include "mova/audit.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mova/dataset.hpp"

namespace mova {

namespace {

using json = nlohmann::json;

}  // namespace

std::vector<QuestionnaireItem> read_questionnaire_csv(const std::filesystem::path& path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw ParseError(path.string() + ": empty CSV");
  const auto& header = rows.front();
  int id_col = -1, text_col = -1, prescribed_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "id") id_col = static_cast<int>(c);
    if (header[c] == "text") text_col = static_cast<int>(c);
    if (header[c] == "prescribed") prescribed_col = static_cast<int>(c);
  }
  if (id_col < 0 || text_col < 0 || prescribed_col < 0)
    throw ParseError(path.string() + ": header must declare id, text and prescribed");
  std::vector<QuestionnaireItem> items;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    auto cell = [&](int c) {
      return static_cast<std::size_t>(c) < cells.size() ? cells[c] : std::string();
    };
    items.push_back({cell(id_col), cell(text_col), cell(prescribed_col)});
  }
  return items;
}

AuditResult audit_questionnaire(const std::vector<QuestionnaireItem>& items,
                                const Framework& fw, Client& client,
                                const PromptLibrary& prompts, const RunOptions& options,
                                double flag_threshold) {
  if (items.empty()) throw UsageError("empty item list");
  if (!fw.scheme.is_binary())
    throw UsageError("questionnaire auditing requires a binary label scheme");
  std::set<std::string> ids;
  for (const auto& item : items) {
    fw.dimension_index(item.prescribed);  // unknown prescribed dimension -> UsageError
    if (!ids.insert(item.id).second)
      throw UsageError("duplicate item id '" + item.id + "'");
  }

  Dataset dataset;
  dataset.name = "questionnaire";
  dataset.framework = fw;
  for (const auto& item : items) dataset.instances.push_back({item.id, item.text, {}, {}});

  RunOptions run = options;
  run.strategy = PromptStrategy{PromptStrategy::Kind::all_at_once};
  const BatchResult batch = run_batch(dataset, client, prompts, run);

  std::unordered_map<std::string, const PredictionRecord*> by_id;
  for (const auto& record : batch.records) by_id[record.id] = &record;

  AuditResult result;
  result.flag_threshold = flag_threshold;
  std::map<std::string, long> prescribed_total, prescribed_hit;

  for (const auto& item : items) {
    ItemAudit audit;
    audit.id = item.id;
    audit.text = item.text;
    audit.prescribed = item.prescribed;
    const PredictionRecord* record = by_id.at(item.id);
    if (record->failed()) {
      audit.failure = record->failure;
      ++result.failures;
      result.items.push_back(std::move(audit));
      continue;
    }
    for (std::size_t i = 0; i < fw.dimensions.size(); ++i) {
      const double probability = record->scores
                                     ? (*record->scores)[i]
                                     : static_cast<double>(record->labels->values[i]);
      audit.probabilities[fw.dimensions[i]] = probability;
      if (probability >= flag_threshold) audit.predicted.push_back(fw.dimensions[i]);
    }
    audit.multi_loaded = audit.predicted.size() >= 2;
    if (audit.multi_loaded) result.flagged_ids.push_back(item.id);

    ++prescribed_total[item.prescribed];
    if (record->labels->at(fw, item.prescribed) == 1) ++prescribed_hit[item.prescribed];
    result.items.push_back(std::move(audit));
  }

  for (const auto& [dim, total] : prescribed_total)
    result.recall[dim] = static_cast<double>(prescribed_hit[dim]) / total;
  return result;
}

AuditSummary audit_summary(const AuditResult& result) {
  AuditSummary summary;
  summary.total = result.items.size();
  summary.flagged = result.flagged_ids.size();
  summary.failures = result.failures;
  const std::size_t scored = summary.total - summary.failures;
  summary.flagged_fraction =
      scored == 0 ? 0.0 : static_cast<double>(summary.flagged) / scored;
  summary.recall = result.recall;
  return summary;
}

std::string audit_to_json(const AuditResult& result) {
  json out;
  out["flag_threshold"] = result.flag_threshold;
  json items = json::array();
  for (const auto& item : result.items) {
    json entry;
    entry["id"] = item.id;
    entry["text"] = item.text;
    entry["prescribed"] = item.prescribed;
    if (item.failure) {
      entry["failure"] = *item.failure;
    } else {
      entry["probabilities"] = item.probabilities;
      entry["predicted"] = item.predicted;
      entry["multi_loaded"] = item.multi_loaded;
    }
    items.push_back(std::move(entry));
  }
  out["items"] = std::move(items);
  const auto summary = audit_summary(result);
  out["total"] = summary.total;
  out["flagged"] = summary.flagged;
  out["flagged_fraction"] = summary.flagged_fraction;
  out["failures"] = summary.failures;
  out["recall"] = summary.recall;
  out["flagged_ids"] = result.flagged_ids;
  return out.dump(2);
}

std::string audit_table(const AuditResult& result) {
  std::ostringstream out;
  out << std::left << std::setw(8) << "id" << std::setw(24) << "prescribed"
      << std::setw(8) << "flag" << "predicted (p)\n";
  for (const auto& item : result.items) {
    out << std::left << std::setw(8) << item.id << std::setw(24) << item.prescribed;
    if (item.failure) {
      out << std::setw(8) << "FAIL" << *item.failure << "\n";
      continue;
    }
    out << std::setw(8) << (item.multi_loaded ? "MULTI" : "");
    bool first = true;
    for (const auto& dim : item.predicted) {
      if (!first) out << ", ";
      out << dim << " (" << std::fixed << std::setprecision(2)
          << item.probabilities.at(dim) << ")";
      out.unsetf(std::ios::fixed);
      first = false;
    }
    out << "\n";
  }
  const auto summary = audit_summary(result);
  out << "\nitems: " << summary.total << "  flagged: " << summary.flagged << " ("
      << std::fixed << std::setprecision(3) << summary.flagged_fraction << ")";
  out.unsetf(std::ios::fixed);
  if (summary.failures) out << "  failures: " << summary.failures;
  out << "\n";
  for (const auto& [dim, recall] : summary.recall)
    out << "recall " << dim << ": " << recall << "\n";
  return out.str();
}

}  // namespace mova
