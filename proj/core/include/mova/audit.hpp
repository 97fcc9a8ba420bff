#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mova/pipeline.hpp"

namespace mova {

struct QuestionnaireItem {
  std::string id;
  std::string text;
  std::string prescribed;  // the questionnaire's scoring-key dimension
};

// CSV with header columns {id, text, prescribed}.
std::vector<QuestionnaireItem> read_questionnaire_csv(const std::filesystem::path& path);

struct ItemAudit {
  std::string id;
  std::string text;
  std::string prescribed;
  std::map<std::string, double> probabilities;
  std::vector<std::string> predicted;  // dimensions at or above the flag threshold
  bool multi_loaded = false;           // >= 2 dimensions clear the threshold
  std::optional<std::string> failure;
};

struct AuditResult {
  std::vector<ItemAudit> items;
  double flag_threshold = 0.5;
  std::map<std::string, double> recall;  // per prescribed dimension
  std::vector<std::string> flagged_ids;
  std::size_t failures = 0;
};

// Scores every item against all framework dimensions with the all-at-once
// strategy and probability extraction. recall(d) is the fraction of items
// prescribed d whose prediction for d is positive. Binary schemes only.
AuditResult audit_questionnaire(const std::vector<QuestionnaireItem>& items,
                                const Framework& fw, Client& client,
                                const PromptLibrary& prompts, const RunOptions& options,
                                double flag_threshold = 0.5);

struct AuditSummary {
  std::size_t total = 0;
  std::size_t flagged = 0;
  std::size_t failures = 0;
  double flagged_fraction = 0.0;
  std::map<std::string, double> recall;
};

AuditSummary audit_summary(const AuditResult& result);

std::string audit_to_json(const AuditResult& result);
std::string audit_table(const AuditResult& result);  // human-readable

}  // namespace mova
