#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mova/llm.hpp"
#include "mova/parse.hpp"
#include "mova/prompts.hpp"

namespace mova {

inline constexpr int kRecordSchemaVersion = 1;

struct PredictionRecord {
  std::string id;
  std::optional<LabelVector> labels;  // mutually exclusive with failure
  std::optional<ScoreVector> scores;
  std::string strategy;
  std::string prompt_hash;  // hash of the (first) prompt issued
  std::string model;
  std::string backend;
  std::optional<std::string> failure;
  std::vector<std::string> diagnostics;

  bool failed() const { return failure.has_value(); }
};

std::string record_to_json(const PredictionRecord& record, const Framework& fw);
PredictionRecord record_from_json(const std::string& line, const Framework& fw);
std::vector<PredictionRecord> read_records_jsonl(const std::filesystem::path& path,
                                                 const Framework& fw);

struct RunOptions {
  PromptStrategy strategy;
  RequestConfig request;
  int concurrency = 1;
  const Lexicon* lexicon = nullptr;  // required for +lexicon prompts
  // Textbook sequential chain (each prompt sees only earlier predictions);
  // default is the seeded variant driven by one all-at-once pass.
  bool sequential_chain = false;
};

// One instance, one record. Parse and transport failures land in
// record.failure and never propagate past the batch boundary.
PredictionRecord classify(const TextInstance& instance, const Framework& fw, Client& client,
                          const PromptLibrary& prompts, const RunOptions& options);

// Pass 1 seeds every dimension from one all-at-once request; pass 2 issues a
// chain prompt per target embedding the other dimensions' pass-1 predictions.
// Total backend calls: 1 + |dimensions|. A pass-1 failure aborts with a
// failure record and no pass-2 calls.
PredictionRecord classify_chain(const TextInstance& instance, const Framework& fw,
                                Client& client, const PromptLibrary& prompts,
                                const RunOptions& options);

struct BatchResult {
  std::vector<PredictionRecord> records;  // ordered by instance id
  std::size_t failures = 0;
};

using RecordSink = std::function<void(const PredictionRecord&)>;
using ProgressFn = std::function<void(std::size_t done, std::size_t total,
                                      std::size_t failures)>;

// Fan-out over a bounded pool of `options.concurrency` workers. The sink
// receives records in instance-id order regardless of completion order, so
// output files are identical for any concurrency level.
BatchResult run_batch(const Dataset& dataset, Client& client, const PromptLibrary& prompts,
                      const RunOptions& options, const RecordSink& sink = {},
                      const ProgressFn& progress = {});

}  // namespace mova
