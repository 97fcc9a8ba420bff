#include "mova/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "mova/hash.hpp"

namespace mova {

namespace {

using json = nlohmann::json;

std::string_view strip_token_markers(std::string_view token) {
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front())))
    token.remove_prefix(1);
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back())))
    token.remove_suffix(1);
  if (token.size() >= 2 && static_cast<unsigned char>(token[0]) == 0xc4 &&
      static_cast<unsigned char>(token[1]) == 0xa0)
    token.remove_prefix(2);
  if (token.size() >= 3 && static_cast<unsigned char>(token[0]) == 0xe2 &&
      static_cast<unsigned char>(token[1]) == 0x96 &&
      static_cast<unsigned char>(token[2]) == 0x81)
    token.remove_prefix(3);
  return token;
}

// Probability for a single-label reply: extraction at the first label token
// at or after `value_offset`, hard label when extraction is impossible.
double score_single(const Completion& completion, long value_offset, int label,
                    std::vector<std::string>& diagnostics, const std::string& dimension) {
  const double hard = static_cast<double>(label);
  if (!completion.logprobs) {
    diagnostics.push_back("no logprobs for '" + dimension + "'; hard 0/1 score");
    return hard;
  }
  const auto& tokens = *completion.logprobs;
  std::size_t offset = 0;
  std::size_t k = 0;
  for (; k < tokens.size(); ++k) {
    if (offset + tokens[k].token.size() > static_cast<std::size_t>(value_offset)) break;
    offset += tokens[k].token.size();
  }
  for (; k < tokens.size(); ++k) {
    const auto stripped = strip_token_markers(tokens[k].token);
    if (stripped == "0" || stripped == "1") {
      try {
        const auto extraction =
            extract_label_probability(tokens[k], label == 1 ? "1" : "0");
        if (extraction.degraded)
          diagnostics.push_back("degraded logprobs for '" + dimension +
                                "'; hard 0/1 score");
        return extraction.u_m;
      } catch (const UsageError& e) {
        diagnostics.push_back("extraction failed for '" + dimension + "' (" + e.what() +
                              "); using hard label");
        return hard;
      }
    }
  }
  diagnostics.push_back("no label token located for '" + dimension +
                        "'; using hard label");
  return hard;
}

void check_strategy(const Framework& fw, const PromptStrategy& strategy) {
  strategy.validate();
  if (strategy.kind != PromptStrategy::Kind::all_at_once && !fw.scheme.is_binary())
    throw UsageError(strategy.label() + " requires a binary label scheme");
}

PredictionRecord base_record(const TextInstance& instance, const Framework&,
                             Client& client, const RunOptions& options) {
  PredictionRecord record;
  record.id = instance.id;
  record.strategy = options.strategy.label();
  record.model = options.request.model;
  record.backend = client.backend().name();
  return record;
}

}  // namespace

std::string record_to_json(const PredictionRecord& record, const Framework& fw) {
  json out;
  out["schema_version"] = kRecordSchemaVersion;
  out["id"] = record.id;
  if (record.labels) {
    json labels = json::object();
    for (std::size_t i = 0; i < fw.dimensions.size(); ++i)
      labels[fw.dimensions[i]] = record.labels->values[i];
    out["labels"] = std::move(labels);
  }
  if (record.scores) {
    json scores = json::object();
    for (std::size_t i = 0; i < fw.dimensions.size(); ++i)
      scores[fw.dimensions[i]] = (*record.scores)[i];
    out["scores"] = std::move(scores);
  }
  out["strategy"] = record.strategy;
  out["prompt_hash"] = record.prompt_hash;
  out["model"] = record.model;
  out["backend"] = record.backend;
  if (record.failure) out["failure"] = *record.failure;
  if (!record.diagnostics.empty()) out["diagnostics"] = record.diagnostics;
  return out.dump();
}

PredictionRecord record_from_json(const std::string& line, const Framework& fw) {
  json in;
  try {
    in = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad record JSON: ") + e.what());
  }
  PredictionRecord record;
  record.id = in.at("id").get<std::string>();
  record.strategy = in.value("strategy", std::string());
  record.prompt_hash = in.value("prompt_hash", std::string());
  record.model = in.value("model", std::string());
  record.backend = in.value("backend", std::string());
  if (in.contains("failure") && !in["failure"].is_null())
    record.failure = in["failure"].get<std::string>();
  if (in.contains("labels") && !in["labels"].is_null()) {
    LabelVector labels;
    labels.values.assign(fw.dimensions.size(), 0);
    for (const auto& [key, value] : in["labels"].items())
      labels.values[fw.dimension_index(key)] = value.get<int>();
    record.labels = std::move(labels);
  }
  if (in.contains("scores") && !in["scores"].is_null()) {
    ScoreVector scores(fw.dimensions.size(), 0.0);
    for (const auto& [key, value] : in["scores"].items())
      scores[fw.dimension_index(key)] = value.get<double>();
    record.scores = std::move(scores);
  }
  if (in.contains("diagnostics"))
    record.diagnostics = in["diagnostics"].get<std::vector<std::string>>();
  if (record.failure && record.labels)
    throw ParseError("record " + record.id + " has both labels and a failure");
  return record;
}

std::vector<PredictionRecord> read_records_jsonl(const std::filesystem::path& path,
                                                 const Framework& fw) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::vector<PredictionRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json(line, fw));
  }
  return records;
}

PredictionRecord classify(const TextInstance& instance, const Framework& fw, Client& client,
                          const PromptLibrary& prompts, const RunOptions& options) {
  check_strategy(fw, options.strategy);
  if (options.strategy.kind == PromptStrategy::Kind::chain)
    return classify_chain(instance, fw, client, prompts, options);

  PredictionRecord record = base_record(instance, fw, client, options);
  try {
    if (options.strategy.kind == PromptStrategy::Kind::all_at_once) {
      const std::string prompt =
          prompts.instance_prompt(fw, instance, options.strategy, options.lexicon);
      record.prompt_hash = prompt_hash(prompt);
      const Completion completion = client.complete(prompt, options.request);
      const std::string_view prefix =
          fw.name == "common_morality" ? "Action Two " : "";
      const ParsedOutput parsed = parse_label_block(completion.text, fw, prefix);
      record.diagnostics = parsed.diagnostics;
      record.labels = parsed.labels;
      if (fw.scheme.is_binary()) {
        if (completion.logprobs) {
          record.scores = score_vector(completion, parsed, fw, &record.diagnostics);
        } else {
          // Degraded mode: hard 0/1 scores keep downstream thresholding alive.
          ScoreVector hard(fw.dimensions.size());
          for (std::size_t i = 0; i < hard.size(); ++i)
            hard[i] = static_cast<double>(parsed.labels.values[i]);
          record.scores = std::move(hard);
          record.diagnostics.push_back("backend returned no logprobs; hard 0/1 scores");
        }
      }
    } else {  // one_by_one
      LabelVector labels;
      labels.values.assign(fw.dimensions.size(), 0);
      ScoreVector scores(fw.dimensions.size(), 0.0);
      for (std::size_t i = 0; i < fw.dimensions.size(); ++i) {
        const std::string prompt =
            prompts.one_by_one(fw, fw.dimensions[i], instance.text);
        if (i == 0) record.prompt_hash = prompt_hash(prompt);
        const Completion completion = client.complete(prompt, options.request);
        const auto [value, offset] = parse_single_label(completion.text, fw.scheme);
        labels.values[i] = value;
        scores[i] =
            score_single(completion, offset, value, record.diagnostics, fw.dimensions[i]);
      }
      record.labels = std::move(labels);
      record.scores = std::move(scores);
    }
  } catch (const std::exception& e) {
    record.labels.reset();
    record.scores.reset();
    record.failure = e.what();
  }
  return record;
}

PredictionRecord classify_chain(const TextInstance& instance, const Framework& fw,
                                Client& client, const PromptLibrary& prompts,
                                const RunOptions& options) {
  if (!fw.scheme.is_binary()) throw UsageError("chain requires a binary label scheme");
  RunOptions chain_options = options;
  chain_options.strategy.kind = PromptStrategy::Kind::chain;
  PredictionRecord record = base_record(instance, fw, client, chain_options);

  try {
    LabelVector finals;
    finals.values.assign(fw.dimensions.size(), 0);
    ScoreVector scores(fw.dimensions.size(), 0.0);

    if (options.sequential_chain) {
      // Textbook chain: each link sees only the predictions before it.
      std::map<std::string, int> so_far;
      for (std::size_t i = 0; i < fw.dimensions.size(); ++i) {
        const std::string prompt =
            i == 0 ? prompts.one_by_one(fw, fw.dimensions[i], instance.text)
                   : prompts.chain(fw, fw.dimensions[i], instance.text, so_far,
                                   /*allow_partial=*/true);
        if (i == 0) record.prompt_hash = prompt_hash(prompt);
        const Completion completion = client.complete(prompt, options.request);
        const auto [value, offset] = parse_single_label(completion.text, fw.scheme);
        finals.values[i] = value;
        scores[i] =
            score_single(completion, offset, value, record.diagnostics, fw.dimensions[i]);
        so_far[fw.dimensions[i]] = value;
      }
    } else {
      // Pass 1: one all-at-once request seeds every dimension.
      const std::string seed_prompt = prompts.instance_prompt(
          fw, instance, PromptStrategy{PromptStrategy::Kind::all_at_once}, nullptr);
      record.prompt_hash = prompt_hash(seed_prompt);
      const Completion seed_completion = client.complete(seed_prompt, options.request);
      const ParsedOutput seeds = parse_label_block(seed_completion.text, fw);

      // Pass 2: one chain prompt per target embedding the other predictions.
      for (std::size_t i = 0; i < fw.dimensions.size(); ++i) {
        std::map<std::string, int> others;
        for (std::size_t j = 0; j < fw.dimensions.size(); ++j)
          if (j != i) others[fw.dimensions[j]] = seeds.labels.values[j];
        const std::string prompt =
            prompts.chain(fw, fw.dimensions[i], instance.text, others);
        const Completion completion = client.complete(prompt, options.request);
        const auto [value, offset] = parse_single_label(completion.text, fw.scheme);
        finals.values[i] = value;
        scores[i] =
            score_single(completion, offset, value, record.diagnostics, fw.dimensions[i]);
      }
    }
    record.labels = std::move(finals);
    record.scores = std::move(scores);
  } catch (const std::exception& e) {
    record.labels.reset();
    record.scores.reset();
    record.failure = e.what();
  }
  return record;
}

BatchResult run_batch(const Dataset& dataset, Client& client, const PromptLibrary& prompts,
                      const RunOptions& options, const RecordSink& sink,
                      const ProgressFn& progress) {
  check_strategy(dataset.framework, options.strategy);
  if (options.concurrency < 1) throw UsageError("concurrency must be >= 1");

  const std::size_t n = dataset.instances.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&dataset](std::size_t a, std::size_t b) {
    return dataset.instances[a].id < dataset.instances[b].id;
  });

  std::vector<std::optional<PredictionRecord>> results(n);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t flushed = 0;
  std::size_t failures = 0;

  auto worker = [&]() {
    while (true) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= n) return;
      PredictionRecord record =
          classify(dataset.instances[order[slot]], dataset.framework, client, prompts,
                   options);
      std::lock_guard lock(mu);
      if (record.failed()) ++failures;
      results[slot] = std::move(record);
      while (flushed < n && results[flushed]) {
        if (sink) sink(*results[flushed]);
        ++flushed;
        if (progress) progress(flushed, n, failures);
      }
    }
  };

  const int workers = std::min<int>(options.concurrency, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
  }

  BatchResult batch;
  batch.records.reserve(n);
  for (auto& slot : results) batch.records.push_back(std::move(*slot));
  batch.failures = failures;
  return batch;
}

}  // namespace mova
