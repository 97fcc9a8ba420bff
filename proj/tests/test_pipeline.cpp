#include <doctest.h>

#include <cstring>
#include <map>
#include <set>

#include "mova/dataset.hpp"
#include "mova/pipeline.hpp"
#include "test_support.hpp"

using namespace mova;
using mova::test::block_completion;
using mova::test::LogprobPair;

namespace {

const std::string kPredictionsMarker = std::string("Predicted so far ") + "\xe2\x80\x94 ";

const PromptLibrary& library() {
  static PromptLibrary lib(mova::test::template_dir());
  return lib;
}

const Framework& mft() { return FrameworkRegistry::get("mft"); }

std::vector<LogprobPair> default_pairs(std::size_t n) {
  std::vector<LogprobPair> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.push_back({-0.2, -1.7});
  return pairs;
}

TextInstance instance_of(const std::string& id, const std::string& text) {
  TextInstance instance;
  instance.id = id;
  instance.text = text;
  return instance;
}

// Scripts one all-at-once reply for an instance.
void script_all_at_once(MockBackend& backend, const TextInstance& instance,
                        const std::vector<int>& labels) {
  const auto prompt = library().instance_prompt(mft(), instance, PromptStrategy{});
  backend.add(prompt, block_completion(mft(), labels, default_pairs(labels.size())));
}

// Scripts the 1-by-1 replies for an instance.
void script_one_by_one(MockBackend& backend, const TextInstance& instance,
                       const std::vector<int>& labels) {
  for (std::size_t i = 0; i < mft().dimensions.size(); ++i) {
    const auto prompt = library().one_by_one(mft(), mft().dimensions[i], instance.text);
    backend.add(prompt, mova::test::single_label_completion(labels[i], -0.3, -1.6));
  }
}

// Scripts the 5 pass-2 chain prompts given pass-1 seeds.
void script_chain_pass2(MockBackend& backend, const TextInstance& instance,
                        const std::vector<int>& seeds, const std::vector<int>& finals) {
  for (std::size_t i = 0; i < mft().dimensions.size(); ++i) {
    std::map<std::string, int> others;
    for (std::size_t j = 0; j < mft().dimensions.size(); ++j)
      if (j != i) others[mft().dimensions[j]] = seeds[j];
    const auto prompt = library().chain(mft(), mft().dimensions[i], instance.text, others);
    backend.add(prompt, mova::test::single_label_completion(finals[i], -0.25, -1.9));
  }
}

std::map<std::string, int> embedded_predictions(const std::string& prompt) {
  const auto pos = prompt.find(kPredictionsMarker);
  REQUIRE(pos != std::string::npos);
  std::string list = prompt.substr(pos + kPredictionsMarker.size());
  std::map<std::string, int> out;
  std::size_t start = 0;
  while (start < list.size()) {
    auto end = list.find("; ", start);
    if (end == std::string::npos) end = list.size();
    const std::string pair = list.substr(start, end - start);
    const auto colon = pair.rfind(": ");
    REQUIRE(colon != std::string::npos);
    out[pair.substr(0, colon)] = std::stoi(pair.substr(colon + 2));
    start = end == list.size() ? end : end + 2;
  }
  return out;
}

RunOptions options_for(PromptStrategy::Kind kind, int concurrency = 1) {
  RunOptions options;
  options.strategy.kind = kind;
  options.concurrency = concurrency;
  return options;
}

}  // namespace

TEST_CASE("classify all-at-once yields labels and scores from one request") {
  MockBackend backend;
  const auto instance = instance_of("a", "some text");
  script_all_at_once(backend, instance, {1, 0, 0, 1, 0});
  Client client(backend);
  const auto record =
      classify(instance, mft(), client, library(), options_for(PromptStrategy::Kind::all_at_once));
  CHECK_FALSE(record.failed());
  REQUIRE(record.labels.has_value());
  CHECK(record.labels->values == std::vector<int>{1, 0, 0, 1, 0});
  REQUIRE(record.scores.has_value());
  CHECK(record.scores->size() == 5);
  CHECK(backend.calls() == 1);
  CHECK(record.prompt_hash ==
        prompt_hash(library().instance_prompt(mft(), instance, PromptStrategy{})));
  CHECK(record.backend == "mock");
}

TEST_CASE("classify captures malformed output as a failure record") {
  MockBackend backend;
  const auto instance = instance_of("a", "some text");
  const auto prompt = library().instance_prompt(mft(), instance, PromptStrategy{});
  backend.add(prompt, mova::test::text_completion("I will not answer in JSON, sorry."));
  Client client(backend);
  const auto record =
      classify(instance, mft(), client, library(), options_for(PromptStrategy::Kind::all_at_once));
  CHECK(record.failed());
  CHECK_FALSE(record.labels.has_value());
  CHECK_FALSE(record.scores.has_value());
  CHECK(record.failure->find("block") != std::string::npos);
}

TEST_CASE("classify 1-by-1 issues one request per dimension") {
  MockBackend backend;
  const auto instance = instance_of("a", "text body");
  script_one_by_one(backend, instance, {0, 1, 0, 0, 1});
  Client client(backend);
  const auto record =
      classify(instance, mft(), client, library(), options_for(PromptStrategy::Kind::one_by_one));
  CHECK(backend.calls() == 5);
  REQUIRE(record.labels.has_value());
  CHECK(record.labels->values == std::vector<int>{0, 1, 0, 0, 1});
  REQUIRE(record.scores.has_value());
  for (std::size_t i = 0; i < 5; ++i) {
    if (record.labels->values[i] == 1) CHECK((*record.scores)[i] > 0.5);
    else CHECK((*record.scores)[i] < 0.5);
  }
}

TEST_CASE("classify_chain issues 1 + |dims| calls and embeds pass-1 predictions") {
  MockBackend backend;
  const auto instance = instance_of("a", "chain text");
  const std::vector<int> seeds{1, 0, 0, 0, 0};
  const std::vector<int> finals{1, 1, 0, 0, 0};
  script_all_at_once(backend, instance, seeds);
  script_chain_pass2(backend, instance, seeds, finals);
  Client client(backend);
  const auto record =
      classify(instance, mft(), client, library(), options_for(PromptStrategy::Kind::chain));

  CHECK(backend.calls() == 6);  // 1 + 5
  REQUIRE(record.labels.has_value());
  CHECK(record.labels->values == finals);
  CHECK(record.strategy == "chain");

  // Each pass-2 prompt embeds exactly the non-target pass-1 predictions.
  const auto prompts = backend.prompts_seen();
  int chain_prompts = 0;
  for (const auto& prompt : prompts) {
    if (prompt.find(kPredictionsMarker) == std::string::npos) continue;
    ++chain_prompts;
    const auto embedded = embedded_predictions(prompt);
    CHECK(embedded.size() == 4);
    for (const auto& [dim, value] : embedded)
      CHECK(value == seeds[mft().dimension_index(dim)]);
  }
  CHECK(chain_prompts == 5);
}

TEST_CASE("chain pass-1 failure aborts with zero pass-2 calls") {
  MockBackend backend;
  const auto instance = instance_of("a", "chain text");
  const auto prompt = library().instance_prompt(mft(), instance, PromptStrategy{});
  backend.add(prompt, mova::test::text_completion("no json today"));
  Client client(backend);
  const auto record =
      classify(instance, mft(), client, library(), options_for(PromptStrategy::Kind::chain));
  CHECK(record.failed());
  CHECK(backend.calls() == 1);
}

TEST_CASE("sequential chain issues |dims| calls with growing prediction lists") {
  MockBackend backend;
  const auto instance = instance_of("a", "seq text");
  const std::vector<int> labels{1, 0, 1, 0, 0};
  // Link 0 is a plain 1-by-1 prompt; later links carry earlier predictions.
  backend.add(library().one_by_one(mft(), mft().dimensions[0], instance.text),
              mova::test::single_label_completion(labels[0], -0.2, -2.0));
  std::map<std::string, int> so_far;
  for (std::size_t i = 1; i < mft().dimensions.size(); ++i) {
    so_far[mft().dimensions[i - 1]] = labels[i - 1];
    backend.add(library().chain(mft(), mft().dimensions[i], instance.text, so_far, true),
                mova::test::single_label_completion(labels[i], -0.2, -2.0));
  }
  Client client(backend);
  auto options = options_for(PromptStrategy::Kind::chain);
  options.sequential_chain = true;
  const auto record = classify(instance, mft(), client, library(), options);
  CHECK(backend.calls() == 5);
  REQUIRE(record.labels.has_value());
  CHECK(record.labels->values == labels);
  CHECK(backend.prompts_seen().front().find(kPredictionsMarker) == std::string::npos);
}

TEST_CASE("embedded prediction sets are invariant to canonical order") {
  // Same dimensions, permuted canonical order, same per-dimension seeds: each
  // target's embedded prediction set must be identical across the two orders.
  Framework permuted = mft();
  permuted.name = "mft_permuted";
  permuted.dimensions = {"Sanctity/Degradation", "Care/Harm", "Authority/Subversion",
                         "Fairness/Cheating", "Loyalty/Betrayal"};
  FrameworkRegistry::register_framework(permuted);
  const auto& fw2 = FrameworkRegistry::get("mft_permuted");

  const auto instance = instance_of("a", "permute me");
  std::map<std::string, int> seed_by_dim{{"Care/Harm", 1},
                                         {"Fairness/Cheating", 0},
                                         {"Loyalty/Betrayal", 1},
                                         {"Authority/Subversion", 0},
                                         {"Sanctity/Degradation", 0}};

  auto run_for = [&](const Framework& fw) {
    MockBackend backend;
    std::vector<int> seeds;
    for (const auto& dim : fw.dimensions) seeds.push_back(seed_by_dim.at(dim));
    const auto seed_prompt = library().instance_prompt(fw, instance, PromptStrategy{});
    backend.add(seed_prompt,
                block_completion(fw, seeds, default_pairs(fw.dimensions.size())));
    for (std::size_t i = 0; i < fw.dimensions.size(); ++i) {
      std::map<std::string, int> others;
      for (std::size_t j = 0; j < fw.dimensions.size(); ++j)
        if (j != i) others[fw.dimensions[j]] = seeds[j];
      backend.add(library().chain(fw, fw.dimensions[i], instance.text, others),
                  mova::test::single_label_completion(seeds[i], -0.2, -2.0));
    }
    Client client(backend);
    const auto record =
        classify(instance, fw, client, library(), options_for(PromptStrategy::Kind::chain));
    REQUIRE_FALSE(record.failed());
    // Collect each target's embedded set.
    std::map<std::string, std::map<std::string, int>> by_target;
    for (const auto& prompt : backend.prompts_seen()) {
      if (prompt.find(kPredictionsMarker) == std::string::npos) continue;
      const auto line_start = prompt.find("of:\n") + 4;
      const auto line_end = prompt.find('\n', line_start);
      by_target[prompt.substr(line_start, line_end - line_start)] =
          embedded_predictions(prompt);
    }
    return by_target;
  };

  const auto original = run_for(mft());
  const auto reordered = run_for(fw2);
  REQUIRE(original.size() == 5);
  REQUIRE(reordered.size() == 5);
  for (const auto& [target, predictions] : original)
    CHECK(reordered.at(target) == predictions);
}

TEST_CASE("run_batch yields one record per instance, ordered by id") {
  Dataset dataset;
  dataset.framework = mft();
  MockBackend backend;
  for (int i = 9; i >= 0; --i) {  // deliberately unsorted input
    auto instance = instance_of("id" + std::to_string(i), "text " + std::to_string(i));
    script_all_at_once(backend, instance, {i % 2, 0, 1, 0, 0});
    dataset.instances.push_back(instance);
  }
  Client client(backend);
  const auto result =
      run_batch(dataset, client, library(), options_for(PromptStrategy::Kind::all_at_once, 4));
  CHECK(result.records.size() == 10);
  CHECK(result.failures == 0);
  for (std::size_t i = 0; i < result.records.size(); ++i)
    CHECK(result.records[i].id == "id" + std::to_string(i));
}

TEST_CASE("run_batch is deterministic across concurrency levels") {
  Dataset dataset;
  dataset.framework = mft();
  MockBackend backend;
  for (int i = 0; i < 12; ++i) {
    auto instance = instance_of("k" + std::to_string(i), "text " + std::to_string(i));
    if (i % 5 == 3) {
      backend.add(library().instance_prompt(mft(), instance, PromptStrategy{}),
                  mova::test::text_completion("malformed"));
    } else {
      script_all_at_once(backend, instance, {i % 2, (i / 2) % 2, 0, 1, 0});
    }
    dataset.instances.push_back(instance);
  }
  Client client(backend);

  auto serialize = [&](int concurrency) {
    std::string out;
    const auto result = run_batch(dataset, client, library(),
                                  options_for(PromptStrategy::Kind::all_at_once, concurrency));
    for (const auto& record : result.records) out += record_to_json(record, mft()) + "\n";
    return out;
  };
  const auto k1 = serialize(1);
  const auto k4 = serialize(4);
  const auto k16 = serialize(16);
  CHECK(k1 == k4);
  CHECK(k4 == k16);
  CHECK(k1.find("malformed") == std::string::npos);
}

TEST_CASE("run_batch embeds per-instance failures without aborting") {
  Dataset dataset;
  dataset.framework = mft();
  MockBackend backend;
  for (int i = 0; i < 10; ++i) {
    auto instance = instance_of("f" + std::to_string(i), "text");
    instance.text = "text " + std::to_string(i);
    if (i < 2) {
      backend.add(library().instance_prompt(mft(), instance, PromptStrategy{}),
                  mova::test::text_completion("{\"Care/Harm\": banana}"));
    } else {
      script_all_at_once(backend, instance, {1, 0, 0, 0, 0});
    }
    dataset.instances.push_back(instance);
  }
  Client client(backend);
  std::vector<std::string> sink_ids;
  const auto result = run_batch(dataset, client, library(),
                                options_for(PromptStrategy::Kind::all_at_once, 3),
                                [&](const PredictionRecord& r) { sink_ids.push_back(r.id); });
  CHECK(result.records.size() == 10);
  CHECK(result.failures == 2);
  // The sink saw records in final (id) order despite concurrent workers.
  REQUIRE(sink_ids.size() == 10);
  for (std::size_t i = 0; i < sink_ids.size(); ++i)
    CHECK(sink_ids[i] == result.records[i].id);
  long failures = 0;
  for (const auto& record : result.records) failures += record.failed();
  CHECK(failures == 2);
}

TEST_CASE("a warm cache serves re-runs with zero backend calls") {
  mova::test::TempDir tmp("batch_cache");
  Dataset dataset;
  dataset.framework = mft();
  MockBackend backend;
  for (int i = 0; i < 6; ++i) {
    auto instance = instance_of("c" + std::to_string(i), "cached " + std::to_string(i));
    script_all_at_once(backend, instance, {1, 0, 0, 0, 0});
    dataset.instances.push_back(instance);
  }
  ResponseCache cache(tmp.path());
  Client client(backend, &cache);
  const auto cold = run_batch(dataset, client, library(),
                              options_for(PromptStrategy::Kind::all_at_once, 2));
  const int calls_after_cold = backend.calls();
  CHECK(calls_after_cold == 6);
  const auto warm = run_batch(dataset, client, library(),
                              options_for(PromptStrategy::Kind::all_at_once, 2));
  CHECK(backend.calls() == calls_after_cold);  // zero new calls
  REQUIRE(cold.records.size() == warm.records.size());
  for (std::size_t i = 0; i < cold.records.size(); ++i)
    CHECK(record_to_json(cold.records[i], mft()) == record_to_json(warm.records[i], mft()));
}

TEST_CASE("prediction records round-trip through JSONL") {
  mova::test::TempDir tmp("records");
  PredictionRecord record;
  record.id = "r1";
  record.labels = LabelVector{{1, 0, 0, 1, 0}};
  record.scores = ScoreVector{0.9, 0.2, 0.1, 0.8, 0.3};
  record.strategy = "all-at-once";
  record.prompt_hash = "abc";
  record.model = "gpt-4o-mini";
  record.backend = "mock";
  record.diagnostics = {"note"};

  const auto line = record_to_json(record, mft());
  CHECK(line.find("\"schema_version\":1") != std::string::npos);
  const auto parsed = record_from_json(line, mft());
  CHECK(parsed.id == record.id);
  CHECK(parsed.labels->values == record.labels->values);
  CHECK(*parsed.scores == *record.scores);
  CHECK(parsed.strategy == record.strategy);
  CHECK_FALSE(parsed.failed());

  PredictionRecord failure;
  failure.id = "r2";
  failure.failure = "boom";
  failure.strategy = "all-at-once";
  mova::test::write_file(tmp.file("records.jsonl"),
                         line + "\n" + record_to_json(failure, mft()) + "\n");
  const auto loaded = read_records_jsonl(tmp.file("records.jsonl"), mft());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[1].failed());

  // failure and labels are mutually exclusive
  CHECK_THROWS_AS(
      record_from_json("{\"id\":\"x\",\"failure\":\"f\",\"labels\":{\"Care/Harm\":1,"
                       "\"Fairness/Cheating\":0,\"Loyalty/Betrayal\":0,"
                       "\"Authority/Subversion\":0,\"Sanctity/Degradation\":0}}",
                       mft()),
      ParseError);
}

TEST_CASE("strategy legality is checked before the batch starts") {
  Dataset dataset;
  dataset.framework = FrameworkRegistry::get("values10");
  dataset.instances.push_back(instance_of("a", "t"));
  MockBackend backend;
  Client client(backend);
  CHECK_THROWS_AS(run_batch(dataset, client, library(),
                            options_for(PromptStrategy::Kind::one_by_one)),
                  UsageError);
  CHECK_THROWS_AS(run_batch(dataset, client, library(),
                            options_for(PromptStrategy::Kind::chain)),
                  UsageError);
  auto bad = options_for(PromptStrategy::Kind::all_at_once);
  bad.concurrency = 0;
  CHECK_THROWS_AS(run_batch(dataset, client, library(), bad), UsageError);
}

TEST_CASE("ternary frameworks classify without scores") {
  const auto& values10 = FrameworkRegistry::get("values10");
  TextInstance instance = instance_of("v1", "an action description");
  MockBackend backend;
  std::vector<int> labels(10, 0);
  labels[0] = 1;   // Power: Y
  labels[1] = -1;  // Achievement: N
  backend.add(library().instance_prompt(values10, instance, PromptStrategy{}),
              mova::test::text_completion(mova::test::label_block_text(values10, labels)));
  Client client(backend);
  const auto record = classify(instance, values10, client, library(),
                               options_for(PromptStrategy::Kind::all_at_once));
  REQUIRE_FALSE(record.failed());
  CHECK(record.labels->values == labels);
  CHECK_FALSE(record.scores.has_value());  // undefined for ternary schemes

  // Records with ternary labels round-trip through JSONL.
  const auto line = record_to_json(record, values10);
  CHECK(record_from_json(line, values10).labels->values == labels);
}

TEST_CASE("webis instances classify through their aux fields") {
  const auto& webis = FrameworkRegistry::get("webis20");
  TextInstance instance = instance_of("w1", "the premise");
  instance.aux["conclusion"] = "a conclusion";
  instance.aux["stance"] = "in favor of";
  MockBackend backend;
  std::vector<int> labels(20, 0);
  labels[3] = 1;  // Achievement
  backend.add(library().instance_prompt(webis, instance, PromptStrategy{}),
              mova::test::text_completion(mova::test::label_block_text(webis, labels)));
  Client client(backend);
  const auto record = classify(instance, webis, client, library(),
                               options_for(PromptStrategy::Kind::all_at_once));
  REQUIRE_FALSE(record.failed());
  CHECK(record.labels->at(webis, "Achievement") == 1);
  REQUIRE(record.scores.has_value());  // hard scores: backend sent no logprobs
  CHECK((*record.scores)[3] == 1.0);
}

TEST_CASE("moralchoice instances score action two") {
  const auto& cm = FrameworkRegistry::get("common_morality");
  TextInstance instance = instance_of("m1", "lie to the customer");
  instance.aux["scenario"] = "a sales call";
  instance.aux["action1"] = "tell the truth";
  MockBackend backend;
  std::string reply = "{";
  for (const char* action : {"Action One ", "Action Two "})
    for (const auto& rule : cm.dimensions)
      reply += "\"" + std::string(action) + rule + "\": " +
               ((std::string(action) == "Action Two " && rule == "Do not deceive") ? "1"
                                                                                   : "0") +
               ", ";
  reply.erase(reply.size() - 2);
  reply += "}";
  backend.add(library().instance_prompt(cm, instance, PromptStrategy{}),
              mova::test::text_completion(reply));
  Client client(backend);
  const auto record = classify(instance, cm, client, library(),
                               options_for(PromptStrategy::Kind::all_at_once));
  REQUIRE_FALSE(record.failed());
  CHECK(record.labels->at(cm, "Do not deceive") == 1);
  CHECK(record.labels->at(cm, "Do not kill") == 0);
}

TEST_CASE("a backend without logprobs degrades to hard 0/1 scores") {
  MockBackend backend;
  const auto instance = instance_of("d1", "degraded run");
  const std::vector<int> labels{1, 0, 1, 0, 0};
  backend.add(library().instance_prompt(mft(), instance, PromptStrategy{}),
              mova::test::text_completion(mova::test::label_block_text(mft(), labels)));
  Client client(backend);
  const auto record = classify(instance, mft(), client, library(),
                               options_for(PromptStrategy::Kind::all_at_once));
  REQUIRE_FALSE(record.failed());
  REQUIRE(record.scores.has_value());
  for (std::size_t i = 0; i < 5; ++i)
    CHECK((*record.scores)[i] == static_cast<double>(labels[i]));
  bool noted = false;
  for (const auto& note : record.diagnostics)
    noted |= note.find("no logprobs") != std::string::npos;
  CHECK(noted);
}
