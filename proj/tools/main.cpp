// mova: classify moral/value relevance in text with LLM prompting strategies,
// combine LLM and lexicon scores, and evaluate predictions.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "mova/audit.hpp"
#include "mova/dataset.hpp"
#include "mova/lexicon.hpp"
#include "mova/metrics.hpp"
#include "mova/pipeline.hpp"

namespace {

using namespace mova;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;

struct BackendFlags {
  std::string mock_script;
  std::string base_url = "https://api.openai.com";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string cache_dir;
};

struct RequestFlags {
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  double top_p = 0.0;
  int max_tokens = 4096;
  int top_logprobs = 20;
  bool no_logprobs = false;

  RequestConfig to_config() const {
    RequestConfig config;
    config.model = model;
    config.temperature = temperature;
    config.top_p = top_p;
    config.max_tokens = max_tokens;
    config.top_logprobs = top_logprobs;
    config.logprobs = !no_logprobs;
    return config;
  }
};

void add_backend_flags(CLI::App* cmd, BackendFlags& flags) {
  cmd->add_option("--mock", flags.mock_script,
                  "Mock script (JSON map of prompt hash -> completion); runs offline");
  cmd->add_option("--base-url", flags.base_url, "Chat-completion endpoint base URL");
  cmd->add_option("--api-key-env", flags.api_key_env,
                  "Environment variable holding the API key");
  cmd->add_option("--cache-dir", flags.cache_dir, "On-disk response cache directory");
}

void add_request_flags(CLI::App* cmd, RequestFlags& flags) {
  cmd->add_option("--model", flags.model, "Model identifier");
  cmd->add_option("--temperature", flags.temperature, "Sampling temperature");
  cmd->add_option("--top-p", flags.top_p, "Nucleus sampling mass");
  cmd->add_option("--max-tokens", flags.max_tokens, "Completion token limit");
  cmd->add_option("--top-logprobs", flags.top_logprobs, "Candidates per position");
  cmd->add_flag("--no-logprobs", flags.no_logprobs, "Disable token logprobs");
}

struct Runtime {
  std::unique_ptr<Backend> backend;
  std::unique_ptr<ResponseCache> cache;
  std::unique_ptr<Client> client;
};

Runtime make_runtime(const BackendFlags& flags) {
  Runtime runtime;
  if (!flags.mock_script.empty()) {
    auto mock = std::make_unique<MockBackend>();
    mock->load_script_file(flags.mock_script);
    runtime.backend = std::move(mock);
  } else {
    HttpBackendConfig config;
    config.base_url = flags.base_url;
    config.api_key_env = flags.api_key_env;
    runtime.backend = std::make_unique<HttpBackend>(std::move(config));
  }
  if (!flags.cache_dir.empty())
    runtime.cache = std::make_unique<ResponseCache>(flags.cache_dir);
  runtime.client = std::make_unique<Client>(*runtime.backend, runtime.cache.get());
  return runtime;
}

PromptLibrary make_library(const std::string& template_dir) {
  return PromptLibrary(template_dir.empty() ? PromptLibrary::default_dir()
                                            : std::filesystem::path(template_dir));
}

std::vector<double> read_number_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::vector<double> values;
  double value;
  while (in >> value) values.push_back(value);
  if (!in.eof()) throw ParseError(path.string() + ": non-numeric content");
  return values;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << content;
}

// Joins non-failed prediction records against gold instances by id.
struct Joined {
  std::vector<const TextInstance*> instances;
  std::vector<const PredictionRecord*> records;
  std::size_t skipped_failures = 0;
};

Joined join_by_id(const Dataset& gold, const std::vector<PredictionRecord>& records) {
  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& record : records) {
    if (!by_id.emplace(record.id, &record).second)
      throw UsageError("duplicate prediction record for id '" + record.id + "'");
  }
  Joined joined;
  for (const auto& instance : gold.instances) {
    auto it = by_id.find(instance.id);
    if (it == by_id.end())
      throw UsageError("no prediction record for gold id '" + instance.id + "'");
    if (it->second->failed()) {
      ++joined.skipped_failures;
      continue;
    }
    if (!instance.gold)
      throw UsageError("gold instance '" + instance.id + "' has no labels");
    joined.instances.push_back(&instance);
    joined.records.push_back(it->second);
  }
  if (joined.instances.empty()) throw UsageError("no scorable (prediction, gold) pairs");
  return joined;
}

int cmd_classify(const std::string& framework_name, const std::string& strategy_spec,
                 const std::string& in_path, const std::string& out_path,
                 const BackendFlags& backend_flags, const RequestFlags& request_flags,
                 const std::string& template_dir, const std::string& lexicon_path,
                 int concurrency, bool sequential_chain, bool quiet) {
  const auto& fw = FrameworkRegistry::get(framework_name);
  const auto dataset = read_dataset(in_path, fw);
  for (const auto& violation : validate_dataset(dataset).violations)
    std::cerr << "warning: instance '" << violation.instance_id
              << "': " << violation.detail << '\n';
  const auto library = make_library(template_dir);
  auto runtime = make_runtime(backend_flags);

  RunOptions options;
  options.strategy = PromptStrategy::parse(strategy_spec);
  options.request = request_flags.to_config();
  options.concurrency = concurrency;
  options.sequential_chain = sequential_chain;
  Lexicon lexicon;
  if (!lexicon_path.empty()) {
    lexicon = load_lexicon(lexicon_path);
    options.lexicon = &lexicon;
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + out_path);
  const auto sink = [&](const PredictionRecord& record) {
    out << record_to_json(record, fw) << '\n';
    out.flush();  // append-only; interrupted runs resume from the cache
  };
  const auto progress = [&](std::size_t done, std::size_t total, std::size_t failures) {
    if (!quiet && (done % 25 == 0 || done == total))
      std::cerr << "processed " << done << "/" << total << " (" << failures
                << " failures)\n";
  };

  const auto result = run_batch(dataset, *runtime.client, library, options, sink, progress);
  if (!quiet)
    std::cerr << result.records.size() << " records written to " << out_path << ", "
              << result.failures << " failures\n";
  return result.failures == 0 ? kExitOk : kExitPartial;
}

int cmd_eval(const std::string& protocol, const std::string& pred_path,
             const std::string& gold_path, const std::string& framework_name,
             const std::string& out_path, const std::string& csv_path) {
  const auto& fw = FrameworkRegistry::get(framework_name);
  const auto gold = read_dataset(gold_path, fw);
  const auto records = read_records_jsonl(pred_path, fw);
  const auto joined = join_by_id(gold, records);
  if (joined.skipped_failures > 0)
    std::cerr << "warning: " << joined.skipped_failures
              << " failed prediction records skipped\n";

  MetricReport report;
  if (protocol == "standard" || protocol == "webis") {
    std::map<std::string, std::vector<int>> preds, gold_columns;
    std::map<std::string, std::vector<double>> scores;
    bool all_scored = true;
    for (std::size_t row = 0; row < joined.records.size(); ++row) {
      const auto& record = *joined.records[row];
      const auto& instance = *joined.instances[row];
      for (std::size_t d = 0; d < fw.dimensions.size(); ++d) {
        preds[fw.dimensions[d]].push_back(record.labels->values[d]);
        gold_columns[fw.dimensions[d]].push_back(instance.gold->values[d]);
        if (record.scores)
          scores[fw.dimensions[d]].push_back((*record.scores)[d]);
        else
          all_scored = false;
      }
    }
    if (protocol == "standard") {
      report = standard_report(preds, gold_columns, fw.dimensions,
                               all_scored ? &scores : nullptr);
    } else {
      report = macro_f1_webis(preds, gold_columns, fw.dimensions);
      for (const auto& dim : fw.dimensions) {
        auto& metrics = report.per_dimension[dim];
        const long rel = metrics.counts.tp + metrics.counts.fn;
        metrics.baseline_f1 = random_baseline_f1(
            static_cast<double>(rel) / metrics.counts.total());
      }
    }
  } else if (protocol == "valeval" || protocol == "valuenet") {
    std::vector<int> pred_values, gold_values;
    std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> by_dimension;
    for (std::size_t row = 0; row < joined.records.size(); ++row) {
      const auto& instance = *joined.instances[row];
      auto target = instance.aux.find("target");
      if (target == instance.aux.end())
        throw UsageError("instance '" + instance.id +
                         "' has no aux 'target' dimension (required by " + protocol + ")");
      const std::size_t d = fw.dimension_index(target->second);
      pred_values.push_back(joined.records[row]->labels->values[d]);
      gold_values.push_back(instance.gold->values[d]);
      by_dimension[target->second].first.push_back(
          static_cast<double>(joined.records[row]->labels->values[d]));
      by_dimension[target->second].second.push_back(instance.gold->values[d]);
    }
    report.protocol = protocol;
    report.n = static_cast<long>(pred_values.size());
    report.dimensions = fw.dimensions;
    if (protocol == "valeval") {
      report.accuracy = valeval_accuracy(pred_values, gold_values);
    } else {
      std::vector<double> raw(pred_values.begin(), pred_values.end());
      const auto vn = valuenet_metrics(raw, gold_values);
      report.accuracy = vn.accuracy;
      report.per_direction = vn.per_direction;
      for (const auto& [dim, columns] : by_dimension) {
        DimensionMetrics metrics;
        metrics.rates.accuracy =
            valuenet_metrics(columns.first, columns.second).accuracy;
        report.per_dimension[dim] = metrics;
      }
    }
  } else {
    throw UsageError("unknown protocol '" + protocol + "'");
  }

  const auto json_text = report_to_json(report);
  if (out_path.empty()) {
    std::cout << json_text << '\n';
  } else {
    write_text(out_path, json_text + "\n");
    std::cerr << "report written to " << out_path << '\n';
  }
  if (!csv_path.empty()) write_text(csv_path, report_to_csv(report));
  return kExitOk;
}

int cmd_compare(const std::string& x_path, const std::string& y_path,
                const std::string& alternative_name) {
  const auto x = read_number_file(x_path);
  const auto y = read_number_file(y_path);
  Alternative alternative;
  if (alternative_name == "greater") alternative = Alternative::greater;
  else if (alternative_name == "less") alternative = Alternative::less;
  else if (alternative_name == "two-sided") alternative = Alternative::two_sided;
  else throw UsageError("unknown alternative '" + alternative_name + "'");

  try {
    const auto result = wilcoxon_signed_rank(x, y, alternative);
    std::cout << "n=" << result.n << " W+=" << result.w_plus << " p=" << result.p_value
              << (result.exact ? " (exact)" : " (normal approximation)");
    const auto stars = significance_stars(result.p_value);
    if (!stars.empty()) std::cout << ' ' << stars;
    std::cout << '\n';
  } catch (const UsageError& e) {
    if (std::string(e.what()).find("zero") != std::string::npos) {
      std::cout << "degenerate case: all paired differences are zero\n";
      return kExitOk;
    }
    throw;
  }
  return kExitOk;
}

int cmd_correlate(const std::string& in_path, const std::string& framework_name,
                  const std::string& out_path, bool yates) {
  const auto& fw = FrameworkRegistry::get(framework_name);
  const auto dataset = read_dataset(in_path, fw);
  const auto entries = correlate_pairs(dataset, yates);
  const auto csv = correlation_to_csv(entries);
  if (out_path.empty()) std::cout << csv;
  else write_text(out_path, csv);
  return kExitOk;
}

int cmd_calibrate(const std::string& scores_path, const std::string& pred_path,
                  const std::string& framework_name, const std::string& dimension,
                  double percentile) {
  std::vector<double> scores;
  if (!scores_path.empty()) {
    scores = read_number_file(scores_path);
  } else {
    if (pred_path.empty() || framework_name.empty() || dimension.empty())
      throw UsageError("need --scores, or --pred with --framework and --dimension");
    const auto& fw = FrameworkRegistry::get(framework_name);
    const std::size_t d = fw.dimension_index(dimension);
    for (const auto& record : read_records_jsonl(pred_path, fw)) {
      if (record.failed() || !record.scores) continue;
      scores.push_back((*record.scores)[d]);
    }
  }
  const double threshold = calibrate_threshold(scores, percentile);
  const auto above =
      std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
  std::cout << "threshold=" << threshold << " n=" << scores.size()
            << " above=" << above << '\n';
  return kExitOk;
}

// Shared by refine-lexicon and tune-lambda: per-instance label vectors for
// records joined against the gold set.
struct AlignedPredictions {
  std::vector<LabelVector> lexical, llm, gold;
  std::vector<std::string> texts;
  std::vector<ScoreVector> lexical_scores, llm_scores;
};

AlignedPredictions align_two_runs(const Dataset& gold,
                                  const std::vector<PredictionRecord>& lexical,
                                  const std::vector<PredictionRecord>& llm) {
  std::map<std::string, const PredictionRecord*> lex_by_id, llm_by_id;
  for (const auto& record : lexical) lex_by_id[record.id] = &record;
  for (const auto& record : llm) llm_by_id[record.id] = &record;
  AlignedPredictions aligned;
  for (const auto& instance : gold.instances) {
    auto lex = lex_by_id.find(instance.id);
    auto model = llm_by_id.find(instance.id);
    if (lex == lex_by_id.end() || model == llm_by_id.end())
      throw UsageError("no prediction pair for gold id '" + instance.id + "'");
    if (lex->second->failed() || model->second->failed()) continue;
    if (!instance.gold)
      throw UsageError("gold instance '" + instance.id + "' has no labels");
    aligned.lexical.push_back(*lex->second->labels);
    aligned.llm.push_back(*model->second->labels);
    aligned.gold.push_back(*instance.gold);
    aligned.texts.push_back(instance.text);
    auto scores_of = [](const PredictionRecord& record) {
      if (record.scores) return *record.scores;
      ScoreVector hard(record.labels->values.size());
      for (std::size_t i = 0; i < hard.size(); ++i)
        hard[i] = static_cast<double>(record.labels->values[i]);
      return hard;
    };
    aligned.lexical_scores.push_back(scores_of(*lex->second));
    aligned.llm_scores.push_back(scores_of(*model->second));
  }
  if (aligned.gold.empty()) throw UsageError("no aligned (lexical, llm, gold) triples");
  return aligned;
}

int cmd_refine_lexicon(const std::string& base_path, const std::string& candidates_path,
                       const std::string& pred_lex_path, const std::string& pred_llm_path,
                       const std::string& gold_path, const std::string& framework_name,
                       const std::string& out_path) {
  const auto& fw = FrameworkRegistry::get(framework_name);
  const auto base = load_lexicon(base_path);
  std::optional<Lexicon> candidates;
  if (!candidates_path.empty()) candidates = load_lexicon(candidates_path);
  const auto gold = read_dataset(gold_path, fw);
  const auto aligned = align_two_runs(gold, read_records_jsonl(pred_lex_path, fw),
                                      read_records_jsonl(pred_llm_path, fw));
  const auto refined =
      refine_lexicon(base, aligned.lexical, aligned.llm, aligned.gold, aligned.texts, fw,
                     candidates ? &*candidates : nullptr);
  save_lexicon(refined, out_path);
  for (const auto& dim : refined.dimensions()) {
    const auto& before = base.words(dim);
    const auto& after = refined.words(dim);
    long added = 0, removed = 0;
    const std::set<std::string> before_set(before.begin(), before.end());
    const std::set<std::string> after_set(after.begin(), after.end());
    for (const auto& word : after)
      if (!before_set.count(word)) ++added;
    for (const auto& word : before)
      if (!after_set.count(word)) ++removed;
    std::cout << dim << ": " << before.size() << " -> " << after.size() << " (+" << added
              << "/-" << removed << ")\n";
  }
  std::cerr << "refined lexicon written to " << out_path << '\n';
  return kExitOk;
}

int cmd_tune_lambda(const std::string& pred_lex_path, const std::string& pred_llm_path,
                    const std::string& gold_path, const std::string& framework_name,
                    const std::string& out_path) {
  const auto& fw = FrameworkRegistry::get(framework_name);
  if (!fw.scheme.is_binary()) throw UsageError("lambda tuning needs a binary framework");
  const auto gold = read_dataset(gold_path, fw);
  const auto aligned = align_two_runs(gold, read_records_jsonl(pred_lex_path, fw),
                                      read_records_jsonl(pred_llm_path, fw));
  std::string out_text = "dimension,lambda,auc\n";
  for (std::size_t d = 0; d < fw.dimensions.size(); ++d) {
    std::vector<double> lex, llm;
    std::vector<int> y;
    for (std::size_t i = 0; i < aligned.gold.size(); ++i) {
      lex.push_back(aligned.lexical_scores[i][d]);
      llm.push_back(aligned.llm_scores[i][d]);
      y.push_back(aligned.gold[i].values[d]);
    }
    std::string line;
    try {
      const auto choice = tune_lambda(lex, llm, y);
      line = fw.dimensions[d] + "," + std::to_string(choice.lambda) + "," +
             std::to_string(choice.auc);
    } catch (const UsageError& e) {
      line = fw.dimensions[d] + ",undefined,undefined";
      std::cerr << "warning: " << fw.dimensions[d] << ": " << e.what() << '\n';
    }
    out_text += line + "\n";
  }
  if (out_path.empty()) std::cout << out_text;
  else write_text(out_path, out_text);
  return kExitOk;
}

int cmd_train_lexicon(const std::string& gold_path, const std::string& framework_name,
                      const std::string& lexicon_path, const std::string& models_out,
                      const std::string& pred_out, unsigned seed) {
  const auto& fw = FrameworkRegistry::get(framework_name);
  const auto train = read_dataset(gold_path, fw);
  const auto lexicon = load_lexicon(lexicon_path);
  TrainSettings settings;
  settings.seed = seed;

  std::vector<LexiconModel> models;
  for (const auto& dim : fw.dimensions) {
    if (!lexicon.has(dim)) {
      std::cerr << "warning: lexicon has no section for " << dim << "; skipped\n";
      continue;
    }
    auto model = train_lexical_classifier(train, dim, lexicon, settings);
    std::cout << dim << ": learning_rate=" << model.learning_rate
              << " cv_auc=" << model.cv_auc << '\n';
    models.push_back(std::move(model));
  }
  if (models.empty()) throw UsageError("no dimension could be trained");
  if (!models_out.empty()) {
    save_models(models, CombinerModel{}, models_out);
    std::cerr << "models written to " << models_out << '\n';
  }

  if (!pred_out.empty()) {
    std::ofstream out(pred_out, std::ios::binary);
    if (!out) throw UsageError("cannot write " + pred_out);
    for (const auto& instance : train.instances) {
      PredictionRecord record;
      record.id = instance.id;
      record.strategy = "lexical";
      record.model = "lexical-" + lexicon_path;
      record.backend = "lexicon";
      LabelVector labels;
      labels.values.assign(fw.dimensions.size(), 0);
      ScoreVector scores(fw.dimensions.size(), 0.0);
      for (const auto& model : models) {
        const std::size_t d = fw.dimension_index(model.dimension);
        const double u = predict_lexical(
            model, featurize(instance.text, lexicon, model.dimension));
        scores[d] = u;
        labels.values[d] = u >= 0.5 ? 1 : 0;
      }
      record.labels = std::move(labels);
      record.scores = std::move(scores);
      out << record_to_json(record, fw) << '\n';
    }
    std::cerr << "lexical predictions written to " << pred_out << '\n';
  }
  return kExitOk;
}

int cmd_audit(const std::string& questionnaire_path, const std::string& framework_name,
              const BackendFlags& backend_flags, const RequestFlags& request_flags,
              const std::string& template_dir, double threshold, int concurrency,
              const std::string& out_path) {
  const auto& fw = FrameworkRegistry::get(framework_name);
  const auto items = read_questionnaire_csv(questionnaire_path);
  const auto library = make_library(template_dir);
  auto runtime = make_runtime(backend_flags);
  RunOptions options;
  options.request = request_flags.to_config();
  options.concurrency = concurrency;
  const auto result = audit_questionnaire(items, fw, *runtime.client, library, options,
                                          threshold);
  std::cout << audit_table(result);
  if (!out_path.empty()) {
    write_text(out_path, audit_to_json(result) + "\n");
    std::cerr << "audit report written to " << out_path << '\n';
  }
  return result.failures == 0 ? kExitOk : kExitPartial;
}

int cmd_prompt(const std::string& framework_name, const std::string& strategy_spec,
               const std::string& text, const std::string& dimension,
               const std::string& template_dir, const std::string& lexicon_path,
               bool hash_only) {
  const auto& fw = FrameworkRegistry::get(framework_name);
  const auto library = make_library(template_dir);
  const auto strategy = PromptStrategy::parse(strategy_spec);
  Lexicon lexicon;
  const Lexicon* lexicon_ptr = nullptr;
  if (!lexicon_path.empty()) {
    lexicon = load_lexicon(lexicon_path);
    lexicon_ptr = &lexicon;
  }
  std::string prompt;
  if (strategy.kind == PromptStrategy::Kind::one_by_one) {
    if (dimension.empty()) throw UsageError("--dimension is required for 1-by-1");
    prompt = library.one_by_one(fw, dimension, text);
  } else {
    TextInstance instance;
    instance.id = "prompt";
    instance.text = text;
    prompt = library.instance_prompt(fw, instance, strategy, lexicon_ptr);
  }
  if (hash_only) std::cout << prompt_hash(prompt) << '\n';
  else std::cout << prompt << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moral/value relevance classification and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();  // lets `mova classify --config f` reach the app-level option
  app.set_config("--config", "", "Key-value config file; flags override it");

  // classify
  std::string framework = "mft", strategy = "all-at-once", in_path, out_path;
  std::string template_dir, lexicon_path;
  int concurrency = 1;
  bool sequential_chain = false, quiet = false;
  BackendFlags classify_backend;
  RequestFlags classify_request;
  auto* classify = app.add_subcommand("classify", "Run a classification batch")->configurable();
  classify->add_option("--framework", framework, "Framework name")->required();
  classify->add_option("--strategy", strategy,
                       "1-by-1 | all-at-once[+definition+example+reason+lexicon] | chain");
  classify->add_option("--in", in_path, "Input dataset (.jsonl or .csv)")->required();
  classify->add_option("--out", out_path, "Output prediction JSONL")->required();
  classify->add_option("--templates", template_dir, "Template asset directory");
  classify->add_option("--lexicon", lexicon_path, "Lexicon file for +lexicon prompts");
  classify->add_option("--concurrency", concurrency, "In-flight request window");
  classify->add_flag("--sequential-chain", sequential_chain,
                     "Textbook sequential chain instead of the seeded variant");
  classify->add_flag("--quiet", quiet, "Suppress progress output");
  add_backend_flags(classify, classify_backend);
  add_request_flags(classify, classify_request);

  // eval
  std::string protocol = "standard", pred_path, gold_path, eval_framework = "mft";
  std::string report_path, csv_path;
  auto* eval = app.add_subcommand("eval", "Score predictions against gold labels")->configurable();
  eval->add_option("--protocol", protocol, "standard | webis | valeval | valuenet");
  eval->add_option("--pred", pred_path, "Prediction JSONL")->required();
  eval->add_option("--gold", gold_path, "Gold dataset (.jsonl or .csv)")->required();
  eval->add_option("--framework", eval_framework, "Framework name")->required();
  eval->add_option("--out", report_path, "Write the JSON report here");
  eval->add_option("--csv", csv_path, "Write a CSV report here");

  // compare
  std::string x_path, y_path, alternative = "greater";
  auto* compare = app.add_subcommand("compare", "Wilcoxon signed-rank test on two arrays")->configurable();
  compare->add_option("--x", x_path, "First metric array (text file)")->required();
  compare->add_option("--y", y_path, "Second metric array (text file)")->required();
  compare->add_option("--alternative", alternative, "greater | less | two-sided");

  // correlate
  std::string correlate_in, correlate_framework = "mft", correlate_out;
  bool yates = false;
  auto* correlate = app.add_subcommand("correlate", "Pairwise label phi/chi-square table")->configurable();
  correlate->add_option("--in", correlate_in, "Gold dataset")->required();
  correlate->add_option("--framework", correlate_framework, "Framework name")->required();
  correlate->add_option("--out", correlate_out, "Write the CSV table here");
  correlate->add_flag("--yates", yates, "Apply the Yates continuity correction");

  // calibrate
  std::string scores_path, calibrate_pred, calibrate_framework, calibrate_dimension;
  double percentile = 95.0;
  auto* calibrate = app.add_subcommand("calibrate", "Nearest-rank percentile threshold")->configurable();
  calibrate->add_option("--scores", scores_path, "Score file (one number per line)");
  calibrate->add_option("--pred", calibrate_pred, "Prediction JSONL to pull scores from");
  calibrate->add_option("--framework", calibrate_framework, "Framework for --pred");
  calibrate->add_option("--dimension", calibrate_dimension, "Dimension for --pred");
  calibrate->add_option("--percentile", percentile, "Percentile in (0,100)");

  // refine-lexicon
  std::string base_path, candidates_path, refine_pred_lex, refine_pred_llm;
  std::string refine_gold, refine_framework = "mft", refine_out;
  auto* refine = app.add_subcommand("refine-lexicon",
                                    "Performance-driven lexicon refinement")->configurable();
  refine->add_option("--base", base_path, "Base lexicon file")->required();
  refine->add_option("--candidates", candidates_path, "Candidate word lexicon");
  refine->add_option("--pred-lex", refine_pred_lex, "Lexicon-route predictions")->required();
  refine->add_option("--pred-llm", refine_pred_llm, "LLM-route predictions")->required();
  refine->add_option("--gold", refine_gold, "Gold dataset")->required();
  refine->add_option("--framework", refine_framework, "Framework name")->required();
  refine->add_option("--out", refine_out, "Refined lexicon output path")->required();

  // tune-lambda
  std::string tune_pred_lex, tune_pred_llm, tune_gold, tune_framework = "mft", tune_out;
  auto* tune = app.add_subcommand("tune-lambda", "Tune LexLLM mixing weights per dimension")->configurable();
  tune->add_option("--pred-lex", tune_pred_lex, "Lexical-score predictions")->required();
  tune->add_option("--pred-llm", tune_pred_llm, "LLM-score predictions")->required();
  tune->add_option("--gold", tune_gold, "Gold dataset")->required();
  tune->add_option("--framework", tune_framework, "Framework name")->required();
  tune->add_option("--out", tune_out, "Write dimension,lambda,auc CSV here");

  // train-lexicon
  std::string train_gold, train_framework = "mft", train_lexicon_path, train_models_out;
  std::string train_pred_out;
  unsigned train_seed = 42;
  auto* train = app.add_subcommand(
      "train-lexicon", "Fit per-dimension lexical logistic classifiers")->configurable();
  train->add_option("--gold", train_gold, "Training dataset with gold labels")->required();
  train->add_option("--framework", train_framework, "Framework name")->required();
  train->add_option("--lexicon", train_lexicon_path, "Lexicon file")->required();
  train->add_option("--out", train_models_out, "Write the model key-value file here");
  train->add_option("--pred", train_pred_out,
                    "Write lexical prediction records (JSONL) for the training set");
  train->add_option("--seed", train_seed, "Cross-validation shuffle seed");

  // audit
  std::string questionnaire_path, audit_framework = "mft", audit_out, audit_templates;
  double flag_threshold = 0.5;
  int audit_concurrency = 1;
  BackendFlags audit_backend;
  RequestFlags audit_request;
  auto* audit = app.add_subcommand("audit", "Score questionnaire items for multi-loading")->configurable();
  audit->add_option("--questionnaire", questionnaire_path,
                    "CSV with id,text,prescribed columns")->required();
  audit->add_option("--framework", audit_framework, "Framework name")->required();
  audit->add_option("--threshold", flag_threshold, "Multi-load flag threshold");
  audit->add_option("--templates", audit_templates, "Template asset directory");
  audit->add_option("--concurrency", audit_concurrency, "In-flight request window");
  audit->add_option("--out", audit_out, "Write the JSON report here");
  add_backend_flags(audit, audit_backend);
  add_request_flags(audit, audit_request);

  // prompt
  std::string prompt_framework = "mft", prompt_strategy = "all-at-once", prompt_text;
  std::string prompt_dimension, prompt_templates, prompt_lexicon;
  bool hash_only = false;
  auto* prompt = app.add_subcommand("prompt", "Render a prompt (or its hash)")->configurable();
  prompt->add_option("--framework", prompt_framework, "Framework name");
  prompt->add_option("--strategy", prompt_strategy, "Prompt strategy");
  prompt->add_option("--text", prompt_text, "Input text")->required();
  prompt->add_option("--dimension", prompt_dimension, "Dimension for 1-by-1");
  prompt->add_option("--templates", prompt_templates, "Template asset directory");
  prompt->add_option("--lexicon", prompt_lexicon, "Lexicon file for +lexicon prompts");
  prompt->add_flag("--hash", hash_only, "Print the prompt hash instead of the text");

  CLI11_PARSE(app, argc, argv);

  try {
    if (classify->parsed())
      return cmd_classify(framework, strategy, in_path, out_path, classify_backend,
                          classify_request, template_dir, lexicon_path, concurrency,
                          sequential_chain, quiet);
    if (eval->parsed())
      return cmd_eval(protocol, pred_path, gold_path, eval_framework, report_path,
                      csv_path);
    if (compare->parsed()) return cmd_compare(x_path, y_path, alternative);
    if (correlate->parsed())
      return cmd_correlate(correlate_in, correlate_framework, correlate_out, yates);
    if (calibrate->parsed())
      return cmd_calibrate(scores_path, calibrate_pred, calibrate_framework,
                           calibrate_dimension, percentile);
    if (refine->parsed())
      return cmd_refine_lexicon(base_path, candidates_path, refine_pred_lex,
                                refine_pred_llm, refine_gold, refine_framework,
                                refine_out);
    if (tune->parsed())
      return cmd_tune_lambda(tune_pred_lex, tune_pred_llm, tune_gold, tune_framework,
                             tune_out);
    if (train->parsed())
      return cmd_train_lexicon(train_gold, train_framework, train_lexicon_path,
                               train_models_out, train_pred_out, train_seed);
    if (audit->parsed())
      return cmd_audit(questionnaire_path, audit_framework, audit_backend, audit_request,
                       audit_templates, flag_threshold, audit_concurrency, audit_out);
    if (prompt->parsed())
      return cmd_prompt(prompt_framework, prompt_strategy, prompt_text, prompt_dimension,
                        prompt_templates, prompt_lexicon, hash_only);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
