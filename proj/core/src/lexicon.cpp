#include "mova/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "mova/metrics.hpp"

namespace mova {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void Lexicon::add(const std::string& dimension, const std::vector<std::string>& words) {
  if (!has(dimension)) dims_.push_back(dimension);
  auto& list = words_[dimension];
  std::unordered_set<std::string> seen(list.begin(), list.end());
  for (const auto& raw : words) {
    std::string word = lower(raw);
    if (word.empty()) throw UsageError("empty lexicon word for dimension " + dimension);
    if (seen.insert(word).second) list.push_back(std::move(word));
  }
}

bool Lexicon::has(std::string_view dimension) const {
  return words_.count(std::string(dimension)) > 0;
}

const std::vector<std::string>& Lexicon::words(std::string_view dimension) const {
  auto it = words_.find(std::string(dimension));
  if (it == words_.end())
    throw UsageError("lexicon has no dimension '" + std::string(dimension) + "'");
  return it->second;
}

std::size_t Lexicon::total_words() const {
  std::size_t n = 0;
  for (const auto& [dim, list] : words_) n += list.size();
  return n;
}

namespace {

// One `Dimension: ["w1", "w2", ...]` line; single quotes accepted.
std::vector<std::string> parse_word_list(const std::string& line, std::string& dimension,
                                         const std::string& where) {
  const auto colon = line.find(':');
  if (colon == std::string::npos) throw ParseError(where + ": expected 'Dimension: [...]'");
  dimension = line.substr(0, colon);
  while (!dimension.empty() && std::isspace(static_cast<unsigned char>(dimension.back())))
    dimension.pop_back();
  const auto open = line.find('[', colon);
  const auto close = line.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw ParseError(where + ": expected a [...] word list");
  std::vector<std::string> words;
  std::string current;
  bool in_quote = false;
  char quote = 0;
  for (std::size_t i = open + 1; i < close; ++i) {
    const char c = line[i];
    if (in_quote) {
      if (c == quote) {
        in_quote = false;
        words.push_back(current);
        current.clear();
      } else {
        current.push_back(c);
      }
    } else if (c == '\'' || c == '"') {
      in_quote = true;
      quote = c;
    }
  }
  if (in_quote) throw ParseError(where + ": unterminated quote in word list");
  return words;
}

}  // namespace

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open lexicon " + path.string());
  Lexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::string dimension;
    const auto words =
        parse_word_list(line, dimension, path.string() + ":" + std::to_string(line_no));
    lexicon.add(dimension, words);
  }
  if (lexicon.dimensions().empty()) throw ParseError(path.string() + ": no lexicon sections");
  return lexicon;
}

void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  for (const auto& dim : lexicon.dimensions()) {
    out << dim << ": [";
    const auto& words = lexicon.words(dim);
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) out << ", ";
      out << '"' << words[i] << '"';
    }
    out << "]\n";
  }
}

std::string render_lexicon_block(const Lexicon& lexicon, const Framework& fw) {
  std::string out;
  for (const auto& dim : fw.dimensions) {
    const auto& words = lexicon.words(dim);  // missing dimension -> UsageError
    if (!out.empty()) out += "\n\n";
    out += "    " + dim + ": [";
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) out += ", ";
      out += "'" + words[i] + "'";
    }
    out += "]";
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<double> featurize(std::string_view text, const Lexicon& lexicon,
                              std::string_view dimension) {
  const auto& vocabulary = lexicon.words(dimension);
  const auto tokens = tokenize(text);
  const std::unordered_set<std::string> present(tokens.begin(), tokens.end());
  std::vector<double> features(vocabulary.size(), 0.0);
  for (std::size_t i = 0; i < vocabulary.size(); ++i)
    if (present.count(vocabulary[i])) features[i] = 1.0;
  return features;
}

namespace {

struct FitResult {
  std::vector<double> weights;
  double bias = 0.0;
};

FitResult fit_logistic(const std::vector<std::vector<double>>& features,
                       const std::vector<int>& labels, const std::vector<std::size_t>& rows,
                       double learning_rate, int epochs) {
  const std::size_t d = features.empty() ? 0 : features.front().size();
  FitResult fit;
  fit.weights.assign(d, 0.0);
  const double scale = 1.0 / static_cast<double>(rows.size());
  std::vector<double> grad(d);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0.0;
    for (const std::size_t r : rows) {
      double z = fit.bias;
      const auto& x = features[r];
      for (std::size_t j = 0; j < d; ++j) z += fit.weights[j] * x[j];
      const double err = sigmoid(z) - static_cast<double>(labels[r]);
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * x[j];
      grad_bias += err;
    }
    for (std::size_t j = 0; j < d; ++j) fit.weights[j] -= learning_rate * scale * grad[j];
    fit.bias -= learning_rate * scale * grad_bias;
  }
  return fit;
}

double score_row(const FitResult& fit, const std::vector<double>& x) {
  double z = fit.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += fit.weights[j] * x[j];
  return sigmoid(z);
}

}  // namespace

LexiconModel train_lexical_classifier(const Dataset& train, std::string_view dimension,
                                      const Lexicon& lexicon, const TrainSettings& settings) {
  const std::size_t dim_index = train.framework.dimension_index(dimension);
  if (!train.framework.scheme.is_binary())
    throw UsageError("lexical training needs binary gold labels");
  if (settings.learning_rate_grid.empty()) throw UsageError("empty learning-rate grid");

  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  features.reserve(train.instances.size());
  for (const auto& instance : train.instances) {
    if (!instance.gold)
      throw UsageError("instance '" + instance.id + "' has no gold labels");
    features.push_back(featurize(instance.text, lexicon, dimension));
    labels.push_back(instance.gold->values[dim_index]);
  }
  const long positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<long>(labels.size()))
    throw UsageError("training data for " + std::string(dimension) + " is single-class");

  const std::size_t n = labels.size();
  const int folds = std::max(2, std::min<int>(settings.folds, static_cast<int>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937 rng(settings.seed);
  std::shuffle(order.begin(), order.end(), rng);

  double best_auc = -1.0;
  double best_rate = settings.learning_rate_grid.front();
  for (const double rate : settings.learning_rate_grid) {
    double auc_sum = 0.0;
    int usable = 0;
    for (int fold = 0; fold < folds; ++fold) {
      std::vector<std::size_t> train_rows, held_out;
      for (std::size_t i = 0; i < n; ++i)
        (static_cast<int>(i % folds) == fold ? held_out : train_rows).push_back(order[i]);
      int held_pos = 0;
      for (const std::size_t r : held_out) held_pos += labels[r];
      if (held_out.empty() || held_pos == 0 ||
          held_pos == static_cast<int>(held_out.size()))
        continue;
      int train_pos = 0;
      for (const std::size_t r : train_rows) train_pos += labels[r];
      if (train_pos == 0 || train_pos == static_cast<int>(train_rows.size())) continue;

      const FitResult fit = fit_logistic(features, labels, train_rows, rate, settings.epochs);
      std::vector<double> scores;
      std::vector<int> gold;
      for (const std::size_t r : held_out) {
        scores.push_back(score_row(fit, features[r]));
        gold.push_back(labels[r]);
      }
      auc_sum += auc(scores, gold);
      ++usable;
    }
    const double mean_auc = usable > 0 ? auc_sum / usable : 0.5;
    if (mean_auc > best_auc) {
      best_auc = mean_auc;
      best_rate = rate;
    }
  }

  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  const FitResult fit = fit_logistic(features, labels, all_rows, best_rate, settings.epochs);

  LexiconModel model;
  model.dimension = std::string(dimension);
  model.vocabulary = lexicon.words(dimension);
  model.weights = fit.weights;
  model.bias = fit.bias;
  model.learning_rate = best_rate;
  model.cv_auc = best_auc;
  return model;
}

double predict_lexical(const LexiconModel& model, const std::vector<double>& features) {
  if (features.size() != model.weights.size())
    throw UsageError("feature length " + std::to_string(features.size()) +
                     " does not match model of size " + std::to_string(model.weights.size()));
  double z = model.bias;
  for (std::size_t j = 0; j < features.size(); ++j) z += model.weights[j] * features[j];
  return sigmoid(z);
}

double combine_lexllm(double u_lexical, double u_llm, double lambda) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(u_lexical) || !in_unit(u_llm) || !in_unit(lambda))
    throw UsageError("combine_lexllm inputs must lie in [0,1]");
  return lambda * u_lexical + (1.0 - lambda) * u_llm;
}

LambdaChoice tune_lambda(const std::vector<double>& scores_lexical,
                         const std::vector<double>& scores_llm,
                         const std::vector<int>& gold) {
  if (scores_lexical.size() != scores_llm.size() || scores_llm.size() != gold.size())
    throw UsageError("tune_lambda inputs must have equal length");
  const long positives = std::count(gold.begin(), gold.end(), 1);
  if (positives == 0 || positives == static_cast<long>(gold.size()))
    throw UsageError("tune_lambda needs both gold classes");

  LambdaChoice best{0.0, -1.0};
  std::vector<double> combined(gold.size());
  for (int step = 0; step <= 100; ++step) {
    const double lambda = step / 100.0;
    for (std::size_t i = 0; i < gold.size(); ++i)
      combined[i] = lambda * scores_lexical[i] + (1.0 - lambda) * scores_llm[i];
    const double value = auc(combined, gold);
    if (value > best.auc) best = {lambda, value};  // ties keep the smaller lambda
  }
  return best;
}

Lexicon refine_lexicon(const Lexicon& base, const std::vector<LabelVector>& preds_lexical,
                       const std::vector<LabelVector>& preds_llm,
                       const std::vector<LabelVector>& gold,
                       const std::vector<std::string>& texts, const Framework& fw,
                       const Lexicon* candidates) {
  const std::size_t n = texts.size();
  if (preds_lexical.size() != n || preds_llm.size() != n || gold.size() != n)
    throw UsageError("refine_lexicon inputs are misaligned");
  if (!candidates) candidates = &base;

  std::vector<std::unordered_set<std::string>> text_tokens(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto tokens = tokenize(texts[i]);
    text_tokens[i].insert(tokens.begin(), tokens.end());
  }

  Lexicon refined;
  for (const auto& dim : base.dimensions()) {
    const std::size_t d = fw.dimension_index(dim);

    // Scoring vocabulary: base words first, then new candidate words.
    std::vector<std::string> vocabulary = base.words(dim);
    std::unordered_set<std::string> in_base(vocabulary.begin(), vocabulary.end());
    if (candidates->has(dim))
      for (const auto& word : candidates->words(dim))
        if (!in_base.count(word)) vocabulary.push_back(word);

    std::unordered_map<std::string, long> score;
    for (const auto& word : vocabulary) score[word] = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (preds_lexical[i].values.size() <= d || preds_llm[i].values.size() <= d ||
          gold[i].values.size() <= d)
        throw UsageError("refine_lexicon prediction vectors are misaligned");
      const bool lex_correct = preds_lexical[i].values[d] == gold[i].values[d];
      const bool llm_correct = preds_llm[i].values[d] == gold[i].values[d];
      int delta = 0;
      if (lex_correct && !llm_correct) delta = 1;   // S_c
      else if (!lex_correct && llm_correct) delta = -1;  // S_w
      if (delta == 0) continue;
      for (const auto& word : vocabulary)
        if (text_tokens[i].count(word)) score[word] += delta;
    }

    std::vector<std::string> kept;
    for (const auto& word : base.words(dim))
      if (score[word] >= 0) kept.push_back(word);

    std::vector<std::string> positive;
    for (const auto& word : vocabulary)
      if (score[word] > 0) positive.push_back(word);
    std::sort(positive.begin(), positive.end(), [&score](const auto& a, const auto& b) {
      if (score[a] != score[b]) return score[a] > score[b];
      return a < b;
    });
    const std::size_t take = (positive.size() + 1) / 2;  // top 50%, ceil

    std::unordered_set<std::string> present(kept.begin(), kept.end());
    for (std::size_t i = 0; i < take; ++i)
      if (present.insert(positive[i]).second) kept.push_back(positive[i]);

    refined.add(dim, kept);
  }
  return refined;
}

void save_models(const std::vector<LexiconModel>& models, const CombinerModel& combiner,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out.precision(17);
  for (const auto& model : models) {
    out << "dimension: " << model.dimension << "\n";
    auto lambda = combiner.lambda.find(model.dimension);
    if (lambda != combiner.lambda.end()) out << "lambda: " << lambda->second << "\n";
    out << "bias: " << model.bias << "\n";
    out << "learning_rate: " << model.learning_rate << "\n";
    out << "cv_auc: " << model.cv_auc << "\n";
    for (std::size_t i = 0; i < model.vocabulary.size(); ++i)
      out << "weight " << model.vocabulary[i] << ": " << model.weights[i] << "\n";
    out << "\n";
  }
}

std::pair<std::vector<LexiconModel>, CombinerModel> load_models(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::vector<LexiconModel> models;
  CombinerModel combiner;
  LexiconModel current;
  bool open = false;
  auto flush = [&]() {
    if (open) models.push_back(current);
    current = LexiconModel{};
    open = false;
  };
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      flush();
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ParseError(path.string() + ": bad line: " + line);
    const std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);
    if (key == "dimension") {
      flush();
      current.dimension = value;
      open = true;
    } else if (key == "lambda") {
      combiner.lambda[current.dimension] = std::stod(value);
    } else if (key == "bias") {
      current.bias = std::stod(value);
    } else if (key == "learning_rate") {
      current.learning_rate = std::stod(value);
    } else if (key == "cv_auc") {
      current.cv_auc = std::stod(value);
    } else if (key.rfind("weight ", 0) == 0) {
      current.vocabulary.push_back(key.substr(7));
      current.weights.push_back(std::stod(value));
    } else {
      throw ParseError(path.string() + ": unknown key '" + key + "'");
    }
  }
  flush();
  return {std::move(models), std::move(combiner)};
}

}  // namespace mova
