#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mova/types.hpp"

namespace mova {

// Per-dimension word lists. Words are lowercased and deduplicated; insertion
// order is kept so feature positions stay aligned with trained weights.
class Lexicon {
 public:
  void add(const std::string& dimension, const std::vector<std::string>& words);
  bool has(std::string_view dimension) const;
  const std::vector<std::string>& words(std::string_view dimension) const;  // throws UsageError
  const std::vector<std::string>& dimensions() const { return dims_; }
  std::size_t total_words() const;

 private:
  std::vector<std::string> dims_;
  std::unordered_map<std::string, std::vector<std::string>> words_;
};

// File format: one `Dimension: ["w1", "w2", ...]` line per dimension.
// Single-quoted lists are accepted on read.
Lexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path);

// Renders `    Dimension: ['w1', 'w2', ...]` entries in canonical dimension
// order, the shape the prompt's related-lexicons block expects.
std::string render_lexicon_block(const Lexicon& lexicon, const Framework& fw);

// Lowercase, split on non-alphanumeric.
std::vector<std::string> tokenize(std::string_view text);

// Presence flags (0/1), one per lexicon word of `dimension`.
std::vector<double> featurize(std::string_view text, const Lexicon& lexicon,
                              std::string_view dimension);

struct TrainSettings {
  std::vector<double> learning_rate_grid{0.001, 0.01, 0.1, 1.0};
  int epochs = 500;
  int folds = 10;
  std::uint32_t seed = 42;
};

struct LexiconModel {
  std::string dimension;
  std::vector<std::string> vocabulary;
  std::vector<double> weights;  // one per vocabulary word
  double bias = 0.0;
  double learning_rate = 0.0;  // selected by cross-validation
  double cv_auc = 0.0;         // mean held-out AUC at the selected rate
};

// LexLLM mixing weights, one lambda per dimension.
struct CombinerModel {
  std::map<std::string, double> lambda;
};

// Full-batch gradient descent on the logistic loss; the learning rate is
// chosen from the grid by k-fold cross-validation maximizing AUC.
// Deterministic for a fixed seed. Throws UsageError on single-class data.
LexiconModel train_lexical_classifier(const Dataset& train, std::string_view dimension,
                                      const Lexicon& lexicon,
                                      const TrainSettings& settings = {});

double predict_lexical(const LexiconModel& model, const std::vector<double>& features);

// u_c = lambda * u_lexical + (1 - lambda) * u_llm. All inputs in [0,1].
double combine_lexllm(double u_lexical, double u_llm, double lambda);

struct LambdaChoice {
  double lambda = 0.0;
  double auc = 0.0;
};

// Grid {0, 0.01, ..., 1}; ties resolved toward the smallest lambda.
LambdaChoice tune_lambda(const std::vector<double>& scores_lexical,
                         const std::vector<double>& scores_llm,
                         const std::vector<int>& gold);

// Performance-driven refinement. S_c = instances the lexicon route got right
// and the LLM got wrong for a dimension, S_w the converse. A word scores +1
// per S_c text containing it and -1 per S_w text. Negative-score base words
// are dropped; the top 50% of positive-score candidate words are added.
// `candidates` defaults to `base`.
Lexicon refine_lexicon(const Lexicon& base,
                       const std::vector<LabelVector>& preds_lexical,
                       const std::vector<LabelVector>& preds_llm,
                       const std::vector<LabelVector>& gold,
                       const std::vector<std::string>& texts,
                       const Framework& fw,
                       const Lexicon* candidates = nullptr);

// Key-value text file: per-dimension word->weight table, bias and lambda.
void save_models(const std::vector<LexiconModel>& models, const CombinerModel& combiner,
                 const std::filesystem::path& path);
std::pair<std::vector<LexiconModel>, CombinerModel> load_models(
    const std::filesystem::path& path);

}  // namespace mova
