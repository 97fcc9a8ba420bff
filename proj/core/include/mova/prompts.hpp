#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

#include "mova/lexicon.hpp"
#include "mova/types.hpp"

namespace mova {

struct PromptStrategy {
  enum class Kind { one_by_one, all_at_once, chain };
  Kind kind = Kind::all_at_once;
  bool definition = false;
  bool example = false;
  bool reason = false;  // only meaningful after definition and example
  bool lexicon = false;

  void validate() const;  // throws UsageError when reason lacks its prerequisites
  std::string label() const;
  // "all-at-once", "1-by-1+definition", "chain", "all-at-once+definition+example+reason"
  static PromptStrategy parse(std::string_view spec);
};

// Loads template assets from `<dir>/<framework>/<name>.txt` and renders
// bit-exact prompts. Pure rendering; safe to share across threads.
class PromptLibrary {
 public:
  explicit PromptLibrary(std::filesystem::path template_dir);

  // MOVA_TEMPLATES env var, else the install-time share directory.
  static std::filesystem::path default_dir();

  std::string one_by_one(const Framework& fw, std::string_view dimension,
                         std::string_view text) const;

  std::string all_at_once(const Framework& fw, std::string_view text,
                          const PromptStrategy& strategy = {},
                          const Lexicon* lexicon = nullptr) const;

  // 1-by-1 style prompt carrying the other dimensions' predictions, rendered
  // in canonical order minus the target. The predictions must cover every
  // non-target dimension unless `allow_partial` (sequential-chain mode).
  std::string chain(const Framework& fw, std::string_view target_dimension,
                    std::string_view text,
                    const std::map<std::string, int>& other_predictions,
                    bool allow_partial = false) const;

  std::string ternary_values(std::string_view text) const;

  std::string moralchoice(std::string_view context, std::string_view action1,
                          std::string_view action2) const;

  std::string webis(std::string_view premise, std::string_view conclusion,
                    std::string_view stance) const;

  // Framework-aware dispatch used by the pipeline: routes webis20,
  // common_morality and ternary frameworks to their dedicated builders.
  std::string instance_prompt(const Framework& fw, const TextInstance& instance,
                              const PromptStrategy& strategy,
                              const Lexicon* lexicon = nullptr) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::string load(const std::string& relpath) const;
  std::string load_for(const Framework& fw, const std::string& name) const;
  std::string blocks(const Framework& fw, const PromptStrategy& strategy) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::string> cache_;
};

// Replaces {name} markers and rejects any leftover {identifier} marker.
std::string render_template(std::string_view tpl,
                            const std::map<std::string, std::string>& values);

}  // namespace mova
