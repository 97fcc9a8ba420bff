#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mova/error.hpp"

namespace mova {

enum class LabelSchemeKind { binary01, ternary_ynu, ternary_int };

// Internal label values. Binary schemes use {0,1}; ternary schemes use
// {-1,0,1} with 1 = supports/yes, 0 = unrelated, -1 = opposes/no.
struct LabelScheme {
  LabelSchemeKind kind = LabelSchemeKind::binary01;

  bool is_binary() const { return kind == LabelSchemeKind::binary01; }
  bool is_legal(int value) const;

  // Decodes a surface token into the internal value; nullopt when illegal.
  // Binary accepts 0/1. Ternary accepts Y/N/U (case-insensitive),
  // Yes/No/Not related, and the -1/0/1 integer surface.
  std::optional<int> decode(std::string_view surface) const;
  std::string encode(int value) const;

  // Token strings a generated answer may use at the label position.
  std::vector<std::string> surface_forms() const;
};

struct Framework {
  std::string name;
  std::vector<std::string> dimensions;  // canonical prompt/output order
  LabelScheme scheme;
  std::string prompt_noun = "morality";  // "...dimensions of <noun>: ..."
  std::vector<std::string> aux_keys;     // allowed TextInstance aux fields

  std::size_t size() const { return dimensions.size(); }
  bool has_dimension(std::string_view dim) const;
  std::size_t dimension_index(std::string_view dim) const;  // throws UsageError
  void validate() const;
};

// Built-in frameworks ship with the exact dimension names used by the prompt
// templates; additional frameworks can be registered at runtime.
class FrameworkRegistry {
 public:
  static const Framework& get(std::string_view name);  // throws UsageError
  static std::vector<std::string> names();
  static void register_framework(Framework fw);
};

struct LabelVector {
  std::vector<int> values;  // aligned with Framework::dimensions

  int at(const Framework& fw, std::string_view dim) const;
  bool legal_for(const Framework& fw) const;
};

// Per-dimension probability of relevance in [0,1]; no sum-to-1 requirement.
using ScoreVector = std::vector<double>;

struct TextInstance {
  std::string id;
  std::string text;
  std::map<std::string, std::string> aux;
  std::optional<LabelVector> gold;
};

struct Dataset {
  std::string name;
  std::string split;
  Framework framework;
  std::vector<TextInstance> instances;
};

}  // namespace mova
