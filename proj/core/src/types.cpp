#include "mova/types.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <unordered_map>

namespace mova {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

bool LabelScheme::is_legal(int value) const {
  if (kind == LabelSchemeKind::binary01) return value == 0 || value == 1;
  return value == -1 || value == 0 || value == 1;
}

std::optional<int> LabelScheme::decode(std::string_view surface) const {
  const std::string s = lower(trim(surface));
  if (s.empty()) return std::nullopt;
  if (kind == LabelSchemeKind::binary01) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    return std::nullopt;
  }
  if (s == "y" || s == "yes") return 1;
  if (s == "n" || s == "no") return -1;
  if (s == "u" || s == "unrelated" || s == "not related") return 0;
  if (s == "-1") return -1;
  if (s == "0") return 0;
  if (s == "1") return 1;
  return std::nullopt;
}

std::string LabelScheme::encode(int value) const {
  if (!is_legal(value)) throw UsageError("illegal label value " + std::to_string(value));
  if (kind == LabelSchemeKind::ternary_ynu) {
    if (value == 1) return "Y";
    if (value == -1) return "N";
    return "U";
  }
  return std::to_string(value);
}

std::vector<std::string> LabelScheme::surface_forms() const {
  switch (kind) {
    case LabelSchemeKind::binary01:
      return {"0", "1"};
    case LabelSchemeKind::ternary_ynu:
      return {"Y", "N", "U"};
    case LabelSchemeKind::ternary_int:
      return {"-1", "0", "1"};
  }
  return {};
}

bool Framework::has_dimension(std::string_view dim) const {
  return std::find(dimensions.begin(), dimensions.end(), dim) != dimensions.end();
}

std::size_t Framework::dimension_index(std::string_view dim) const {
  auto it = std::find(dimensions.begin(), dimensions.end(), dim);
  if (it == dimensions.end())
    throw UsageError("unknown dimension '" + std::string(dim) + "' for framework " + name);
  return static_cast<std::size_t>(it - dimensions.begin());
}

void Framework::validate() const {
  if (name.empty()) throw UsageError("framework name is empty");
  if (dimensions.empty()) throw UsageError("framework " + name + " has no dimensions");
  for (std::size_t i = 0; i < dimensions.size(); ++i) {
    if (dimensions[i].empty()) throw UsageError("framework " + name + " has an empty dimension");
    for (std::size_t j = i + 1; j < dimensions.size(); ++j)
      if (dimensions[i] == dimensions[j])
        throw UsageError("framework " + name + " repeats dimension " + dimensions[i]);
  }
}

int LabelVector::at(const Framework& fw, std::string_view dim) const {
  const std::size_t i = fw.dimension_index(dim);
  if (i >= values.size()) throw UsageError("label vector shorter than framework");
  return values[i];
}

bool LabelVector::legal_for(const Framework& fw) const {
  if (values.size() != fw.dimensions.size()) return false;
  for (int v : values)
    if (!fw.scheme.is_legal(v)) return false;
  return true;
}

namespace {

std::unordered_map<std::string, Framework> builtin_frameworks() {
  std::unordered_map<std::string, Framework> out;
  auto put = [&out](Framework fw) { out.emplace(fw.name, std::move(fw)); };

  put(Framework{"mft",
                {"Care/Harm", "Fairness/Cheating", "Loyalty/Betrayal", "Authority/Subversion",
                 "Sanctity/Degradation"},
                {LabelSchemeKind::binary01},
                "moral foundations",
                {}});
  put(Framework{"mft6",
                {"Care/Harm", "Fairness/Cheating", "Loyalty/Betrayal", "Authority/Subversion",
                 "Sanctity/Degradation", "Liberty/Oppression"},
                {LabelSchemeKind::binary01},
                "moral foundations",
                {}});
  put(Framework{"mac7",
                {"Family", "Group", "Reciprocity", "Heroism", "Deference", "Fairness",
                 "Property"},
                {LabelSchemeKind::binary01},
                "morality",
                {}});
  put(Framework{"values10",
                {"Power", "Achievement", "Hedonism", "Stimulation", "Self-direction",
                 "Universalism", "Benevolence", "Tradition", "Conformity", "Security"},
                {LabelSchemeKind::ternary_ynu},
                "human values",
                {"target"}});
  put(Framework{"pvq10",
                {"Power", "Achievement", "Hedonism", "Stimulation", "Self-direction",
                 "Universalism", "Benevolence", "Tradition", "Conformity", "Security"},
                {LabelSchemeKind::binary01},
                "human values",
                {}});
  put(Framework{"webis20",
                {"Power - dominance", "Power - resources", "Power - face", "Achievement",
                 "Hedonism", "Stimulation", "Self-direction - thought",
                 "Self-direction - action", "Universalism - concern", "Universalism - nature",
                 "Universalism - tolerance", "Universalism - objectivity",
                 "Benevolence - caring", "Benevolence - dependability", "Tradition", "Humility",
                 "Conformity - rules", "Conformity - interpersonal", "Security - personal",
                 "Security - societal"},
                {LabelSchemeKind::binary01},
                "human values",
                {"conclusion", "stance"}});
  put(Framework{"common_morality",
                {"Do not kill", "Do not cause pain", "Do not disable",
                 "Do not deprive of freedom", "Do not deprive of pleasure", "Do not deceive",
                 "Do not cheat", "Do not break your promises", "Do not break the law",
                 "Do not neglect your duty"},
                {LabelSchemeKind::binary01},
                "morality",
                {"scenario", "action1"}});
  return out;
}

std::mutex registry_mu;

std::unordered_map<std::string, Framework>& registry() {
  static std::unordered_map<std::string, Framework> reg = builtin_frameworks();
  return reg;
}

}  // namespace

const Framework& FrameworkRegistry::get(std::string_view name) {
  std::lock_guard lock(registry_mu);
  auto& reg = registry();
  auto it = reg.find(std::string(name));
  if (it == reg.end()) throw UsageError("unknown framework '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> FrameworkRegistry::names() {
  std::lock_guard lock(registry_mu);
  std::vector<std::string> out;
  for (const auto& [name, fw] : registry()) out.push_back(name);
  std::sort(out.begin(), out.end());
  return out;
}

void FrameworkRegistry::register_framework(Framework fw) {
  fw.validate();
  std::lock_guard lock(registry_mu);
  registry()[fw.name] = std::move(fw);
}

}  // namespace mova
