#include "mova/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mova {

namespace {

bool is_marker_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Finds {name} markers; name = [A-Za-z][A-Za-z0-9_]*.
std::vector<std::pair<std::size_t, std::string>> find_markers(std::string_view tpl) {
  std::vector<std::pair<std::size_t, std::string>> out;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl[i] != '{') continue;
    std::size_t j = i + 1;
    if (j >= tpl.size() || !std::isalpha(static_cast<unsigned char>(tpl[j]))) continue;
    while (j < tpl.size() && is_marker_char(tpl[j])) ++j;
    if (j < tpl.size() && tpl[j] == '}') {
      out.emplace_back(i, std::string(tpl.substr(i + 1, j - i - 1)));
      i = j;
    }
  }
  return out;
}

std::string count_word(std::size_t n) {
  static const char* words[] = {"zero",     "one",     "two",      "three",  "four",
                                "five",     "six",     "seven",    "eight",  "nine",
                                "ten",      "eleven",  "twelve",   "thirteen", "fourteen",
                                "fifteen",  "sixteen", "seventeen", "eighteen", "nineteen",
                                "twenty"};
  if (n <= 20) return words[n];
  return std::to_string(n);
}

std::string join_with_and(const std::vector<std::string>& items) {
  if (items.empty()) return {};
  if (items.size() == 1) return items[0];
  std::string out;
  for (std::size_t i = 0; i + 1 < items.size(); ++i) {
    out += items[i];
    out += (items.size() == 2) ? " " : ", ";
  }
  if (items.size() > 2) out += "and ";
  if (items.size() == 2) out += "and ";
  out += items.back();
  return out;
}

std::string join_plain(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

std::string json_skeleton(const std::vector<std::string>& dims) {
  std::string out = "{\n";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    out += "    \"" + dims[i] + "\":";
    out += (i + 1 < dims.size()) ? " ,\n" : "\n";
  }
  out += "}";
  return out;
}

}  // namespace

void PromptStrategy::validate() const {
  if (reason && !(definition && example))
    throw UsageError("the reason block requires the definition and example blocks");
  if (kind != Kind::all_at_once && (definition || example || reason || lexicon))
    throw UsageError("optional blocks only apply to the all-at-once strategy");
}

std::string PromptStrategy::label() const {
  std::string out;
  switch (kind) {
    case Kind::one_by_one: out = "1-by-1"; break;
    case Kind::all_at_once: out = "all-at-once"; break;
    case Kind::chain: out = "chain"; break;
  }
  if (definition) out += "+definition";
  if (example) out += "+example";
  if (reason) out += "+reason";
  if (lexicon) out += "+lexicon";
  return out;
}

PromptStrategy PromptStrategy::parse(std::string_view spec) {
  PromptStrategy s;
  std::string str(spec);
  std::replace(str.begin(), str.end(), '_', '-');
  std::stringstream ss(str);
  std::string part;
  bool first = true;
  while (std::getline(ss, part, '+')) {
    if (first) {
      if (part == "1-by-1" || part == "one-by-one")
        s.kind = Kind::one_by_one;
      else if (part == "all-at-once" || part == "all@once")
        s.kind = Kind::all_at_once;
      else if (part == "chain")
        s.kind = Kind::chain;
      else
        throw UsageError("unknown strategy '" + part + "'");
      first = false;
      continue;
    }
    if (part == "definition")
      s.definition = true;
    else if (part == "example")
      s.example = true;
    else if (part == "reason")
      s.reason = s.definition = s.example = true;
    else if (part == "lexicon")
      s.lexicon = true;
    else
      throw UsageError("unknown prompt block '" + part + "'");
  }
  if (first) throw UsageError("empty strategy spec");
  s.validate();
  return s;
}

std::string render_template(std::string_view tpl,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t pos = 0;
  for (const auto& [offset, name] : find_markers(tpl)) {
    auto it = values.find(name);
    if (it == values.end())
      throw UsageError("template marker {" + name + "} has no value");
    out.append(tpl.substr(pos, offset - pos));
    out.append(it->second);
    pos = offset + name.size() + 2;
  }
  out.append(tpl.substr(pos));
  return out;
}

PromptLibrary::PromptLibrary(std::filesystem::path template_dir)
    : dir_(std::move(template_dir)) {
  if (!std::filesystem::is_directory(dir_))
    throw UsageError("template directory not found: " + dir_.string());
}

std::filesystem::path PromptLibrary::default_dir() {
  if (const char* env = std::getenv("MOVA_TEMPLATES")) return env;
#ifdef MOVA_DEFAULT_TEMPLATE_DIR
  if (std::filesystem::is_directory(MOVA_DEFAULT_TEMPLATE_DIR))
    return MOVA_DEFAULT_TEMPLATE_DIR;
#endif
  return "templates";
}

std::string PromptLibrary::load(const std::string& relpath) const {
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(relpath);
    if (it != cache_.end()) return it->second;
  }
  const auto path = dir_ / relpath;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("template asset not found: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!text.empty() && text.back() == '\n') text.pop_back();
  std::lock_guard lock(mu_);
  cache_[relpath] = text;
  return text;
}

std::string PromptLibrary::load_for(const Framework& fw, const std::string& name) const {
  if (std::filesystem::exists(dir_ / fw.name / (name + ".txt")))
    return load(fw.name + "/" + name + ".txt");
  return load("generic/" + name + ".txt");
}

std::string PromptLibrary::one_by_one(const Framework& fw, std::string_view dimension,
                                      std::string_view text) const {
  fw.dimension_index(dimension);  // unknown dimension -> UsageError
  return render_template(load_for(fw, "one_by_one"),
                         {{"dimension", std::string(dimension)}, {"text", std::string(text)}});
}

std::string PromptLibrary::blocks(const Framework& fw, const PromptStrategy& strategy) const {
  std::string out;
  if (strategy.definition) out += load(fw.name + "/definition_block.txt") + "\n\n";
  if (strategy.reason)
    out += load(fw.name + "/example_reason_block.txt") + "\n\n";
  else if (strategy.example)
    out += load(fw.name + "/example_block.txt") + "\n\n";
  return out;
}

std::string PromptLibrary::all_at_once(const Framework& fw, std::string_view text,
                                       const PromptStrategy& strategy,
                                       const Lexicon* lexicon) const {
  PromptStrategy s = strategy;
  s.kind = PromptStrategy::Kind::all_at_once;
  s.validate();

  const bool any_block = s.definition || s.example || s.lexicon;
  if (fw.scheme.kind != LabelSchemeKind::binary01) {
    if (any_block)
      throw UsageError("optional blocks are not available for ternary frameworks");
    return render_template(load_for(fw, "ternary"), {{"text", std::string(text)}});
  }
  if (fw.name == "webis20") {
    if (any_block)
      throw UsageError("no optional-block templates shipped for framework webis20");
    return webis(text, "", "");
  }
  if (fw.name == "common_morality")
    throw UsageError("common_morality prompts need scenario/action fields; "
                     "use the moralchoice builder");

  std::map<std::string, std::string> values{{"text", std::string(text)}};

  // MAC ships its +definition variant as a complete template.
  if (fw.name == "mac7" && s.definition) {
    if (s.example || s.lexicon)
      throw UsageError("no example/lexicon template shipped for framework mac7");
    values["blocks"] = "";
    return render_template(load(fw.name + "/all_at_once_definition.txt"), values);
  }

  std::string template_name = "all_at_once";
  if (s.lexicon) {
    if (!lexicon) throw UsageError("lexicon block requested without a lexicon");
    template_name = "all_at_once_lexicon";
    values["lexicon"] = render_lexicon_block(*lexicon, fw);
  }

  const auto specific = dir_ / fw.name / (template_name + ".txt");
  if (std::filesystem::exists(specific)) {
    values["blocks"] = blocks(fw, s);
    return render_template(load(fw.name + "/" + template_name + ".txt"), values);
  }
  if (s.lexicon || s.definition || s.example)
    throw UsageError("no " + template_name + " template shipped for framework " + fw.name);

  // Generic assembly for frameworks without a dedicated template (mft6,
  // user-registered ones).
  values["blocks"] = "";
  values["count"] = count_word(fw.dimensions.size());
  values["noun"] = fw.prompt_noun;
  values["dimension_list"] = join_with_and(fw.dimensions);
  values["dimension_bracket"] = join_plain(fw.dimensions);
  values["skeleton"] = json_skeleton(fw.dimensions);
  return render_template(load("generic/all_at_once.txt"), values);
}

std::string PromptLibrary::chain(const Framework& fw, std::string_view target_dimension,
                                 std::string_view text,
                                 const std::map<std::string, int>& other_predictions,
                                 bool allow_partial) const {
  const std::size_t target = fw.dimension_index(target_dimension);
  if (other_predictions.count(std::string(target_dimension)))
    throw UsageError("chain predictions must not include the target dimension");
  if (!allow_partial && other_predictions.size() != fw.dimensions.size() - 1)
    throw UsageError("chain predictions must cover every dimension except the target");

  std::string rendered;
  for (std::size_t i = 0; i < fw.dimensions.size(); ++i) {
    if (i == target) continue;
    auto it = other_predictions.find(fw.dimensions[i]);
    if (it == other_predictions.end()) {
      if (allow_partial) continue;
      throw UsageError("chain predictions missing dimension " + fw.dimensions[i]);
    }
    if (!rendered.empty()) rendered += "; ";
    rendered += fw.dimensions[i] + ": " + fw.scheme.encode(it->second);
  }
  return render_template(load_for(fw, "chain"),
                         {{"dimension", std::string(target_dimension)},
                          {"text", std::string(text)},
                          {"predictions", rendered}});
}

std::string PromptLibrary::ternary_values(std::string_view text) const {
  if (text.empty()) throw UsageError("empty text");
  return render_template(load("values10/ternary.txt"), {{"text", std::string(text)}});
}

std::string PromptLibrary::moralchoice(std::string_view context, std::string_view action1,
                                       std::string_view action2) const {
  if (context.empty() || action1.empty() || action2.empty())
    throw UsageError("moralchoice prompts need context, action1 and action2");
  return render_template(load("common_morality/moralchoice.txt"),
                         {{"context", std::string(context)},
                          {"action1", std::string(action1)},
                          {"action2", std::string(action2)}});
}

std::string PromptLibrary::webis(std::string_view premise, std::string_view conclusion,
                                 std::string_view stance) const {
  if (premise.empty()) throw UsageError("empty premise");
  return render_template(load("webis20/all_at_once.txt"),
                         {{"text", std::string(premise)},
                          {"conclusion", std::string(conclusion)},
                          {"stance", std::string(stance)}});
}

std::string PromptLibrary::instance_prompt(const Framework& fw, const TextInstance& instance,
                                           const PromptStrategy& strategy,
                                           const Lexicon* lexicon) const {
  auto aux = [&instance](const char* key) -> std::string {
    auto it = instance.aux.find(key);
    return it == instance.aux.end() ? std::string() : it->second;
  };
  const bool any_block =
      strategy.definition || strategy.example || strategy.lexicon;
  if (fw.name == "webis20") {
    if (any_block)
      throw UsageError("no optional-block templates shipped for framework webis20");
    return webis(instance.text, aux("conclusion"), aux("stance"));
  }
  if (fw.name == "common_morality") {
    if (any_block)
      throw UsageError("no optional-block templates shipped for framework common_morality");
    return moralchoice(aux("scenario"), aux("action1"), instance.text);
  }
  if (fw.scheme.kind != LabelSchemeKind::binary01) return ternary_values(instance.text);
  return all_at_once(fw, instance.text, strategy, lexicon);
}

}  // namespace mova
