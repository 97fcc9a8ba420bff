#include "mova/parse.hpp"

#include <algorithm>
#include <cctype>

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

std::string_view strip_token_markers(std::string_view token) {
  token = trim(token);
  if (token.size() >= 2 && static_cast<unsigned char>(token[0]) == 0xc4 &&
      static_cast<unsigned char>(token[1]) == 0xa0)
    token.remove_prefix(2);
  if (token.size() >= 3 && static_cast<unsigned char>(token[0]) == 0xe2 &&
      static_cast<unsigned char>(token[1]) == 0x96 &&
      static_cast<unsigned char>(token[2]) == 0x81)
    token.remove_prefix(3);
  return token;
}

// [start, end) of the first balanced brace block. Only double-quoted strings
// shield braces; apostrophes appear freely inside reason text.
std::pair<std::size_t, std::size_t> find_block(const std::string& raw) {
  const std::size_t open = raw.find('{');
  if (open == std::string::npos) throw ParseError("no {...} block in model output");
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      --depth;
      if (depth == 0) return {open, i + 1};
    }
  }
  throw ParseError("unbalanced {...} block in model output");
}

struct RawEntry {
  std::string key;
  std::string value;
  long value_offset;
};

// Key/value pairs inside the block. Keys may be quoted with " or ' or bare;
// values may be bare tokens, quoted strings, or "(reason, value)" tuples.
std::vector<RawEntry> scan_entries(const std::string& raw, std::size_t begin,
                                   std::size_t end) {
  std::vector<RawEntry> entries;
  std::size_t i = begin + 1;  // past '{'
  auto skip_ws = [&]() {
    while (i < end && (std::isspace(static_cast<unsigned char>(raw[i])) || raw[i] == ','))
      ++i;
  };
  while (true) {
    skip_ws();
    if (i >= end - 1 || raw[i] == '}') break;

    RawEntry entry;
    if (raw[i] == '"' || raw[i] == '\'') {
      const char quote = raw[i];
      std::size_t j = i + 1;
      while (j < end && raw[j] != quote) {
        if (raw[j] == '\\') ++j;
        ++j;
      }
      if (j >= end) throw ParseError("unterminated key string");
      entry.key = raw.substr(i + 1, j - i - 1);
      i = j + 1;
    } else {
      std::size_t j = i;
      while (j < end && raw[j] != ':' && raw[j] != '}') ++j;
      entry.key = std::string(trim(std::string_view(raw).substr(i, j - i)));
      i = j;
    }
    while (i < end && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
    if (i >= end || raw[i] != ':')
      throw ParseError("expected ':' after key '" + entry.key + "'");
    ++i;
    while (i < end && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
    if (i >= end) throw ParseError("missing value for key '" + entry.key + "'");

    if (raw[i] == '(') {
      // "(reason text, value)" tuple from the +reason strategy: the label is
      // the token after the last comma.
      std::size_t j = i + 1;
      int depth = 1;
      while (j < end && depth > 0) {
        if (raw[j] == '(') ++depth;
        if (raw[j] == ')') --depth;
        ++j;
      }
      if (depth != 0) throw ParseError("unterminated (reason, value) tuple");
      const std::size_t close = j - 1;
      std::size_t last_comma = std::string::npos;
      for (std::size_t k = i + 1; k < close; ++k)
        if (raw[k] == ',') last_comma = k;
      std::size_t value_begin = last_comma == std::string::npos ? i + 1 : last_comma + 1;
      while (value_begin < close &&
             std::isspace(static_cast<unsigned char>(raw[value_begin])))
        ++value_begin;
      std::size_t value_end = close;
      while (value_end > value_begin &&
             std::isspace(static_cast<unsigned char>(raw[value_end - 1])))
        --value_end;
      entry.value = raw.substr(value_begin, value_end - value_begin);
      entry.value_offset = static_cast<long>(value_begin);
      i = j;
    } else if (raw[i] == '"' || raw[i] == '\'') {
      const char quote = raw[i];
      std::size_t j = i + 1;
      while (j < end && raw[j] != quote) {
        if (raw[j] == '\\') ++j;
        ++j;
      }
      if (j >= end) throw ParseError("unterminated value string");
      entry.value = raw.substr(i + 1, j - i - 1);
      entry.value_offset = static_cast<long>(i + 1);
      i = j + 1;
    } else {
      std::size_t j = i;
      while (j < end && raw[j] != ',' && raw[j] != '}' && raw[j] != '\n') ++j;
      std::size_t value_end = j;
      while (value_end > i && std::isspace(static_cast<unsigned char>(raw[value_end - 1])))
        --value_end;
      entry.value = raw.substr(i, value_end - i);
      entry.value_offset = static_cast<long>(i);
      i = j;
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace

ParsedOutput parse_label_block(const std::string& raw, const Framework& fw,
                               std::string_view key_prefix) {
  if (trim(raw).empty()) throw ParseError("empty model output");
  const auto [begin, end] = find_block(raw);
  const auto entries = scan_entries(raw, begin, end);

  ParsedOutput out;
  out.labels.values.assign(fw.dimensions.size(), 0);
  out.value_offsets.assign(fw.dimensions.size(), -1);
  std::vector<bool> filled(fw.dimensions.size(), false);

  const std::string prefix_lower = lower(key_prefix);
  std::map<std::string, std::size_t> dim_by_key;
  for (std::size_t i = 0; i < fw.dimensions.size(); ++i)
    dim_by_key[lower(fw.dimensions[i])] = i;

  for (const auto& entry : entries) {
    std::string key = lower(trim(entry.key));
    if (!prefix_lower.empty()) {
      if (key.rfind(prefix_lower, 0) == 0) {
        key = key.substr(prefix_lower.size());
      } else {
        continue;  // the other action's keys
      }
    }
    auto it = dim_by_key.find(key);
    if (it == dim_by_key.end()) {
      out.diagnostics.push_back("unknown key '" + entry.key + "'");
      continue;
    }
    const std::size_t dim = it->second;
    if (filled[dim])
      throw ParseError("duplicate key for dimension '" + fw.dimensions[dim] + "'");
    const auto decoded = fw.scheme.decode(entry.value);
    if (!decoded)
      throw ParseError("illegal value '" + entry.value + "' for dimension '" +
                       fw.dimensions[dim] + "'");
    out.labels.values[dim] = *decoded;
    out.value_offsets[dim] = entry.value_offset;
    filled[dim] = true;
  }

  for (std::size_t i = 0; i < filled.size(); ++i)
    if (!filled[i])
      throw ParseError("output is missing dimension '" + fw.dimensions[i] + "'");
  return out;
}

std::pair<int, long> parse_single_label(const std::string& raw, const LabelScheme& scheme) {
  const auto forms = scheme.surface_forms();
  auto boundary = [&raw](std::size_t pos, std::size_t len) {
    const bool left_ok =
        pos == 0 || !std::isalnum(static_cast<unsigned char>(raw[pos - 1]));
    const std::size_t after = pos + len;
    const bool right_ok =
        after >= raw.size() || !std::isalnum(static_cast<unsigned char>(raw[after]));
    return left_ok && right_ok;
  };
  const std::string raw_lower = lower(raw);
  std::size_t best = std::string::npos;
  int best_value = 0;
  for (const auto& form : forms) {
    const std::string needle = lower(form);
    std::size_t pos = raw_lower.find(needle);
    while (pos != std::string::npos) {
      if (boundary(pos, needle.size())) {
        if (pos < best) {
          best = pos;
          best_value = *scheme.decode(form);
        }
        break;
      }
      pos = raw_lower.find(needle, pos + 1);
    }
  }
  if (best == std::string::npos)
    throw ParseError("no label token found in model output");
  return {best_value, static_cast<long>(best)};
}

ScoreVector score_vector(const Completion& completion, const ParsedOutput& parsed,
                         const Framework& fw, std::vector<std::string>* diagnostics) {
  if (!fw.scheme.is_binary())
    throw UsageError("score extraction is defined for binary schemes only");
  if (!completion.logprobs)
    throw UsageError("completion carries no token logprobs");

  auto note = [diagnostics](std::string message) {
    if (diagnostics) diagnostics->push_back(std::move(message));
  };

  const auto& tokens = *completion.logprobs;
  std::vector<std::size_t> starts(tokens.size());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    starts[k] = offset;
    offset += tokens[k].token.size();
  }
  const bool aligned = offset == completion.text.size();
  if (!aligned && !tokens.empty())
    note("token stream does not reconstruct the output text; using hard labels");

  ScoreVector scores(fw.dimensions.size(), 0.0);
  for (std::size_t dim = 0; dim < fw.dimensions.size(); ++dim) {
    const int label = parsed.labels.values[dim];
    const std::string surface = fw.scheme.encode(label);
    const double hard = static_cast<double>(label);
    const long value_offset = dim < parsed.value_offsets.size() ? parsed.value_offsets[dim] : -1;

    if (!aligned || value_offset < 0) {
      if (aligned)
        note("no label position for '" + fw.dimensions[dim] + "'; using hard label");
      scores[dim] = hard;
      continue;
    }

    // First token at or after the value offset whose trimmed text is a legal
    // label surface form.
    std::size_t position = tokens.size();
    std::size_t k = 0;
    while (k + 1 < tokens.size() &&
           starts[k + 1] <= static_cast<std::size_t>(value_offset))
      ++k;
    for (; k < tokens.size(); ++k) {
      const auto stripped = strip_token_markers(tokens[k].token);
      if (stripped == "0" || stripped == "1") {
        position = k;
        break;
      }
    }
    if (position == tokens.size()) {
      note("no label token located for '" + fw.dimensions[dim] + "'; using hard label");
      scores[dim] = hard;
      continue;
    }

    try {
      const auto extraction = extract_label_probability(tokens[position], surface);
      scores[dim] = extraction.u_m;
      if (extraction.degraded)
        note("degraded logprobs for '" + fw.dimensions[dim] + "'; hard 0/1 score");
    } catch (const UsageError& e) {
      note("extraction failed for '" + fw.dimensions[dim] + "' (" + e.what() +
           "); using hard label");
      scores[dim] = hard;
    }
  }
  return scores;
}

}  // namespace mova
