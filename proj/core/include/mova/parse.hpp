#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mova/llm.hpp"
#include "mova/types.hpp"

namespace mova {

struct ParsedOutput {
  LabelVector labels;  // aligned with the framework's dimensions
  // Char offset of each dimension's decoded label token in the raw text; -1
  // when unknown. Drives label-token localization for extraction.
  std::vector<long> value_offsets;
  std::vector<std::string> diagnostics;
};

// Decodes the first balanced {...} block in `raw` (surrounding prose and code
// fences tolerated). Keys map to dimensions case-insensitively. Values decode
// per scheme; `(reason, value)` tuples from the +reason strategy are handled.
// With a non-empty `key_prefix` (e.g. "Action Two "), keys carrying it are
// matched after stripping and keys carrying a different action prefix are
// ignored. Throws ParseError on a missing block, missing dimension,
// duplicate key or illegal value.
ParsedOutput parse_label_block(const std::string& raw, const Framework& fw,
                               std::string_view key_prefix = {});

// Single-label reply from a 1-by-1 or chain prompt: the first standalone
// label surface token. Returns the value and its char offset.
std::pair<int, long> parse_single_label(const std::string& raw, const LabelScheme& scheme);

// Per-dimension probabilities via anti-token extraction at each located label
// token. Binary schemes only; requires token logprobs. Dimensions without a
// locatable position receive the hard label as probability, with a diagnostic.
ScoreVector score_vector(const Completion& completion, const ParsedOutput& parsed,
                         const Framework& fw,
                         std::vector<std::string>* diagnostics = nullptr);

}  // namespace mova
