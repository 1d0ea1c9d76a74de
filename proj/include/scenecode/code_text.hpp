// Text form of scene codes, as exchanged with the language model:
//
//   Vehicle Code:
//   - 'V1': [-1,0,0,4,4,4,4,4,4,1]
//   Map Code:
//   - 'Map': [2,0,0,0,-1,1]
//   Interaction Code:
//   - 'I1': [0,0,0,0,0] | [0,0,0,0,0]
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scenecode/codec.hpp"

namespace scenecode {

class CodeParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParsedCodes {
  CodeBundle bundle;
  /// One entry per clamped or coerced value.
  std::vector<std::string> warnings;
};

std::string serialize_codes(const CodeBundle& b);

/// Tolerant parser for model replies. Section headers are matched
/// case-insensitively; prose, markdown fences and blank lines are skipped.
/// Out-of-range values are clamped into their valid range with a warning.
/// Throws CodeParseError for a missing section, a V/I count mismatch, a wrong
/// code length or a non-numeric cell (with its line number).
ParsedCodes parse_codes(std::string_view text, int interaction_areas = 6);

}  // namespace scenecode
