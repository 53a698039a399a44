#pragma once

#include <string_view>
#include <vector>

#include "ser/types.hpp"

namespace ser {

// Whitespace split, then leading and trailing ASCII punctuation is detached
// into single-character tokens. Two exceptions keep software names whole:
//   - a token-final run of '+' / '#' directly after a letter or digit stays
//     attached ("C++", "C#", "F#");
//   - a leading '.' directly before a letter stays attached (".NET").
// Interior punctuation is never split ("Node.js", "GNU/Linux", "Linux's").
// Offsets are byte offsets into `text`.
std::vector<Token> tokenize(std::string_view text);

}  // namespace ser
