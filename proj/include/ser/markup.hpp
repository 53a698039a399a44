#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ser {

struct MarkupLink {
  std::string target;
  std::string surface;
  std::size_t plain_start = 0;  // byte offsets into StrippedText::plain
  std::size_t plain_end = 0;
};

struct StrippedText {
  std::string plain;
  std::vector<MarkupLink> links;
  // source_offset[i] is the body offset of plain[i]; one extra entry maps
  // plain.size() to body.size().
  std::vector<std::size_t> source_offset;
};

// Grammar: `[[Target]]` or `[[Target|surface]]`; nesting is not allowed and
// every "[[" needs a matching "]]". Throws DataError with the byte offset of
// the first unbalanced bracket pair.
StrippedText strip_link_markup(std::string_view body);

}  // namespace ser
