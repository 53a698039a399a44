#include "ser/markup.hpp"

#include "ser/types.hpp"

namespace ser {

namespace {

void append(StrippedText& out, std::string_view body, std::size_t from, std::size_t to) {
  for (std::size_t i = from; i < to; ++i) {
    out.plain.push_back(body[i]);
    out.source_offset.push_back(i);
  }
}

}  // namespace

StrippedText strip_link_markup(std::string_view body) {
  StrippedText out;
  std::size_t i = 0;
  while (i < body.size()) {
    const auto open = body.find("[[", i);
    const auto stray_close = body.find("]]", i);
    if (stray_close != std::string_view::npos &&
        (open == std::string_view::npos || stray_close < open)) {
      throw DataError("unbalanced ']]' at offset " + std::to_string(stray_close));
    }
    if (open == std::string_view::npos) {
      append(out, body, i, body.size());
      break;
    }
    append(out, body, i, open);

    const auto close = body.find("]]", open + 2);
    if (close == std::string_view::npos) {
      throw DataError("unbalanced '[[' at offset " + std::to_string(open));
    }
    const auto nested = body.find("[[", open + 2);
    if (nested != std::string_view::npos && nested < close) {
      throw DataError("nested '[[' at offset " + std::to_string(nested));
    }

    const std::string_view inner = body.substr(open + 2, close - open - 2);
    const auto bar = inner.find('|');
    MarkupLink link;
    link.target = std::string(bar == std::string_view::npos ? inner : inner.substr(0, bar));
    const std::size_t surface_from = bar == std::string_view::npos ? open + 2 : open + 3 + bar;
    link.surface = std::string(body.substr(surface_from, close - surface_from));
    if (link.target.empty() || link.surface.empty()) {
      throw DataError("empty link at offset " + std::to_string(open));
    }
    link.plain_start = out.plain.size();
    append(out, body, surface_from, close);
    link.plain_end = out.plain.size();
    out.links.push_back(std::move(link));
    i = close + 2;
  }
  out.source_offset.push_back(body.size());
  return out;
}

}  // namespace ser
