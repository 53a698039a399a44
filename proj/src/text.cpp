#include "ser/text.hpp"

#include <cctype>

namespace ser {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

// Non-ASCII bytes count as word characters so UTF-8 names stay intact.
bool is_wordish(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

bool is_alpha(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalpha(u) != 0;
}

void split_chunk(std::string_view text, std::size_t begin, std::size_t end,
                 std::vector<Token>& out) {
  std::vector<Token> trailing;

  while (begin < end && is_punct(text[begin])) {
    if (text[begin] == '.' && begin + 1 < end && is_alpha(text[begin + 1])) break;
    out.push_back({std::string(1, text[begin]), begin, begin + 1});
    ++begin;
  }

  while (end > begin && is_punct(text[end - 1])) {
    const char c = text[end - 1];
    if (c == '+' || c == '#') {
      std::size_t run = end;
      while (run > begin && (text[run - 1] == '+' || text[run - 1] == '#')) --run;
      if (run > begin && is_wordish(text[run - 1])) break;
    }
    trailing.push_back({std::string(1, c), end - 1, end});
    --end;
  }

  if (begin < end) out.push_back({std::string(text.substr(begin, end - begin)), begin, end});
  out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (start < i) split_chunk(text, start, i, tokens);
  }
  return tokens;
}

}  // namespace ser
