#include "ser/types.hpp"

namespace ser {

namespace {

constexpr std::array<std::string_view, kNumEntityTypes> kTypeNames = {
    "ALGORITHM", "APPLICATION",     "ARCHITECTURE", "DATA_STRUCTURE",
    "DEVICE",    "ERROR_NAME",      "GENERAL_CONCEPT", "LANGUAGE",
    "LIBRARY",   "LICENSE",         "OPERATING_SYSTEM", "PROTOCOL",
};

}  // namespace

std::string_view to_string(EntityType type) {
  return kTypeNames[static_cast<std::size_t>(type)];
}

std::optional<EntityType> parse_entity_type(std::string_view text) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == text) return static_cast<EntityType>(i);
  }
  return std::nullopt;
}

std::size_t TagLabel::id() const {
  const auto t = static_cast<std::size_t>(type);
  switch (kind) {
    case TagKind::kOutside: return 0;
    case TagKind::kBegin: return 1 + 2 * t;
    case TagKind::kInside: return 2 + 2 * t;
  }
  return 0;
}

TagLabel TagLabel::from_id(std::size_t id) {
  if (id == 0 || id >= kNumLabels) return outside();
  const auto type = static_cast<EntityType>((id - 1) / 2);
  return (id % 2 == 1) ? begin(type) : inside(type);
}

std::string to_string(const TagLabel& label) {
  switch (label.kind) {
    case TagKind::kOutside: return "O";
    case TagKind::kBegin: return "B-" + std::string(to_string(label.type));
    case TagKind::kInside: return "I-" + std::string(to_string(label.type));
  }
  return "O";
}

std::optional<TagLabel> parse_label(std::string_view text) {
  if (text == "O") return TagLabel::outside();
  if (text.size() < 3 || text[1] != '-') return std::nullopt;
  const auto type = parse_entity_type(text.substr(2));
  if (!type) return std::nullopt;
  if (text[0] == 'B') return TagLabel::begin(*type);
  if (text[0] == 'I') return TagLabel::inside(*type);
  return std::nullopt;
}

std::string LabeledSentence::joined_surfaces() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].surface;
  }
  return out;
}

bool same_content(const LabeledSentence& a, const LabeledSentence& b) {
  if (a.source_id != b.source_id || a.labels != b.labels) return false;
  if (a.tokens.size() != b.tokens.size()) return false;
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    if (a.tokens[i].surface != b.tokens[i].surface) return false;
  }
  return true;
}

bool same_content(const Corpus& a, const Corpus& b) {
  if (a.sentences.size() != b.sentences.size()) return false;
  for (std::size_t i = 0; i < a.sentences.size(); ++i) {
    if (!same_content(a.sentences[i], b.sentences[i])) return false;
  }
  return true;
}

std::vector<Token> tokens_from_surfaces(const std::vector<std::string>& surfaces) {
  std::vector<Token> tokens;
  tokens.reserve(surfaces.size());
  std::size_t offset = 0;
  for (const auto& s : surfaces) {
    tokens.push_back({s, offset, offset + s.size()});
    offset += s.size() + 1;
  }
  return tokens;
}

}  // namespace ser
