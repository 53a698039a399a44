#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ser {

// Error categories map onto the CLI exit codes (usage 1, data 2, training 3).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EntityType : std::uint8_t {
  kAlgorithm,
  kApplication,
  kArchitecture,
  kDataStructure,
  kDevice,
  kErrorName,
  kGeneralConcept,
  kLanguage,
  kLibrary,
  kLicense,
  kOperatingSystem,
  kProtocol,
};

inline constexpr std::size_t kNumEntityTypes = 12;
inline constexpr std::size_t kNumLabels = 1 + 2 * kNumEntityTypes;

inline constexpr std::array<EntityType, kNumEntityTypes> kAllEntityTypes = {
    EntityType::kAlgorithm,       EntityType::kApplication,     EntityType::kArchitecture,
    EntityType::kDataStructure,   EntityType::kDevice,          EntityType::kErrorName,
    EntityType::kGeneralConcept,  EntityType::kLanguage,        EntityType::kLibrary,
    EntityType::kLicense,         EntityType::kOperatingSystem, EntityType::kProtocol,
};

std::string_view to_string(EntityType type);
std::optional<EntityType> parse_entity_type(std::string_view text);

enum class TagKind : std::uint8_t { kOutside, kBegin, kInside };

struct TagLabel {
  TagKind kind = TagKind::kOutside;
  EntityType type = EntityType::kAlgorithm;  // meaningless when kind == kOutside

  static TagLabel outside() { return {}; }
  static TagLabel begin(EntityType t) { return {TagKind::kBegin, t}; }
  static TagLabel inside(EntityType t) { return {TagKind::kInside, t}; }

  bool is_outside() const { return kind == TagKind::kOutside; }

  // Dense id in [0, 25): O = 0, B-X = 1 + 2x, I-X = 2 + 2x.
  std::size_t id() const;
  static TagLabel from_id(std::size_t id);

  friend bool operator==(const TagLabel& a, const TagLabel& b) {
    if (a.kind != b.kind) return false;
    return a.kind == TagKind::kOutside || a.type == b.type;
  }
};

std::string to_string(const TagLabel& label);
std::optional<TagLabel> parse_label(std::string_view text);

struct Token {
  std::string surface;
  std::size_t char_start = 0;  // byte offsets into the sentence text
  std::size_t char_end = 0;    // exclusive

  friend bool operator==(const Token&, const Token&) = default;
};

struct Span {
  std::size_t start = 0;  // token index
  std::size_t end = 0;    // exclusive
  EntityType type = EntityType::kAlgorithm;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct LabeledSentence {
  std::vector<Token> tokens;
  std::vector<TagLabel> labels;
  std::string source_id;

  std::size_t size() const { return tokens.size(); }
  std::string joined_surfaces() const;
};

// Content equality: surfaces, labels and source id. Token offsets are derived.
bool same_content(const LabeledSentence& a, const LabeledSentence& b);

struct CorpusMetadata {
  std::string name;
  std::string creation_params;
  std::string snapshot_id;
};

struct Corpus {
  std::vector<LabeledSentence> sentences;
  CorpusMetadata metadata;

  std::size_t size() const { return sentences.size(); }
};

bool same_content(const Corpus& a, const Corpus& b);

// Builds tokens for pre-split surfaces, offsets as if joined by single spaces.
std::vector<Token> tokens_from_surfaces(const std::vector<std::string>& surfaces);

}  // namespace ser
