#pragma once

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ser/markup.hpp"
#include "ser/types.hpp"
#include "ser/wiki.hpp"

namespace ser {

struct SentenceSlice {
  std::size_t begin = 0;  // trimmed sentence text [begin, end)
  std::size_t end = 0;
};

// Boundaries sit after '.', '!' or '?' when followed by whitespace and an
// uppercase letter, unless the word ending there is a known abbreviation.
// Slices are trimmed of surrounding whitespace; consecutive slices plus the
// whitespace between them cover the whole text.
std::vector<SentenceSlice> split_sentences(std::string_view text);

class Lemmatizer {
 public:
  virtual ~Lemmatizer() = default;
  virtual std::string lemma(std::string_view surface) const = 0;
};

// Lowercases; strips a plural "es" after s/x/ch/sh and otherwise a plural "s"
// from alphabetic-ending words of length >= 4 not ending in "ss", "us" or
// "is". A fixed exception list ("its", "os", ...) is left alone. Idempotent.
class RuleLemmatizer final : public Lemmatizer {
 public:
  std::string lemma(std::string_view surface) const override;
};

struct LinkMention {
  std::string surface;
  std::string target;           // canonical lexicon title
  std::size_t plain_start = 0;  // offsets into the stripped text
  std::size_t plain_end = 0;
};

struct LinkExtraction {
  StrippedText text;
  std::vector<LinkMention> mentions;
};

// Links whose target does not resolve to a lexicon entry are ignored.
LinkExtraction extract_link_mentions(std::string_view body, const EntityLexicon& lexicon);

struct KeywordMatch {
  std::size_t start = 0;  // token indices, end exclusive
  std::size_t end = 0;
  std::string target;
};

struct MatcherOptions {
  // Aliases of at most this many bytes must match token surfaces exactly.
  std::size_t case_sensitive_max_length = 4;
};

// Alias index over every alias of every lexicon entry.
class KeywordMatcher {
 public:
  KeywordMatcher(const EntityLexicon& lexicon, const Lemmatizer& lemmatizer,
                 MatcherOptions options = {});

  // Left-to-right longest match; never overlaps `blocked` token ranges nor
  // other matches.
  std::vector<KeywordMatch> match(const std::vector<Token>& tokens,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& blocked) const;

 private:
  struct AliasForm {
    std::vector<std::string> keys;  // lemmas, or exact surfaces when case-sensitive
    bool case_sensitive = false;
    std::string target;
  };
  const Lemmatizer& lemmatizer_;
  std::vector<AliasForm> forms_;
  std::size_t longest_ = 0;
};

// Lower score means more plausible (perplexity-like).
class TypeScorer {
 public:
  virtual ~TypeScorer() = default;
  virtual double score(const std::string& first_sentence, EntityType candidate) = 0;
};

// 1 / (1 + |type keywords ∩ sentence lemmas|).
class StubScorer final : public TypeScorer {
 public:
  explicit StubScorer(const Lemmatizer& lemmatizer) : lemmatizer_(lemmatizer) {}
  double score(const std::string& first_sentence, EntityType candidate) override;
  static const std::vector<std::string>& keywords(EntityType type);

 private:
  const Lemmatizer& lemmatizer_;
};

// Out-of-process scorer. Each request is one line
//   <first sentence>\t<CANDIDATE_TYPE>\n
// written to the child's stdin; the child answers with one line holding a
// nonnegative real.
class ExternalScorer final : public TypeScorer {
 public:
  explicit ExternalScorer(const std::string& command);
  ~ExternalScorer() override;
  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  double score(const std::string& first_sentence, EntityType candidate) override;

 private:
  int pid_ = -1;
  std::FILE* to_child_ = nullptr;
  std::FILE* from_child_ = nullptr;
};

struct TypeInference {
  EntityType type = EntityType::kAlgorithm;
  int stage = 0;  // 1 deepest category, 2 majority, 3 scorer
};

std::string first_sentence(const Page& page);

// Throws DataError when the page has no alive typed category.
TypeInference infer_entity_type(const Page& page, const CategoryGraph& graph,
                                 const std::map<std::string, EntityType>& type_map,
                                 TypeScorer& scorer);

struct LabelingLog {
  std::vector<std::string> messages;
  std::size_t raw_sentences = 0;
};

// Pages are processed in title order; each sentence becomes a
// LabeledSentence with source id "<title>#<index>". Entity-free and duplicate
// sentences are removed at the end.
Corpus build_labeled_corpus(const WikiSnapshot& snapshot, const std::set<std::string>& selected,
                            const EntityLexicon& lexicon, const Lemmatizer& lemmatizer,
                            LabelingLog* log = nullptr, MatcherOptions options = {});

// ---------------------------------------------------------------------------
// End-to-end pipeline

struct PipelineConfig {
  std::string root = "Computing";
  std::filesystem::path blocklist;  // optional
  std::string heuristic = "min_count(2)";
  std::filesystem::path manual_map;
  std::size_t manual_depth = 2;
  std::string scorer = "stub";  // stub | external
  std::string scorer_command;   // for external

  // Flat `key = value` file; relative paths resolve against the file's folder.
  static PipelineConfig load(const std::filesystem::path& path);
};

struct PipelineResult {
  Corpus corpus;
  EntityLexicon lexicon;
  CategoryGraph graph;
  std::set<std::string> selected;
  std::map<std::string, TypeInference> inferred;
  std::array<std::size_t, 4> stage_counts{};  // index = stage
  LabelingLog log;
};

PipelineResult run_pipeline(const WikiSnapshot& snapshot, const PipelineConfig& config);

}  // namespace ser
