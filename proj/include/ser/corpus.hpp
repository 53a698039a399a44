#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ser/types.hpp"

namespace ser {

// CoNLL-style text: one `<surface>\t<label>` line per token, one blank line
// between sentences, optional `# <source_id>` line ahead of a sentence.
Corpus read_conll(std::istream& in);
Corpus read_conll(const std::filesystem::path& path);
void write_conll(std::ostream& out, const Corpus& corpus);
void write_conll(const std::filesystem::path& path, const Corpus& corpus);

// Throws DataError naming the first sentence whose labels are malformed.
void validate_corpus(const Corpus& corpus);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct CorpusSplits {
  Corpus train;
  Corpus val;
  Corpus test;
};

// Sentences are visited in a seeded random order; the first
// train+val+test of that order are selected, and each is assigned to the
// open split whose relative per-type deficit is largest.
CorpusSplits stratified_split(const Corpus& corpus, SplitSizes sizes, std::uint64_t seed);

// Drops sentences without spans and repeated token-surface sequences.
Corpus dedup_and_filter(const Corpus& corpus);

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t spans = 0;
  std::array<std::size_t, kNumEntityTypes> spans_by_type{};
  std::vector<std::size_t> spans_per_sentence;  // [k] = #sentences with k spans

  std::size_t histogram(std::size_t k) const {
    return k < spans_per_sentence.size() ? spans_per_sentence[k] : 0;
  }
};

CorpusStats corpus_stats(const Corpus& corpus);

std::size_t entity_token_count(const Corpus& corpus);

}  // namespace ser
