#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ser/types.hpp"

namespace ser {

struct NoiseSpec {
  double p_type_flip = 0.10;
  double p_drop = 0.08;
  double p_spurious = 0.02;
  std::uint64_t seed = 0;

  void validate() const;  // UsageError unless every probability is in [0, 1]
};

enum class ChangeKind { kTypeFlip, kDrop, kSpurious };

std::string_view to_string(ChangeKind kind);

struct SpanChange {
  std::size_t sentence = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  ChangeKind kind = ChangeKind::kTypeFlip;
  std::optional<EntityType> before;  // nullopt = O
  std::optional<EntityType> after;

  friend bool operator==(const SpanChange&, const SpanChange&) = default;
};

struct ChangeLog {
  std::vector<SpanChange> changes;
};

// Text form, one change per line:
//   <sentence>\t<start>\t<end>\t<flip|drop|spurious>\t<before|O>\t<after|O>
void write_change_log(std::ostream& out, const ChangeLog& log);
ChangeLog read_change_log(std::istream& in);

struct NoisyCorpus {
  Corpus corpus;
  ChangeLog log;
};

// Span-level corruption. Each gold span is dropped with p_drop, otherwise its
// type is replaced by a uniformly drawn different type with p_type_flip. With
// p_spurious per sentence, a random 1-3 token stretch of one of the clean
// sentence's O runs becomes a span of a random type. Draws for sentence i come
// from a stream seeded by (seed, i).
NoisyCorpus inject_noise(const Corpus& clean, const NoiseSpec& spec);

// Applies a change log to a clean corpus.
Corpus replay_changes(const Corpus& clean, const ChangeLog& log);

// Fraction of token labels that differ. Throws DataError on shape mismatch.
double label_disagreement(const Corpus& a, const Corpus& b);

// Two-sided standard normal quantile at (1 + confidence) / 2.
double z_value(double confidence);

// Cochran: n0 = z^2 * 0.25 / margin^2, with the finite population correction
// n0 / (1 + (n0 - 1) / N) when a population is given; rounded up.
std::size_t sample_size(double confidence, double margin,
                        std::optional<std::size_t> population = std::nullopt);

struct AuditSample {
  Corpus corpus;
  std::vector<std::size_t> indices;  // into the source corpus, in draw order
  std::size_t label_count = 0;       // entity (non-O) token labels in the sample
};

AuditSample draw_audit_sample(const Corpus& corpus, std::size_t n, std::uint64_t seed);

// Throws DataError for unequal or empty inputs, or when p_e = 1 and the
// sequences differ.
double cohen_kappa(std::span<const std::size_t> a, std::span<const std::size_t> b);
double cohen_kappa(const Corpus& a, const Corpus& b);  // over token label ids

// Template sentences over a generated 12-type lexicon. Entity names share
// modifier words across types; most slots carry a type-indicative context word.
Corpus gen_synthetic_corpus(std::size_t n_sentences, std::size_t lexicon_size, std::uint64_t seed);

}  // namespace ser
