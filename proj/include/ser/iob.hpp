#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ser/types.hpp"

namespace ser {

enum class IobViolationReason { kInsideWithoutBegin, kInsideTypeMismatch };

struct IobViolation {
  std::size_t index = 0;
  IobViolationReason reason = IobViolationReason::kInsideWithoutBegin;

  friend bool operator==(const IobViolation&, const IobViolation&) = default;
};

std::string to_string(IobViolationReason reason);

// Every I-X must directly follow B-X or I-X of the same type.
std::vector<IobViolation> validate_iob(std::span<const TagLabel> labels);

// Spans must be sorted by start, non-overlapping and inside [0, n_tokens).
// Throws DataError naming the first offending pair.
std::vector<TagLabel> encode_iob(std::size_t n_tokens, std::span<const Span> spans);

// Throws DataError at the first violation index when labels are malformed.
std::vector<Span> decode_spans(std::span<const TagLabel> labels);

// Orphan I-X (not continuing an X entity) becomes B-X. Output is always valid.
std::vector<TagLabel> repair_iob(std::span<const TagLabel> labels);

}  // namespace ser
