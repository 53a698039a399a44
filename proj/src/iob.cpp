#include "ser/iob.hpp"

namespace ser {

std::string to_string(IobViolationReason reason) {
  switch (reason) {
    case IobViolationReason::kInsideWithoutBegin: return "I-without-B";
    case IobViolationReason::kInsideTypeMismatch: return "I-type-mismatch";
  }
  return "unknown";
}

std::vector<IobViolation> validate_iob(std::span<const TagLabel> labels) {
  std::vector<IobViolation> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].kind != TagKind::kInside) continue;
    if (i == 0 || labels[i - 1].is_outside()) {
      out.push_back({i, IobViolationReason::kInsideWithoutBegin});
    } else if (labels[i - 1].type != labels[i].type) {
      out.push_back({i, IobViolationReason::kInsideTypeMismatch});
    }
  }
  return out;
}

std::vector<TagLabel> encode_iob(std::size_t n_tokens, std::span<const Span> spans) {
  std::vector<TagLabel> labels(n_tokens, TagLabel::outside());
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const Span& s = spans[k];
    if (s.start >= s.end || s.end > n_tokens) {
      throw DataError("span " + std::to_string(k) + " [" + std::to_string(s.start) + "," +
                      std::to_string(s.end) + ") out of range for " +
                      std::to_string(n_tokens) + " tokens");
    }
    if (k > 0 && s.start < spans[k - 1].end) {
      throw DataError("overlapping or unsorted spans " + std::to_string(k - 1) + " [" +
                      std::to_string(spans[k - 1].start) + "," +
                      std::to_string(spans[k - 1].end) + ") and " + std::to_string(k) +
                      " [" + std::to_string(s.start) + "," + std::to_string(s.end) + ")");
    }
    labels[s.start] = TagLabel::begin(s.type);
    for (std::size_t i = s.start + 1; i < s.end; ++i) labels[i] = TagLabel::inside(s.type);
  }
  return labels;
}

std::vector<Span> decode_spans(std::span<const TagLabel> labels) {
  const auto violations = validate_iob(labels);
  if (!violations.empty()) {
    throw DataError("malformed IOB at index " + std::to_string(violations.front().index) +
                    ": " + to_string(violations.front().reason));
  }
  std::vector<Span> spans;
  for (std::size_t i = 0; i < labels.size();) {
    if (labels[i].kind != TagKind::kBegin) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j].kind == TagKind::kInside) ++j;
    spans.push_back({i, j, labels[i].type});
    i = j;
  }
  return spans;
}

std::vector<TagLabel> repair_iob(std::span<const TagLabel> labels) {
  std::vector<TagLabel> out(labels.begin(), labels.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].kind != TagKind::kInside) continue;
    if (i == 0 || out[i - 1].is_outside() || out[i - 1].type != out[i].type) {
      out[i].kind = TagKind::kBegin;
    }
  }
  return out;
}

}  // namespace ser
