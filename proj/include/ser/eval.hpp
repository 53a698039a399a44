#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ser/types.hpp"

namespace ser {

struct PrfRow {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t true_positive = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// P = TP/(TP+FP), R = TP/(TP+FN). A type with neither gold nor predicted
// spans scores 1/1/1; otherwise an empty denominator gives 0.
PrfRow prf_from_counts(std::size_t gold, std::size_t predicted, std::size_t true_positive);

struct MetricTable {
  std::array<PrfRow, kNumEntityTypes> per_type{};
  PrfRow micro;
  PrfRow macro;               // counts summed; P/R/F1 averaged over types with gold
  std::size_t macro_types = 0;
};

// Strict span match: identical (start, end, type). Sentences are paired by
// position and must have identical token surfaces.
MetricTable strict_span_prf(const Corpus& pred, const Corpus& gold);
MetricTable strict_span_prf(const std::vector<std::vector<Span>>& pred,
                            const std::vector<std::vector<Span>>& gold);

// x100 with one decimal ("73.8").
std::string format_pct(double fraction);
// "P R F1" as single-spaced percentages ("73.8 73.5 73.7").
std::string format_prf(const PrfRow& row);
// Human form of a type: "Operating System".
std::string display_name(EntityType type);

// Method rows with micro P/R/F1 (overall results).
std::string render_overall_table(const std::vector<std::pair<std::string, MetricTable>>& rows);
// Per-type rows sorted by F1, then micro and macro rows.
std::string render_type_table(const MetricTable& table);
// F1 by number of forward passes; one row per label.
struct KSweepRow {
  std::string label;
  std::vector<double> f1;  // aligned with the K list
};
std::string render_k_table(const std::vector<std::size_t>& ks, const std::vector<KSweepRow>& rows);

struct ResourceRow {
  std::string label;
  double wall_seconds = 0.0;
  std::size_t peak_rss_bytes = 0;
  std::size_t parameter_bytes = 0;
  std::size_t optimizer_bytes = 0;
};
std::string render_resource_table(const std::vector<ResourceRow>& rows);

}  // namespace ser
