#include "ser/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include "ser/iob.hpp"

namespace ser {

PrfRow prf_from_counts(std::size_t gold, std::size_t predicted, std::size_t true_positive) {
  PrfRow r{gold, predicted, true_positive, 0.0, 0.0, 0.0};
  if (gold == 0 && predicted == 0) {
    r.precision = r.recall = r.f1 = 1.0;
    return r;
  }
  const auto tp = static_cast<double>(true_positive);
  if (predicted) r.precision = tp / static_cast<double>(predicted);
  if (gold) r.recall = tp / static_cast<double>(gold);
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

MetricTable strict_span_prf(const std::vector<std::vector<Span>>& pred,
                            const std::vector<std::vector<Span>>& gold) {
  if (pred.size() != gold.size()) throw DataError("prediction and gold differ in sentence count");
  std::array<std::size_t, kNumEntityTypes> g{}, p{}, tp{};
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const std::set<Span> gs(gold[s].begin(), gold[s].end());
    for (const auto& span : gold[s]) ++g[static_cast<std::size_t>(span.type)];
    for (const auto& span : pred[s]) {
      ++p[static_cast<std::size_t>(span.type)];
      if (gs.count(span)) ++tp[static_cast<std::size_t>(span.type)];
    }
  }
  MetricTable t;
  std::size_t G = 0, P = 0, TP = 0;
  for (std::size_t k = 0; k < kNumEntityTypes; ++k) {
    t.per_type[k] = prf_from_counts(g[k], p[k], tp[k]);
    G += g[k];
    P += p[k];
    TP += tp[k];
    if (g[k]) {
      ++t.macro_types;
      t.macro.precision += t.per_type[k].precision;
      t.macro.recall += t.per_type[k].recall;
      t.macro.f1 += t.per_type[k].f1;
    }
  }
  t.micro = prf_from_counts(G, P, TP);
  t.macro.gold = G;
  t.macro.predicted = P;
  t.macro.true_positive = TP;
  if (t.macro_types) {
    const auto n = static_cast<double>(t.macro_types);
    t.macro.precision /= n;
    t.macro.recall /= n;
    t.macro.f1 /= n;
  } else {
    t.macro.precision = t.macro.recall = t.macro.f1 = P ? 0.0 : 1.0;
  }
  return t;
}

MetricTable strict_span_prf(const Corpus& pred, const Corpus& gold) {
  if (pred.size() != gold.size()) {
    throw DataError("prediction has " + std::to_string(pred.size()) + " sentences, gold has " +
                    std::to_string(gold.size()));
  }
  std::vector<std::vector<Span>> ps, gs;
  ps.reserve(gold.size());
  gs.reserve(gold.size());
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& a = pred.sentences[s];
    const auto& b = gold.sentences[s];
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = a.tokens[i].surface == b.tokens[i].surface;
    if (!same) {
      throw DataError("tokenization differs at sentence " + std::to_string(s) +
                      (b.source_id.empty() ? "" : " (" + b.source_id + ")"));
    }
    ps.push_back(decode_spans(a.labels));
    gs.push_back(decode_spans(b.labels));
  }
  return strict_span_prf(ps, gs);
}

std::string format_pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", std::round(fraction * 1000.0) / 10.0);
  return buf;
}

std::string display_name(EntityType type) {
  std::string s(to_string(type));
  bool start = true;
  for (auto& c : s) {
    if (c == '_') {
      c = ' ';
      start = true;
    } else {
      c = start ? c : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      start = false;
    }
  }
  return s;
}

namespace {

std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string with_commas(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::size_t label_width(const std::vector<std::string>& labels, std::size_t min) {
  std::size_t w = min;
  for (const auto& l : labels) w = std::max(w, l.size());
  return w + 2;
}

}  // namespace

std::string format_prf(const PrfRow& row) {
  return format_pct(row.precision) + " " + format_pct(row.recall) + " " + format_pct(row.f1);
}

std::string render_overall_table(const std::vector<std::pair<std::string, MetricTable>>& rows) {
  std::vector<std::string> labels;
  for (const auto& r : rows) labels.push_back(r.first);
  const auto w = label_width(labels, 6);
  std::ostringstream out;
  out << pad_right("", w) << pad_left("P", 6) << pad_left("R", 6) << pad_left("F1", 6) << '\n';
  for (const auto& [label, t] : rows) {
    out << pad_right(label, w) << pad_left(format_pct(t.micro.precision), 6)
        << pad_left(format_pct(t.micro.recall), 6) << pad_left(format_pct(t.micro.f1), 6) << '\n';
  }
  return out.str();
}

std::string render_type_table(const MetricTable& table) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < kNumEntityTypes; ++k) {
    if (table.per_type[k].gold) order.push_back(k);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.per_type[a].f1 < table.per_type[b].f1;
  });
  const std::size_t w = 18;
  std::ostringstream out;
  out << pad_right("", w) << pad_left("# Spans", 9) << pad_left("P", 6) << pad_left("R", 6)
      << pad_left("F1", 6) << '\n';
  for (const auto k : order) {
    const auto& r = table.per_type[k];
    out << pad_right(display_name(static_cast<EntityType>(k)), w) << pad_left(with_commas(r.gold), 9)
        << pad_left(format_pct(r.precision), 6) << pad_left(format_pct(r.recall), 6)
        << pad_left(format_pct(r.f1), 6) << '\n';
  }
  for (const auto& [label, r] : {std::pair<std::string, PrfRow>{"Micro Avg.", table.micro},
                                 std::pair<std::string, PrfRow>{"Macro Avg.", table.macro}}) {
    out << pad_right(label, w) << pad_left("-", 9) << pad_left(format_pct(r.precision), 6)
        << pad_left(format_pct(r.recall), 6) << pad_left(format_pct(r.f1), 6) << '\n';
  }
  return out.str();
}

std::string render_k_table(const std::vector<std::size_t>& ks, const std::vector<KSweepRow>& rows) {
  std::vector<std::string> labels = {"# Forward Passes (K)"};
  for (const auto& r : rows) labels.push_back(r.label);
  const auto w = label_width(labels, 6);
  std::ostringstream out;
  out << pad_right("# Forward Passes (K)", w);
  for (const auto k : ks) out << pad_left(std::to_string(k), 6);
  out << '\n';
  for (const auto& r : rows) {
    out << pad_right(r.label, w);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      out << pad_left(i < r.f1.size() ? format_pct(r.f1[i]) : "-", 6);
    }
    out << '\n';
  }
  return out.str();
}

std::string render_resource_table(const std::vector<ResourceRow>& rows) {
  std::vector<std::string> labels;
  for (const auto& r : rows) labels.push_back(r.label);
  const auto w = label_width(labels, 6);
  auto mb = [](std::size_t bytes) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << static_cast<double>(bytes) / (1024.0 * 1024.0);
    return s.str();
  };
  std::ostringstream out;
  out << pad_right("", w) << pad_left("Wall-clock time (s)", 21) << pad_left("Peak RSS (MB)", 15)
      << pad_left("Params (MB)", 13) << pad_left("Optimizer (MB)", 16) << '\n';
  for (const auto& r : rows) {
    std::ostringstream secs;
    secs << std::fixed << std::setprecision(2) << r.wall_seconds;
    out << pad_right(r.label, w) << pad_left(secs.str(), 21) << pad_left(mb(r.peak_rss_bytes), 15)
        << pad_left(mb(r.parameter_bytes), 13) << pad_left(mb(r.optimizer_bytes), 16) << '\n';
  }
  return out.str();
}

}  // namespace ser
