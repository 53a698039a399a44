#include "ser/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "ser/corpus.hpp"
#include "ser/iob.hpp"
#include "ser/random.hpp"

namespace ser {

namespace {

EntityType other_type(EntityType t, Rng& rng) {
  auto k = static_cast<std::size_t>(uniform_index(rng, kNumEntityTypes - 1));
  if (k >= static_cast<std::size_t>(t)) ++k;
  return static_cast<EntityType>(k);
}

EntityType any_type(Rng& rng) {
  return static_cast<EntityType>(uniform_index(rng, kNumEntityTypes));
}

std::string type_or_o(const std::optional<EntityType>& t) {
  return t ? std::string(to_string(*t)) : "O";
}

void check_same_shape(const Corpus& a, const Corpus& b) {
  if (a.size() != b.size()) {
    throw DataError("corpora differ in sentence count (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (a.sentences[s].labels.size() != b.sentences[s].labels.size()) {
      throw DataError("sentence " + std::to_string(s) + " differs in length");
    }
  }
}

}  // namespace

void NoiseSpec::validate() const {
  for (const double p : {p_type_flip, p_drop, p_spurious}) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("noise probabilities must lie in [0, 1]");
  }
}

std::string_view to_string(ChangeKind kind) {
  switch (kind) {
    case ChangeKind::kTypeFlip: return "flip";
    case ChangeKind::kDrop: return "drop";
    case ChangeKind::kSpurious: return "spurious";
  }
  return "?";
}

void write_change_log(std::ostream& out, const ChangeLog& log) {
  for (const auto& c : log.changes) {
    out << c.sentence << '\t' << c.start << '\t' << c.end << '\t' << to_string(c.kind) << '\t'
        << type_or_o(c.before) << '\t' << type_or_o(c.after) << '\n';
  }
}

ChangeLog read_change_log(std::istream& in) {
  ChangeLog log;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw DataError("change log line " + std::to_string(line_no) + ": " + what);
  };
  auto parse_type = [&](const std::string& s) -> std::optional<EntityType> {
    if (s == "O") return std::nullopt;
    const auto t = parse_entity_type(s);
    if (!t) fail("unknown type '" + s + "'");
    return t;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 6) fail("expected 6 tab-separated fields");
    SpanChange c;
    try {
      c.sentence = std::stoul(f[0]);
      c.start = std::stoul(f[1]);
      c.end = std::stoul(f[2]);
    } catch (const std::exception&) {
      fail("bad index");
    }
    if (f[3] == "flip") c.kind = ChangeKind::kTypeFlip;
    else if (f[3] == "drop") c.kind = ChangeKind::kDrop;
    else if (f[3] == "spurious") c.kind = ChangeKind::kSpurious;
    else fail("unknown change kind '" + f[3] + "'");
    c.before = parse_type(f[4]);
    c.after = parse_type(f[5]);
    log.changes.push_back(c);
  }
  return log;
}

NoisyCorpus inject_noise(const Corpus& clean, const NoiseSpec& spec) {
  spec.validate();
  NoisyCorpus out;
  out.corpus.metadata = clean.metadata;
  out.corpus.sentences.reserve(clean.size());
  for (std::size_t s = 0; s < clean.size(); ++s) {
    const auto& sent = clean.sentences[s];
    Rng rng(derive_seed({spec.seed, 0x401e, s}));
    std::vector<Span> kept;
    for (const auto& span : decode_spans(sent.labels)) {
      // Fixed draw count per span keeps the streams aligned across specs.
      const double u_drop = uniform01(rng);
      const double u_flip = uniform01(rng);
      const EntityType replacement = other_type(span.type, rng);
      if (u_drop < spec.p_drop) {
        out.log.changes.push_back({s, span.start, span.end, ChangeKind::kDrop, span.type, {}});
      } else if (u_flip < spec.p_type_flip) {
        out.log.changes.push_back(
            {s, span.start, span.end, ChangeKind::kTypeFlip, span.type, replacement});
        kept.push_back({span.start, span.end, replacement});
      } else {
        kept.push_back(span);
      }
    }

    const double u_spur = uniform01(rng);
    if (u_spur < spec.p_spurious) {
      std::vector<std::pair<std::size_t, std::size_t>> runs;
      for (std::size_t i = 0; i < sent.labels.size();) {
        if (!sent.labels[i].is_outside()) {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j < sent.labels.size() && sent.labels[j].is_outside()) ++j;
        runs.emplace_back(i, j);
        i = j;
      }
      if (!runs.empty()) {
        const auto [rb, re] = runs[uniform_index(rng, runs.size())];
        const std::size_t len = 1 + uniform_index(rng, std::min<std::size_t>(3, re - rb));
        const std::size_t start = rb + uniform_index(rng, re - rb - len + 1);
        const EntityType t = any_type(rng);
        out.log.changes.push_back({s, start, start + len, ChangeKind::kSpurious, {}, t});
        kept.push_back({start, start + len, t});
        std::sort(kept.begin(), kept.end());
      }
    }

    LabeledSentence noisy = sent;
    noisy.labels = encode_iob(sent.size(), kept);
    out.corpus.sentences.push_back(std::move(noisy));
  }
  return out;
}

Corpus replay_changes(const Corpus& clean, const ChangeLog& log) {
  std::map<std::size_t, std::vector<const SpanChange*>> by_sentence;
  for (const auto& c : log.changes) {
    if (c.sentence >= clean.size()) {
      throw DataError("change refers to sentence " + std::to_string(c.sentence) +
                      " beyond corpus size " + std::to_string(clean.size()));
    }
    by_sentence[c.sentence].push_back(&c);
  }
  Corpus out = clean;
  for (const auto& [s, changes] : by_sentence) {
    auto spans = decode_spans(clean.sentences[s].labels);
    for (const auto* c : changes) {
      auto it = std::find_if(spans.begin(), spans.end(), [&](const Span& sp) {
        return sp.start == c->start && sp.end == c->end;
      });
      if (c->kind == ChangeKind::kSpurious) {
        if (it != spans.end() || !c->after) throw DataError("spurious change over existing span");
        spans.push_back({c->start, c->end, *c->after});
        continue;
      }
      if (it == spans.end() || !c->before || it->type != *c->before) {
        throw DataError("change does not match sentence " + std::to_string(s));
      }
      if (c->kind == ChangeKind::kDrop) {
        spans.erase(it);
      } else {
        if (!c->after) throw DataError("type flip without a new type");
        it->type = *c->after;
      }
    }
    std::sort(spans.begin(), spans.end());
    out.sentences[s].labels = encode_iob(clean.sentences[s].size(), spans);
  }
  return out;
}

double label_disagreement(const Corpus& a, const Corpus& b) {
  check_same_shape(a, b);
  std::size_t total = 0, differ = 0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    const auto& la = a.sentences[s].labels;
    const auto& lb = b.sentences[s].labels;
    total += la.size();
    for (std::size_t i = 0; i < la.size(); ++i) differ += !(la[i] == lb[i]);
  }
  return total ? static_cast<double>(differ) / static_cast<double>(total) : 0.0;
}

double z_value(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw UsageError("confidence must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), (1.0 + confidence) / 2.0);
}

std::size_t sample_size(double confidence, double margin, std::optional<std::size_t> population) {
  if (!(margin > 0.0 && margin < 1.0)) throw UsageError("margin must lie in (0, 1)");
  if (population && *population == 0) throw UsageError("population must be positive");
  const double z = z_value(confidence);
  double n = z * z * 0.25 / (margin * margin);
  if (population) n = n / (1.0 + (n - 1.0) / static_cast<double>(*population));
  return static_cast<std::size_t>(std::ceil(n));
}

AuditSample draw_audit_sample(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (n > corpus.size()) {
    throw DataError("sample of " + std::to_string(n) + " requested from " +
                    std::to_string(corpus.size()) + " sentences");
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed({seed, 0xa0d1}));
  // Partial Fisher-Yates: the first n positions are a uniform sample.
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);
  }
  AuditSample out;
  out.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  out.corpus.metadata = corpus.metadata;
  for (const auto i : out.indices) out.corpus.sentences.push_back(corpus.sentences[i]);
  out.label_count = entity_token_count(out.corpus);
  return out;
}

double cohen_kappa(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw DataError("kappa inputs differ in length");
  if (a.empty()) throw DataError("kappa of empty sequences");
  std::map<std::size_t, std::pair<double, double>> marginals;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    marginals[a[i]].first += 1.0;
    marginals[b[i]].second += 1.0;
  }
  const double n = static_cast<double>(a.size());
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [k, m] : marginals) p_e += (m.first / n) * (m.second / n);
  if (p_e >= 1.0) {
    if (p_o == 1.0) return 1.0;
    throw DataError("kappa undefined: chance agreement is 1");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

double cohen_kappa(const Corpus& a, const Corpus& b) {
  check_same_shape(a, b);
  std::vector<std::size_t> ia, ib;
  for (std::size_t s = 0; s < a.size(); ++s) {
    for (const auto& l : a.sentences[s].labels) ia.push_back(l.id());
    for (const auto& l : b.sentences[s].labels) ib.push_back(l.id());
  }
  return cohen_kappa(ia, ib);
}

}  // namespace ser
