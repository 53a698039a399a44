#include "ser/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_set>

#include "ser/iob.hpp"
#include "ser/random.hpp"

namespace ser {

namespace {

void finish_sentence(Corpus& corpus, LabeledSentence& current, std::vector<std::string>& surfaces,
                     std::size_t first_line) {
  if (surfaces.empty()) return;
  current.tokens = tokens_from_surfaces(surfaces);
  const auto violations = validate_iob(current.labels);
  if (!violations.empty()) {
    throw DataError("line " + std::to_string(first_line + violations.front().index) +
                    ": malformed IOB (" + to_string(violations.front().reason) + ")");
  }
  corpus.sentences.push_back(std::move(current));
  current = {};
  surfaces.clear();
}

}  // namespace

Corpus read_conll(std::istream& in) {
  Corpus corpus;
  LabeledSentence current;
  std::vector<std::string> surfaces;
  bool pending_comment = false;
  std::size_t first_line = 0;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      finish_sentence(corpus, current, surfaces, first_line);
      pending_comment = false;
      continue;
    }
    if (line.rfind("# ", 0) == 0) {
      if (!surfaces.empty() || pending_comment) {
        throw DataError("line " + std::to_string(line_no) + ": comment inside a sentence");
      }
      current.source_id = line.substr(2);
      pending_comment = true;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos) {
      throw DataError("line " + std::to_string(line_no) +
                      ": expected '<surface>\\t<label>', got '" + line + "'");
    }
    const std::string label_text = line.substr(tab + 1);
    const auto label = parse_label(label_text);
    if (!label) {
      throw DataError("line " + std::to_string(line_no) + ": unknown label '" + label_text + "'");
    }
    if (surfaces.empty()) first_line = line_no;
    surfaces.push_back(line.substr(0, tab));
    current.labels.push_back(*label);
  }
  if (pending_comment && surfaces.empty()) {
    throw DataError("line " + std::to_string(line_no) + ": comment without a sentence");
  }
  finish_sentence(corpus, current, surfaces, first_line);
  return corpus;
}

Corpus read_conll(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return read_conll(in);
}

void write_conll(std::ostream& out, const Corpus& corpus) {
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sent = corpus.sentences[s];
    if (s) out << '\n';
    if (!sent.source_id.empty()) out << "# " << sent.source_id << '\n';
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      out << sent.tokens[i].surface << '\t' << to_string(sent.labels[i]) << '\n';
    }
  }
}

void write_conll(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  write_conll(out, corpus);
  if (!out) throw DataError("write failed for " + path.string());
}

void validate_corpus(const Corpus& corpus) {
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sent = corpus.sentences[s];
    if (sent.tokens.size() != sent.labels.size()) {
      throw DataError("sentence " + std::to_string(s) + ": token/label count mismatch");
    }
    const auto violations = validate_iob(sent.labels);
    if (!violations.empty()) {
      throw DataError("sentence " + std::to_string(s) + ": malformed IOB at token " +
                      std::to_string(violations.front().index));
    }
  }
}

CorpusSplits stratified_split(const Corpus& corpus, SplitSizes sizes, std::uint64_t seed) {
  const std::size_t total = sizes.train + sizes.val + sizes.test;
  if (total > corpus.size()) {
    throw DataError("split sizes sum to " + std::to_string(total) + " but corpus has " +
                    std::to_string(corpus.size()) + " sentences");
  }

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed({seed, 0x5b1u}));
  shuffle_in_place(order, rng);
  order.resize(total);

  std::vector<std::array<std::size_t, kNumEntityTypes>> type_counts(total);
  std::array<double, kNumEntityTypes> global{};
  for (std::size_t k = 0; k < total; ++k) {
    for (const auto& span : decode_spans(corpus.sentences[order[k]].labels)) {
      ++type_counts[k][static_cast<std::size_t>(span.type)];
      global[static_cast<std::size_t>(span.type)] += 1.0;
    }
  }

  const std::array<std::size_t, 3> capacity = {sizes.train, sizes.val, sizes.test};
  std::array<std::size_t, 3> filled{};
  std::array<std::array<double, kNumEntityTypes>, 3> have{};
  std::array<Corpus*, 3> targets{};
  CorpusSplits out;
  targets = {&out.train, &out.val, &out.test};

  for (std::size_t k = 0; k < total; ++k) {
    int best = -1;
    double best_deficit = 0.0;
    double best_room = 0.0;
    for (int s = 0; s < 3; ++s) {
      if (filled[s] >= capacity[s]) continue;
      const double share = static_cast<double>(capacity[s]) / static_cast<double>(total);
      double deficit = 0.0;
      for (std::size_t t = 0; t < kNumEntityTypes; ++t) {
        if (type_counts[k][t] == 0) continue;
        const double target = share * global[t];
        deficit += static_cast<double>(type_counts[k][t]) * (1.0 - have[s][t] / target);
      }
      const double room = 1.0 - static_cast<double>(filled[s]) / static_cast<double>(capacity[s]);
      if (best < 0 || deficit > best_deficit ||
          (deficit == best_deficit && room > best_room)) {
        best = s;
        best_deficit = deficit;
        best_room = room;
      }
    }
    ++filled[best];
    for (std::size_t t = 0; t < kNumEntityTypes; ++t) {
      have[best][t] += static_cast<double>(type_counts[k][t]);
    }
    targets[best]->sentences.push_back(corpus.sentences[order[k]]);
  }

  for (auto* c : targets) c->metadata = corpus.metadata;
  out.train.metadata.name += ".train";
  out.val.metadata.name += ".val";
  out.test.metadata.name += ".test";
  return out;
}

Corpus dedup_and_filter(const Corpus& corpus) {
  Corpus out;
  out.metadata = corpus.metadata;
  std::unordered_set<std::string> seen;
  for (const auto& sent : corpus.sentences) {
    const bool has_entity =
        std::any_of(sent.labels.begin(), sent.labels.end(),
                    [](const TagLabel& l) { return l.kind == TagKind::kBegin; });
    if (!has_entity) continue;
    if (!seen.insert(sent.joined_surfaces()).second) continue;
    out.sentences.push_back(sent);
  }
  return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.sentences = corpus.size();
  for (const auto& sent : corpus.sentences) {
    const auto spans = decode_spans(sent.labels);
    if (stats.spans_per_sentence.size() <= spans.size()) {
      stats.spans_per_sentence.resize(spans.size() + 1, 0);
    }
    ++stats.spans_per_sentence[spans.size()];
    stats.spans += spans.size();
    for (const auto& span : spans) ++stats.spans_by_type[static_cast<std::size_t>(span.type)];
  }
  return stats;
}

std::size_t entity_token_count(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& sent : corpus.sentences) {
    for (const auto& l : sent.labels) n += l.is_outside() ? 0 : 1;
  }
  return n;
}

}  // namespace ser
