#include "ser/spanlabel.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ser/corpus.hpp"
#include "ser/iob.hpp"
#include "ser/text.hpp"

namespace ser {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

const std::set<std::string>& abbreviations() {
  static const std::set<std::string> kAbbrev = {
      "e.g.", "i.e.", "etc.", "vs.", "cf.", "al.", "approx.", "mr.", "mrs.", "dr.",
      "jr.",  "sr.",  "inc.", "ltd.", "co.", "corp.", "no.",  "fig.", "st.", "ver.",
  };
  return kAbbrev;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::vector<SentenceSlice> split_sentences(std::string_view text) {
  std::vector<SentenceSlice> out;
  const auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    if (b < e) out.push_back({b, e});
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 >= text.size() || !is_space(text[i + 1])) continue;
    std::size_t next = i + 1;
    while (next < text.size() && is_space(text[next])) ++next;
    if (next >= text.size() || !std::isupper(static_cast<unsigned char>(text[next]))) continue;
    if (c == '.') {
      std::size_t word = i;
      while (word > start && !is_space(text[word - 1])) --word;
      if (abbreviations().count(lower(text.substr(word, i + 1 - word))) != 0) continue;
    }
    emit(start, i + 1);
    start = i + 1;
  }
  emit(start, text.size());
  return out;
}

std::string RuleLemmatizer::lemma(std::string_view surface) const {
  static const std::set<std::string> kExceptions = {
      "its",    "os",      "ios",     "macos",  "chromeos", "tvos",   "watchos", "this",
      "his",    "was",     "has",     "does",   "always",   "news",   "series",  "species",
      "whereas", "perhaps", "sometimes", "kubernetes", "less", "unless", "thus", "various",
  };
  std::string word = lower(surface);
  if (surface.size() < 4 || kExceptions.count(word) != 0) return word;
  if (!std::all_of(word.begin(), word.end(),
                   [](unsigned char ch) { return std::isalpha(ch) != 0; })) {
    return word;
  }
  if (word.back() != 's' || ends_with(word, "ss") || ends_with(word, "us") ||
      ends_with(word, "is")) {
    return word;
  }
  if (ends_with(word, "sses") || ends_with(word, "xes") || ends_with(word, "ches") ||
      ends_with(word, "shes")) {
    word.resize(word.size() - 2);
  } else {
    word.pop_back();
  }
  return word;
}

// ---------------------------------------------------------------------------

LinkExtraction extract_link_mentions(std::string_view body, const EntityLexicon& lexicon) {
  LinkExtraction out;
  out.text = strip_link_markup(body);
  for (const auto& link : out.text.links) {
    const auto canonical = lexicon.resolve(link.target);
    if (!canonical) continue;
    out.mentions.push_back({link.surface, *canonical, link.plain_start, link.plain_end});
  }
  return out;
}

KeywordMatcher::KeywordMatcher(const EntityLexicon& lexicon, const Lemmatizer& lemmatizer,
                               MatcherOptions options)
    : lemmatizer_(lemmatizer) {
  for (const auto& [title, entry] : lexicon.entries) {
    for (const auto& alias : entry.aliases) {
      const auto tokens = tokenize(alias);
      if (tokens.empty()) continue;
      AliasForm form;
      form.target = title;
      form.case_sensitive = alias.size() <= options.case_sensitive_max_length;
      for (const auto& t : tokens) {
        form.keys.push_back(form.case_sensitive ? t.surface : lemmatizer_.lemma(t.surface));
      }
      longest_ = std::max(longest_, form.keys.size());
      forms_.push_back(std::move(form));
    }
  }
}

std::vector<KeywordMatch> KeywordMatcher::match(
    const std::vector<Token>& tokens,
    const std::vector<std::pair<std::size_t, std::size_t>>& blocked) const {
  std::vector<bool> taken(tokens.size(), false);
  for (const auto& [b, e] : blocked) {
    for (std::size_t i = b; i < e && i < tokens.size(); ++i) taken[i] = true;
  }
  std::vector<std::string> lemmas;
  lemmas.reserve(tokens.size());
  for (const auto& t : tokens) lemmas.push_back(lemmatizer_.lemma(t.surface));

  std::vector<KeywordMatch> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const AliasForm* best = nullptr;
    for (const auto& form : forms_) {
      const std::size_t n = form.keys.size();
      if (i + n > tokens.size()) continue;
      if (best && (n < best->keys.size() || (n == best->keys.size() && form.target >= best->target))) {
        continue;
      }
      bool ok = true;
      for (std::size_t k = 0; k < n && ok; ++k) {
        if (taken[i + k]) ok = false;
        const std::string& key = form.case_sensitive ? tokens[i + k].surface : lemmas[i + k];
        if (key != form.keys[k]) ok = false;
      }
      if (ok) best = &form;
    }
    if (!best) {
      ++i;
      continue;
    }
    out.push_back({i, i + best->keys.size(), best->target});
    i += best->keys.size();
  }
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& StubScorer::keywords(EntityType type) {
  static const std::array<std::vector<std::string>, kNumEntityTypes> kKeywords = {{
      {"algorithm", "method", "procedure", "technique", "heuristic", "network"},
      {"application", "app", "program", "browser", "editor", "client"},
      {"architecture", "microarchitecture", "instruction", "processor", "isa"},
      {"structure", "tree", "array", "queue", "heap", "stack"},
      {"device", "hardware", "phone", "smartphone", "tablet", "chip"},
      {"error", "bug", "exception", "overflow", "leak", "fault"},
      {"concept", "paradigm", "principle", "theory", "discipline", "field"},
      {"language", "syntax", "compiler", "interpreter", "dialect", "scripting"},
      {"library", "framework", "package", "api", "module", "toolkit"},
      {"license", "licence", "copyright", "copyleft", "permissive"},
      {"kernel", "operating", "distribution", "unix", "os", "firmware"},
      {"protocol", "standard", "communication", "transport", "packet"},
  }};
  return kKeywords[static_cast<std::size_t>(type)];
}

double StubScorer::score(const std::string& first_sentence, EntityType candidate) {
  std::set<std::string> lemmas;
  for (const auto& t : tokenize(first_sentence)) lemmas.insert(lemmatizer_.lemma(t.surface));
  std::size_t overlap = 0;
  for (const auto& k : keywords(candidate)) overlap += lemmas.count(k);
  return 1.0 / (1.0 + static_cast<double>(overlap));
}

ExternalScorer::ExternalScorer(const std::string& command) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) throw DataError("scorer: pipe() failed");
  pid_ = fork();
  if (pid_ < 0) throw DataError("scorer: fork() failed");
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = fdopen(in_pipe[1], "w");
  from_child_ = fdopen(out_pipe[0], "r");
}

ExternalScorer::~ExternalScorer() {
  if (to_child_) std::fclose(to_child_);
  if (from_child_) std::fclose(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

double ExternalScorer::score(const std::string& first_sentence, EntityType candidate) {
  std::string sentence = first_sentence;
  std::replace_if(sentence.begin(), sentence.end(),
                  [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  std::fprintf(to_child_, "%s\t%s\n", sentence.c_str(), std::string(to_string(candidate)).c_str());
  std::fflush(to_child_);
  char buffer[256];
  if (!std::fgets(buffer, sizeof buffer, from_child_)) {
    throw DataError("external scorer closed its output");
  }
  char* end = nullptr;
  const double value = std::strtod(buffer, &end);
  if (end == buffer || value < 0.0) {
    throw DataError("external scorer returned '" + trim(buffer) + "'");
  }
  return value;
}

// ---------------------------------------------------------------------------

std::string first_sentence(const Page& page) {
  const auto stripped = strip_link_markup(page.body);
  const auto slices = split_sentences(stripped.plain);
  if (slices.empty()) return {};
  return stripped.plain.substr(slices[0].begin, slices[0].end - slices[0].begin);
}

TypeInference infer_entity_type(const Page& page, const CategoryGraph& graph,
                                const std::map<std::string, EntityType>& type_map,
                                TypeScorer& scorer) {
  std::vector<std::pair<std::size_t, EntityType>> typed;  // (depth, type)
  const std::set<std::string> listed(page.categories.begin(), page.categories.end());
  for (const auto& c : listed) {
    if (!graph.is_alive(c)) continue;
    const auto it = type_map.find(c);
    if (it == type_map.end()) continue;
    typed.emplace_back(graph.depth.at(c), it->second);
  }
  if (typed.empty()) throw DataError("page '" + page.title + "' has no alive typed category");

  std::size_t deepest = 0;
  for (const auto& [d, t] : typed) deepest = std::max(deepest, d);
  std::array<std::size_t, kNumEntityTypes> votes{};
  std::size_t at_max = 0;
  EntityType only = EntityType::kAlgorithm;
  for (const auto& [d, t] : typed) {
    if (d != deepest) continue;
    ++at_max;
    only = t;
    ++votes[static_cast<std::size_t>(t)];
  }
  if (at_max == 1) return {only, 1};

  const std::size_t top = *std::max_element(votes.begin(), votes.end());
  std::vector<EntityType> tied;
  for (std::size_t t = 0; t < kNumEntityTypes; ++t) {
    if (votes[t] == top) tied.push_back(static_cast<EntityType>(t));
  }
  if (tied.size() == 1) return {tied.front(), 2};

  const std::string sentence = first_sentence(page);
  std::optional<EntityType> best;
  double best_score = 0.0;
  // `tied` is in enum order, which matches canonical string order, so strict
  // comparison keeps the lexicographically smallest on equal scores.
  for (const auto candidate : tied) {
    const double s = scorer.score(sentence, candidate);
    if (!best || s < best_score ||
        (s == best_score && to_string(candidate) < to_string(*best))) {
      best = candidate;
      best_score = s;
    }
  }
  return {*best, 3};
}

// ---------------------------------------------------------------------------

Corpus build_labeled_corpus(const WikiSnapshot& snapshot, const std::set<std::string>& selected,
                            const EntityLexicon& lexicon, const Lemmatizer& lemmatizer,
                            LabelingLog* log, MatcherOptions options) {
  LabelingLog local;
  LabelingLog& sink = log ? *log : local;
  const KeywordMatcher matcher(lexicon, lemmatizer, options);

  Corpus raw;
  raw.metadata.snapshot_id = snapshot.id;
  for (const auto& title : selected) {
    const Page* page = snapshot.find(title);
    if (!page) throw DataError("selected title '" + title + "' not in snapshot");
    const auto extraction = extract_link_mentions(page->body, lexicon);
    const std::string& plain = extraction.text.plain;
    const auto slices = split_sentences(plain);

    for (const auto& m : extraction.mentions) {
      const bool inside = std::any_of(slices.begin(), slices.end(), [&](const SentenceSlice& s) {
        return s.begin <= m.plain_start && m.plain_end <= s.end;
      });
      if (!inside) {
        sink.messages.push_back(title + ": link '" + m.surface + "' crosses a sentence boundary");
      }
    }

    for (std::size_t k = 0; k < slices.size(); ++k) {
      const auto& slice = slices[k];
      const std::string text = plain.substr(slice.begin, slice.end - slice.begin);
      LabeledSentence sent;
      sent.tokens = tokenize(text);
      sent.source_id = title + "#" + std::to_string(k + 1);
      ++sink.raw_sentences;

      std::vector<Span> spans;
      std::vector<std::pair<std::size_t, std::size_t>> linked;
      const auto type_of = [&](const std::string& target) -> std::optional<EntityType> {
        const auto it = lexicon.entries.find(target);
        if (it == lexicon.entries.end() || !it->second.type) {
          sink.messages.push_back(title + ": entity '" + target + "' has no type; mention skipped");
          return std::nullopt;
        }
        return it->second.type;
      };

      for (const auto& m : extraction.mentions) {
        if (m.plain_start < slice.begin || m.plain_end > slice.end) continue;
        const std::size_t a = m.plain_start - slice.begin;
        const std::size_t b = m.plain_end - slice.begin;
        std::optional<std::size_t> first, last;
        for (std::size_t t = 0; t < sent.tokens.size(); ++t) {
          if (sent.tokens[t].char_start == a) first = t;
          if (sent.tokens[t].char_end == b) last = t;
        }
        if (!first || !last || *last < *first) {
          sink.messages.push_back(title + ": link '" + m.surface +
                                  "' does not align with token boundaries");
          continue;
        }
        linked.emplace_back(*first, *last + 1);
        if (const auto type = type_of(m.target)) spans.push_back({*first, *last + 1, *type});
      }
      for (const auto& km : matcher.match(sent.tokens, linked)) {
        if (const auto type = type_of(km.target)) spans.push_back({km.start, km.end, *type});
      }
      std::sort(spans.begin(), spans.end());
      sent.labels = encode_iob(sent.tokens.size(), spans);
      raw.sentences.push_back(std::move(sent));
    }
  }
  return dedup_and_filter(raw);
}

// ---------------------------------------------------------------------------

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open pipeline config " + path.string());
  const auto base = path.parent_path();
  const auto resolve = [&](const std::string& v) -> std::filesystem::path {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base / p;
  };
  PipelineConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "root") {
      config.root = value;
    } else if (key == "blocklist") {
      config.blocklist = resolve(value);
    } else if (key == "heuristic") {
      config.heuristic = value;
    } else if (key == "manual_map") {
      config.manual_map = resolve(value);
    } else if (key == "manual_depth") {
      config.manual_depth = std::stoul(value);
    } else if (key == "scorer") {
      config.scorer = value;
    } else if (key == "scorer_command") {
      config.scorer_command = value;
    } else {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  return config;
}

PipelineResult run_pipeline(const WikiSnapshot& snapshot, const PipelineConfig& config) {
  PipelineResult result;
  const auto built = build_category_graph(snapshot, config.root);
  PruneSpec spec;
  if (!config.blocklist.empty()) spec = read_prune_spec(config.blocklist);
  auto pruned = prune_blocklist(built, spec);
  result.graph = std::move(pruned.graph);
  for (auto& w : pruned.warnings) result.log.messages.push_back(std::move(w));

  result.selected = filter_articles(snapshot, result.graph, parse_heuristic(config.heuristic));
  result.lexicon = build_lexicon(snapshot, result.selected);
  for (const auto& w : result.lexicon.warnings) result.log.messages.push_back(w);

  std::map<std::string, EntityType> manual;
  if (!config.manual_map.empty()) manual = read_type_map(config.manual_map);
  const auto types = propagate_type_map(result.graph, manual, config.manual_depth);
  for (const auto& c : types.untyped) result.log.messages.push_back("untyped category '" + c + "'");

  const RuleLemmatizer lemmatizer;
  std::unique_ptr<TypeScorer> scorer;
  if (config.scorer == "stub") {
    scorer = std::make_unique<StubScorer>(lemmatizer);
  } else if (config.scorer == "external") {
    if (config.scorer_command.empty()) throw UsageError("scorer = external needs scorer_command");
    scorer = std::make_unique<ExternalScorer>(config.scorer_command);
  } else {
    throw UsageError("unknown scorer '" + config.scorer + "'");
  }

  for (const auto& title : result.selected) {
    try {
      const auto inferred = infer_entity_type(*snapshot.find(title), result.graph, types.types, *scorer);
      result.inferred[title] = inferred;
      ++result.stage_counts[static_cast<std::size_t>(inferred.stage)];
      result.lexicon.entries[title].type = inferred.type;
    } catch (const DataError& e) {
      result.log.messages.push_back(e.what());
    }
  }

  result.corpus = build_labeled_corpus(snapshot, result.selected, result.lexicon, lemmatizer,
                                       &result.log);
  result.corpus.metadata.name = "wiki:" + config.root;
  result.corpus.metadata.snapshot_id = snapshot.id;
  result.corpus.metadata.creation_params = "heuristic=" + config.heuristic +
                                           " manual_depth=" + std::to_string(config.manual_depth) +
                                           " scorer=" + config.scorer;
  return result;
}

}  // namespace ser
