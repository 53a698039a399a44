#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ser/corpus.hpp"
#include "ser/iob.hpp"
#include "ser/spanlabel.hpp"
#include "ser/text.hpp"

using namespace ser;

namespace {

const std::filesystem::path kFixture = SER_FIXTURE_DIR;

std::vector<std::string> sentences_of(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& s : split_sentences(text)) out.push_back(text.substr(s.begin, s.end - s.begin));
  return out;
}

EntityLexicon lexicon_of(std::initializer_list<std::pair<std::string, std::vector<std::string>>> items) {
  EntityLexicon lex;
  for (const auto& [title, aliases] : items) {
    auto& e = lex.entries[title];
    e.source = title;
    e.aliases.insert(title);
    for (const auto& a : aliases) {
      e.aliases.insert(a);
      lex.redirects[a] = title;
    }
  }
  return lex;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("sentence splitting") {
  CHECK(sentences_of("A runs. B walks.") == std::vector<std::string>{"A runs.", "B walks."});
  CHECK(sentences_of("e.g. it works.").size() == 1);
  CHECK(sentences_of("Use tools e.g. Make. It works.").size() == 2);
  CHECK(sentences_of("Version 2.0 is out! Really? Yes.").size() == 3);
  CHECK(sentences_of("It ran. then stopped.").size() == 1);
  CHECK(sentences_of("").empty());
  CHECK(sentences_of("   ").empty());

  const auto chrome = read_snapshot(kFixture / "snapshot.jsonl").find("ChromeOS");
  REQUIRE(chrome);
  CHECK(split_sentences(strip_link_markup(chrome->body).plain).size() == 4);

  // Slices are ordered, trimmed and only whitespace lies between them.
  const std::string text = "  One. Two!  Three? Four ";
  const auto slices = split_sentences(text);
  std::size_t pos = 0;
  for (const auto& s : slices) {
    for (std::size_t i = pos; i < s.begin; ++i) CHECK(std::isspace(static_cast<unsigned char>(text[i])));
    CHECK(!std::isspace(static_cast<unsigned char>(text[s.begin])));
    CHECK(!std::isspace(static_cast<unsigned char>(text[s.end - 1])));
    pos = s.end;
  }
  for (std::size_t i = pos; i < text.size(); ++i) CHECK(std::isspace(static_cast<unsigned char>(text[i])));
}

TEST_CASE("rule lemmatizer") {
  RuleLemmatizer lem;
  CHECK(lem.lemma("tables") == "table");
  CHECK(lem.lemma("Tables") == "table");
  CHECK(lem.lemma("classes") == "class");
  CHECK(lem.lemma("boxes") == "box");
  CHECK(lem.lemma("patches") == "patch");
  CHECK(lem.lemma("class") == "class");
  CHECK(lem.lemma("virus") == "virus");
  CHECK(lem.lemma("analysis") == "analysis");
  CHECK(lem.lemma("its") == "its");
  CHECK(lem.lemma("OS") == "os");
  CHECK(lem.lemma("iOS") == "ios");
  CHECK(lem.lemma("macOS") == "macos");
  CHECK(lem.lemma("bus") == "bus");
  CHECK(lem.lemma("C++") == "c++");
  for (const char* w : {"tables", "classes", "networks", "libraries", "Linux", "OS", "processes",
                        "matches", "news", "gas", "sses", "x86s"}) {
    const auto once = lem.lemma(w);
    CHECK(lem.lemma(once) == once);
  }
}

TEST_CASE("link mention extraction") {
  const auto lex = lexicon_of({{"Linux", {}}, {"Long short-term memory", {"LSTM"}}});
  auto r = extract_link_mentions("runs [[Linux]] well", lex);
  REQUIRE(r.mentions.size() == 1);
  CHECK(r.mentions[0].surface == "Linux");
  CHECK(r.mentions[0].target == "Linux");
  CHECK(r.text.plain.substr(r.mentions[0].plain_start, 5) == "Linux");

  r = extract_link_mentions("[[Long short-term memory|LSTM]] nets", lex);
  REQUIRE(r.mentions.size() == 1);
  CHECK(r.mentions[0].surface == "LSTM");
  CHECK(r.mentions[0].target == "Long short-term memory");
  CHECK(r.text.plain == "LSTM nets");

  r = extract_link_mentions("[[LSTM]] via redirect", lex);
  REQUIRE(r.mentions.size() == 1);
  CHECK(r.mentions[0].target == "Long short-term memory");

  CHECK(extract_link_mentions("[[Unknown Thing]]", lex).mentions.empty());
  CHECK_THROWS_AS(extract_link_mentions("broken [[Linux", lex), DataError);
}

TEST_CASE("keyword matching") {
  RuleLemmatizer lem;
  SUBCASE("lemmatized multi-token alias") {
    const auto lex = lexicon_of({{"Hash table", {}}});
    KeywordMatcher m(lex, lem);
    const auto hits = m.match(tokenize("Hash tables are fast"), {});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].start == 0);
    CHECK(hits[0].end == 2);
    CHECK(hits[0].target == "Hash table");
  }
  SUBCASE("short aliases are case-sensitive") {
    const auto lex = lexicon_of({{"Linux", {}}, {"Go", {}}});
    MatcherOptions strict;
    strict.case_sensitive_max_length = 5;
    CHECK(KeywordMatcher(lex, lem, strict).match(tokenize("I use linux"), {}).empty());
    CHECK(KeywordMatcher(lex, lem, strict).match(tokenize("I use Linux"), {}).size() == 1);
    // Default threshold 4: "Linux" is long enough to match on lemmas.
    CHECK(KeywordMatcher(lex, lem).match(tokenize("I use linux"), {}).size() == 1);
    CHECK(KeywordMatcher(lex, lem).match(tokenize("we go home"), {}).empty());
    CHECK(KeywordMatcher(lex, lem).match(tokenize("written in Go"), {}).size() == 1);
  }
  SUBCASE("longest match wins") {
    const auto lex = lexicon_of({{"Java", {}}, {"Java virtual machine", {}}});
    const auto hits = KeywordMatcher(lex, lem).match(tokenize("Java virtual machine runs Java"), {});
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].target == "Java virtual machine");
    CHECK(hits[0].end == 3);
    CHECK(hits[1].target == "Java");
    CHECK(hits[1].start == 4);
  }
  SUBCASE("blocked ranges are never overlapped") {
    const auto lex = lexicon_of({{"Java virtual machine", {}}, {"machine", {}}});
    const auto hits = KeywordMatcher(lex, lem).match(tokenize("Java virtual machine"), {{0, 1}});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].start == 2);
  }
}

TEST_CASE("stub scorer") {
  RuleLemmatizer lem;
  StubScorer s(lem);
  CHECK(s.score("A library for parsing.", EntityType::kLibrary) == doctest::Approx(0.5));
  CHECK(s.score("Nothing relevant here.", EntityType::kLibrary) == doctest::Approx(1.0));
  CHECK(s.score("A library and framework.", EntityType::kLibrary) <
        s.score("A library only.", EntityType::kLibrary));
  // Repeats of one keyword count once.
  CHECK(s.score("library library library", EntityType::kLibrary) == doctest::Approx(0.5));
}

TEST_CASE("external scorer protocol") {
  RuleLemmatizer lem;
  StubScorer stub(lem);
  ExternalScorer ext(SER_STUB_SCORER);
  for (const auto* sentence : {"Cython is a library and toolkit for the Python language.",
                               "Nothing here.", "Linux is an operating system kernel."}) {
    for (const auto t : kAllEntityTypes) CHECK(ext.score(sentence, t) == stub.score(sentence, t));
  }
  ExternalScorer bad("echo nonsense");
  CHECK_THROWS_AS(bad.score("x", EntityType::kDevice), DataError);
}

TEST_CASE("entity type inference") {
  const auto snap = read_snapshot(kFixture / "snapshot.jsonl");
  const auto graph = prune_blocklist(build_category_graph(snap, "Computing"),
                                     read_prune_spec(kFixture / "blocklist.txt"))
                         .graph;
  const auto types = propagate_type_map(graph, read_type_map(kFixture / "manual_map.tsv"), 2).types;
  RuleLemmatizer lem;
  StubScorer scorer(lem);
  auto infer = [&](const std::string& title) {
    return infer_entity_type(*snap.find(title), graph, types, scorer);
  };

  auto r = infer("ChromeOS");
  CHECK(r.type == EntityType::kOperatingSystem);
  CHECK(r.stage == 2);
  r = infer("Long short-term memory");
  CHECK(r.type == EntityType::kAlgorithm);
  CHECK(r.stage == 1);
  r = infer("Cython");
  CHECK(r.stage == 3);
  CHECK(r.type == EntityType::kLibrary);
  const auto first = first_sentence(*snap.find("Cython"));
  CHECK(scorer.score(first, EntityType::kLibrary) == doctest::Approx(0.25));  // library, toolkit, modules
  CHECK(scorer.score(first, EntityType::kLanguage) == doctest::Approx(0.5));

  CHECK_THROWS_AS(infer("Smartphone"), DataError);

  SUBCASE("deepest category wins") {
    WikiSnapshot s;
    s.pages = {{"Category:R", {}, std::nullopt, ""},      {"Category:A", {"R"}, std::nullopt, ""},
               {"Category:B", {"A"}, std::nullopt, ""},   {"Category:C", {"B"}, std::nullopt, ""},
               {"Category:D", {"C"}, std::nullopt, ""},   {"Category:X", {"R"}, std::nullopt, ""},
               {"Category:Y", {"X"}, std::nullopt, ""},   {"P", {"D", "Y"}, std::nullopt, "P."}};
    const auto g = build_category_graph(s, "R");
    const std::map<std::string, EntityType> tm = {{"D", EntityType::kDevice},
                                                  {"Y", EntityType::kProtocol}};
    const auto res = infer_entity_type(*s.find("P"), g, tm, scorer);
    CHECK(res.type == EntityType::kDevice);
    CHECK(res.stage == 1);
  }
  SUBCASE("equal scores fall back to the smallest type name") {
    WikiSnapshot s;
    s.pages = {{"Category:R", {}, std::nullopt, ""}, {"Category:A", {"R"}, std::nullopt, ""},
               {"Category:B", {"R"}, std::nullopt, ""}, {"P", {"A", "B"}, std::nullopt, "Plain words."}};
    const auto g = build_category_graph(s, "R");
    const std::map<std::string, EntityType> tm = {{"A", EntityType::kProtocol},
                                                  {"B", EntityType::kDevice}};
    const auto res = infer_entity_type(*s.find("P"), g, tm, scorer);
    CHECK(res.type == EntityType::kDevice);
    CHECK(res.stage == 3);
  }
}

TEST_CASE("fixture pipeline reproduces the golden corpus") {
  const auto snap = read_snapshot(kFixture / "snapshot.jsonl");
  const auto config = PipelineConfig::load(kFixture / "pipeline.conf");
  const auto result = run_pipeline(snap, config);

  std::ostringstream out;
  write_conll(out, result.corpus);
  CHECK(out.str() == slurp(kFixture / "golden.conll"));

  CHECK(result.log.raw_sentences == 47);
  CHECK(result.corpus.size() == 30);
  const auto stats = corpus_stats(result.corpus);
  CHECK(stats.spans == 41);
  CHECK(stats.histogram(1) == 21);
  CHECK(stats.histogram(2) == 7);
  CHECK(stats.histogram(3) == 2);
  CHECK(result.selected.size() == 9);
  CHECK(result.stage_counts[1] + result.stage_counts[2] + result.stage_counts[3] == 9);
  CHECK(result.stage_counts[1] == 5);
  CHECK(result.stage_counts[2] == 2);
  CHECK(result.stage_counts[3] == 2);
  CHECK(result.inferred.at("ChromeOS").type == EntityType::kOperatingSystem);

  // Every span re-joins to text present in its sentence's tokens.
  for (const auto& sent : result.corpus.sentences) {
    for (const auto& span : decode_spans(sent.labels)) CHECK(span.end <= sent.size());
  }

  // Run-to-run determinism.
  std::ostringstream again;
  write_conll(again, run_pipeline(snap, config).corpus);
  CHECK(again.str() == out.str());

  SUBCASE("external scorer gives the same corpus") {
    auto ext = config;
    ext.scorer = "external";
    ext.scorer_command = SER_STUB_SCORER;
    std::ostringstream o;
    write_conll(o, run_pipeline(snap, ext).corpus);
    CHECK(o.str() == out.str());
  }
  SUBCASE("no selected pages") {
    auto strict = config;
    strict.heuristic = "min_count(50)";
    CHECK(run_pipeline(snap, strict).corpus.size() == 0);
  }
}

TEST_CASE("labeling edge cases") {
  RuleLemmatizer lem;
  WikiSnapshot snap;
  snap.pages = {{"Alpha", {}, std::nullopt,
                 "Nothing to see here. Alpha was built. See [[Beta|Beta. Next]] words."},
                {"Beta", {}, std::nullopt, "No entities at all."}};
  auto lex = lexicon_of({{"Alpha", {}}, {"Beta", {}}});
  lex.entries["Alpha"].type = EntityType::kDevice;
  lex.entries["Beta"].type = EntityType::kDevice;
  LabelingLog log;
  const auto c = build_labeled_corpus(snap, {"Alpha", "Beta"}, lex, lem, &log);
  REQUIRE(c.size() == 2);
  CHECK(c.sentences[0].source_id == "Alpha#2");
  bool crossing = false;
  for (const auto& m : log.messages) crossing |= m.find("cross") != std::string::npos;
  CHECK(crossing);
  CHECK(log.raw_sentences == 5);
}
