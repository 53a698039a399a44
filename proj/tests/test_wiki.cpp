#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "ser/wiki.hpp"

using namespace ser;

namespace {

const std::filesystem::path kFixture = SER_FIXTURE_DIR;

WikiSnapshot fixture() { return read_snapshot(kFixture / "snapshot.jsonl"); }

WikiSnapshot from_text(const std::string& text) {
  std::istringstream in(text);
  return read_snapshot(in, "inline");
}

std::string cat(const std::string& name, const std::vector<std::string>& parents) {
  std::string out = R"({"title": "Category:)" + name + R"(", "categories": [)";
  for (std::size_t i = 0; i < parents.size(); ++i) {
    out += (i ? ", \"" : "\"") + parents[i] + "\"";
  }
  return out + "]}\n";
}

std::string article(const std::string& title, const std::vector<std::string>& cats,
                    const std::string& body = "") {
  std::string out = R"({"title": ")" + title + R"(", "categories": [)";
  for (std::size_t i = 0; i < cats.size(); ++i) out += (i ? ", \"" : "\"") + cats[i] + "\"";
  return out + R"(], "body": ")" + body + "\"}\n";
}

std::string redirect(const std::string& title, const std::string& target) {
  return R"({"title": ")" + title + R"(", "redirect": ")" + target + "\"}\n";
}

std::set<std::string> alive_set(const CategoryGraph& g) {
  std::set<std::string> out;
  for (const auto& [name, ok] : g.alive) {
    if (ok) out.insert(name);
  }
  return out;
}

}  // namespace

TEST_CASE("snapshot parsing") {
  const auto snap = fixture();
  std::size_t articles = 0, redirects = 0, categories = 0;
  for (const auto& p : snap.pages) {
    articles += p.is_article();
    redirects += p.is_redirect();
    categories += p.is_category();
  }
  CHECK(articles == 20);
  CHECK(redirects == 8);
  CHECK(categories == 14);
  REQUIRE(snap.find("LSTM"));
  CHECK(*snap.find("LSTM")->redirect_target == "Long short-term memory");

  SUBCASE("duplicate title") {
    try {
      from_text(article("A", {}) + "\n" + article("A", {}));
      FAIL("expected error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("unbalanced markup carries line number") {
    try {
      from_text(article("A", {}) + article("B", {}, "see [[Linux"));
      FAIL("expected error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("not json") { CHECK_THROWS_AS(from_text("{oops\n"), DataError); }
}

TEST_CASE("category graph on fixture") {
  const auto g = build_category_graph(fixture(), "Computing");
  CHECK(g.depth.size() == 14);
  CHECK(g.alive_count() == 14);
  CHECK(g.max_depth() == 4);
  CHECK(g.depth.at("Computing") == 0);
  CHECK(g.depth.at("Deep learning researchers") == 4);
  CHECK(g.depth.at("Neural networks") == 3);
  for (const auto& [child, ps] : g.parents) {
    for (const auto& p : ps) CHECK(g.depth.at(child) <= g.depth.at(p) + 1);
  }
  CHECK_THROWS_AS(build_category_graph(fixture(), "Nope"), DataError);
}

TEST_CASE("category graph cycles and reachability") {
  const auto snap = from_text(cat("R", {}) + cat("A", {"R", "B"}) + cat("B", {"A"}) +
                              cat("Island", {"Sea"}) + cat("Sea", {}));
  const auto g = build_category_graph(snap, "R");
  CHECK(g.depth.at("A") == 1);
  CHECK(g.depth.at("B") == 2);
  CHECK_FALSE(g.contains("Island"));
  CHECK_FALSE(g.contains("Sea"));
}

TEST_CASE("prune blocklist") {
  const auto g = build_category_graph(fixture(), "Computing");

  SUBCASE("fixture blocklist") {
    const auto spec = read_prune_spec(kFixture / "blocklist.txt");
    const auto r = prune_blocklist(g, spec);
    CHECK(r.warnings.empty());
    CHECK(r.graph.alive_count() == 10);
    for (const char* dead : {"Computer specialists", "Computer scientists",
                             "Machine learning researchers", "Deep learning researchers"}) {
      CHECK_FALSE(r.graph.is_alive(dead));
    }
    CHECK(r.graph.is_alive("Neural networks"));
  }
  SUBCASE("empty blocklist") {
    const auto r = prune_blocklist(g, {});
    CHECK(alive_set(r.graph) == alive_set(g));
  }
  SUBCASE("unknown entry is a warning") {
    PruneSpec spec;
    spec.blocklist = {"Nonexistent"};
    const auto r = prune_blocklist(g, spec);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("Nonexistent") != std::string::npos);
    CHECK(r.graph.alive_count() == 14);
  }
  SUBCASE("diamond keeps alternate path") {
    const auto snap = from_text(cat("R", {}) + cat("A", {"R"}) + cat("B", {"R"}) +
                                cat("C", {"A", "B"}) + cat("D", {"C"}));
    const auto dg = build_category_graph(snap, "R");
    PruneSpec spec;
    spec.blocklist = {"A"};
    auto r = prune_blocklist(dg, spec);
    CHECK_FALSE(r.graph.is_alive("A"));
    CHECK(r.graph.is_alive("C"));
    CHECK(r.graph.is_alive("D"));
    spec.blocklist.insert("B");
    r = prune_blocklist(dg, spec);
    CHECK_FALSE(r.graph.is_alive("C"));
    CHECK_FALSE(r.graph.is_alive("D"));
  }
  SUBCASE("droplist removes only the node") {
    const auto snap = from_text(cat("R", {}) + cat("A", {"R"}) + cat("C", {"A"}));
    const auto dg = build_category_graph(snap, "R");
    PruneSpec spec;
    spec.droplist = {"A"};
    const auto r = prune_blocklist(dg, spec);
    CHECK_FALSE(r.graph.is_alive("A"));
    CHECK(r.graph.is_alive("C"));
  }
  SUBCASE("monotonic in the blocklist") {
    std::vector<std::string> names;
    for (const auto& [n, d] : g.depth) {
      if (n != "Computing") names.push_back(n);
    }
    PruneSpec spec;
    auto prev = alive_set(g);
    for (const auto& n : names) {
      spec.blocklist.insert(n);
      const auto now = alive_set(prune_blocklist(g, spec).graph);
      CHECK(std::includes(prev.begin(), prev.end(), now.begin(), now.end()));
      prev = now;
    }
    CHECK(prev == std::set<std::string>{"Computing"});
  }
}

TEST_CASE("filter articles") {
  const auto snap = from_text(cat("R", {}) + cat("A", {"R"}) + cat("B", {"R"}) +
                              cat("Dead", {"R"}) + article("P", {"A", "B", "Dead"}));
  auto g = build_category_graph(snap, "R");
  PruneSpec spec;
  spec.blocklist = {"Dead"};
  g = prune_blocklist(g, spec).graph;
  CHECK(filter_articles(snap, g, ArticleHeuristic::count(2)) == std::set<std::string>{"P"});
  CHECK(filter_articles(snap, g, ArticleHeuristic::fraction(0.5)) == std::set<std::string>{"P"});
  CHECK(filter_articles(snap, g, ArticleHeuristic::count(3)).empty());
  CHECK(filter_articles(snap, g, ArticleHeuristic::fraction(0.7)).empty());

  const auto fs = fixture();
  const auto fg = prune_blocklist(build_category_graph(fs, "Computing"),
                                  read_prune_spec(kFixture / "blocklist.txt"))
                      .graph;
  const auto kept = filter_articles(fs, fg, ArticleHeuristic::count(2));
  CHECK(kept == std::set<std::string>{"Android (operating system)", "ChromeOS",
                                      "Chromium (web browser)", "Cython", "Google Chrome", "Linux",
                                      "Long short-term memory", "Python (programming language)",
                                      "TensorFlow"});
  // Hinton only qualifies while the researcher branch is alive.
  const auto unpruned = filter_articles(fs, build_category_graph(fs, "Computing"),
                                        ArticleHeuristic::count(2));
  CHECK(unpruned.size() == 10);
  CHECK(unpruned.count("Geoffrey Hinton") == 1);

  for (std::size_t k = 0; k < 5; ++k) {
    const auto loose = filter_articles(fs, fg, ArticleHeuristic::count(k));
    const auto tight = filter_articles(fs, fg, ArticleHeuristic::count(k + 1));
    CHECK(std::includes(loose.begin(), loose.end(), tight.begin(), tight.end()));
  }
}

TEST_CASE("heuristic parsing") {
  const auto c = parse_heuristic("min_count(3)");
  CHECK(c.kind == ArticleHeuristic::Kind::kMinCount);
  CHECK(c.min_count == 3);
  const auto f = parse_heuristic("min_fraction(0.5)");
  CHECK(f.kind == ArticleHeuristic::Kind::kMinFraction);
  CHECK(f.min_fraction == doctest::Approx(0.5));
  CHECK(to_string(c) == "min_count(3)");
  CHECK_THROWS_AS(parse_heuristic("max_count(2)"), UsageError);
  CHECK_THROWS_AS(parse_heuristic("min_fraction(1.5)"), UsageError);
  CHECK_THROWS_AS(parse_heuristic("min_count(x)"), UsageError);
}

TEST_CASE("lexicon aliases") {
  const auto snap = fixture();
  SUBCASE("redirect alias") {
    const auto lex = build_lexicon(snap, {"Long short-term memory"});
    CHECK(lex.entries.at("Long short-term memory").aliases ==
          std::set<std::string>{"Long short-term memory", "LSTM"});
    CHECK(lex.resolve("LSTM") == "Long short-term memory");
  }
  SUBCASE("no redirects") {
    const auto lex = build_lexicon(snap, {"TensorFlow"});
    CHECK(lex.entries.at("TensorFlow").aliases == std::set<std::string>{"TensorFlow"});
  }
  SUBCASE("redirect chain") {
    const auto lex = build_lexicon(snap, {"Python (programming language)"});
    const auto& a = lex.entries.at("Python (programming language)").aliases;
    CHECK(a.count("Python 3") == 1);
    CHECK(a.count("Py3k") == 1);
    CHECK(lex.resolve("Py3k") == "Python (programming language)");
    CHECK(lex.resolve("python (programming language)") == "Python (programming language)");
    CHECK(lex.resolve("Python_3") == "Python (programming language)");
    CHECK_FALSE(lex.resolve("Neural net"));
  }
  SUBCASE("collision drops the alias from both") {
    const auto s = from_text(article("Go (programming language)", {}) +
                             article("Go (game)", {}) + redirect("Golang", "Go (programming language)") +
                             redirect("Weiqi", "Go (game)"));
    const auto lex = build_lexicon(s, {"Go (programming language)", "Go (game)"});
    CHECK(lex.entries.at("Go (programming language)").aliases ==
          std::set<std::string>{"Go (programming language)", "Golang"});
    CHECK(lex.entries.at("Go (game)").aliases == std::set<std::string>{"Go (game)", "Weiqi"});
    CHECK_FALSE(lex.warnings.empty());
  }
  SUBCASE("alias never shadows another canonical title") {
    const auto s = from_text(article("Chrome", {}) + article("Google Chrome", {}) +
                             redirect("Chrome browser", "Google Chrome"));
    const auto lex = build_lexicon(s, {"Chrome", "Google Chrome"});
    CHECK(lex.entries.at("Chrome").aliases.count("Chrome") == 1);
    CHECK(lex.entries.at("Google Chrome").aliases.count("Chrome") == 0);
  }
  SUBCASE("over-long and cyclic chains are reported") {
    std::string text = article("Z", {});
    const std::vector<std::string> chain = {"Y", "X1", "X2", "X3", "X4", "X5"};
    std::string prev = "Z";
    for (const auto& c : chain) {
      text += redirect(c, prev);
      prev = c;
    }
    text += redirect("L1", "L2") + redirect("L2", "L1");
    const auto lex = build_lexicon(from_text(text), {"Z"});
    const auto& a = lex.entries.at("Z").aliases;
    CHECK(a.count("Y") == 1);
    CHECK(a.count("X4") == 1);
    CHECK(a.count("X5") == 0);
    CHECK(lex.warnings.size() >= 2);
  }
  SUBCASE("canonical title is always an alias") {
    const auto lex = build_lexicon(snap, {"ChromeOS", "Linux", "Google Chrome"});
    for (const auto& [title, e] : lex.entries) CHECK(e.aliases.count(title) == 1);
  }
}

TEST_CASE("type map propagation") {
  SUBCASE("fixture") {
    const auto g = build_category_graph(fixture(), "Computing");
    const auto manual = read_type_map(kFixture / "manual_map.tsv");
    CHECK(manual.size() == 11);
    const auto r = propagate_type_map(g, manual, 2);
    CHECK(r.untyped.empty());
    CHECK(r.types.size() == 14);
    CHECK(r.types.at("Neural networks") == EntityType::kAlgorithm);
    CHECK(r.types.at("Machine learning researchers") == EntityType::kGeneralConcept);
    CHECK(r.types.at("Deep learning researchers") == EntityType::kGeneralConcept);
  }
  SUBCASE("inheritance and majority") {
    const auto snap = from_text(cat("R", {}) + cat("A", {"R"}) + cat("B", {"A"}) +
                                cat("P1", {"R"}) + cat("P2", {"R"}) + cat("P3", {"R"}) +
                                cat("C", {"P1", "P2", "P3"}));
    const auto g = build_category_graph(snap, "R");
    const std::map<std::string, EntityType> manual = {
        {"R", EntityType::kGeneralConcept}, {"A", EntityType::kLibrary},
        {"P1", EntityType::kDevice}, {"P2", EntityType::kDevice}, {"P3", EntityType::kProtocol}};
    const auto r = propagate_type_map(g, manual, 1);
    CHECK(r.types.at("B") == EntityType::kLibrary);
    CHECK(r.types.at("C") == EntityType::kDevice);
  }
  SUBCASE("tie goes to the shallowest parent, then the smallest name") {
    const auto snap = from_text(cat("R", {}) + cat("A", {"R"}) + cat("B", {"R"}) +
                                cat("Deep", {"B"}) + cat("Z", {"A", "Deep"}) + cat("E", {"A", "B"}));
    const auto g = build_category_graph(snap, "R");
    const std::map<std::string, EntityType> manual = {
        {"R", EntityType::kGeneralConcept}, {"A", EntityType::kProtocol},
        {"B", EntityType::kDevice}};
    const auto r = propagate_type_map(g, manual, 1);
    CHECK(r.types.at("Deep") == EntityType::kDevice);
    CHECK(r.types.at("Z") == EntityType::kProtocol);  // A at depth 1 beats Deep at depth 2
    CHECK(r.types.at("E") == EntityType::kDevice);    // both depth 1: DEVICE < PROTOCOL
  }
  SUBCASE("missing manual entries are reported") {
    const auto g = build_category_graph(fixture(), "Computing");
    auto manual = read_type_map(kFixture / "manual_map.tsv");
    manual.erase("Software libraries");
    const auto r = propagate_type_map(g, manual, 2);
    CHECK(r.untyped == std::vector<std::string>{"Software libraries"});
  }
}
