#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ser/types.hpp"

namespace ser {

inline constexpr std::string_view kCategoryPrefix = "Category:";

struct Page {
  std::string title;
  std::vector<std::string> categories;
  std::optional<std::string> redirect_target;
  std::string body;

  bool is_redirect() const { return redirect_target.has_value(); }
  bool is_category() const { return title.rfind(kCategoryPrefix, 0) == 0; }
  bool is_article() const { return !is_redirect() && !is_category(); }
  std::string category_name() const { return title.substr(kCategoryPrefix.size()); }
};

// One JSON object per line:
//   {"title": str, "categories": [str], "redirect": str|null, "body": str}
// Blank lines and lines starting with "//" are skipped. Titles must be unique
// and article bodies must have balanced link markup; violations are reported
// with their line number.
struct WikiSnapshot {
  std::vector<Page> pages;
  std::string id;

  const Page* find(const std::string& title) const;
  // Every category name mentioned by any page or defined by a category page.
  std::set<std::string> category_names() const;
};

WikiSnapshot read_snapshot(std::istream& in, std::string id = {});
WikiSnapshot read_snapshot(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Category taxonomy

struct CategoryGraph {
  std::string root;
  std::map<std::string, std::vector<std::string>> children;  // sorted
  std::map<std::string, std::vector<std::string>> parents;   // sorted
  std::map<std::string, std::size_t> depth;                  // BFS distance
  std::map<std::string, bool> alive;
  std::set<std::string> blocked;
  std::set<std::string> dropped;

  bool contains(const std::string& name) const { return depth.count(name) != 0; }
  bool is_alive(const std::string& name) const;
  std::size_t alive_count() const;
  std::size_t max_depth() const;
};

// Breadth-first expansion from `root` over category-page parent links.
// Throws DataError when the root is not a category of the snapshot.
CategoryGraph build_category_graph(const WikiSnapshot& snapshot, const std::string& root);

struct PruneSpec {
  std::set<std::string> blocklist;  // whole subtree removed
  std::set<std::string> droplist;   // only the category itself removed
};

PruneSpec read_prune_spec(const std::filesystem::path& path);

struct PruneResult {
  CategoryGraph graph;
  std::vector<std::string> warnings;  // unknown entries
};

// A category stays alive iff it is reachable from the root without passing
// through a blocklisted category, and is itself neither blocked nor dropped.
PruneResult prune_blocklist(const CategoryGraph& graph, const PruneSpec& spec);

struct ArticleHeuristic {
  enum class Kind { kMinCount, kMinFraction } kind = Kind::kMinCount;
  std::size_t min_count = 2;
  double min_fraction = 0.0;

  static ArticleHeuristic count(std::size_t k) { return {Kind::kMinCount, k, 0.0}; }
  static ArticleHeuristic fraction(double f) { return {Kind::kMinFraction, 0, f}; }
};

// Parses "min_count(2)" / "min_fraction(0.5)".
ArticleHeuristic parse_heuristic(const std::string& text);
std::string to_string(const ArticleHeuristic& h);

std::set<std::string> filter_articles(const WikiSnapshot& snapshot, const CategoryGraph& graph,
                                      const ArticleHeuristic& heuristic);

// ---------------------------------------------------------------------------
// Entity lexicon

struct LexiconEntry {
  std::set<std::string> aliases;
  std::optional<EntityType> type;
  std::string source;
};

struct EntityLexicon {
  std::map<std::string, LexiconEntry> entries;       // canonical title -> entry
  std::map<std::string, std::string> redirects;      // redirect title -> canonical
  std::vector<std::string> warnings;

  // Canonical title for a link target (canonical or redirect title), if any.
  std::optional<std::string> resolve(const std::string& target) const;
};

inline constexpr std::size_t kMaxRedirectHops = 5;

// Aliases per selected title: the title itself, the title without a trailing
// parenthetical ("Python (programming language)" -> "Python"), and every
// redirect whose chain resolves to it within kMaxRedirectHops. Aliases shared
// by several entries are dropped from all of them.
EntityLexicon build_lexicon(const WikiSnapshot& snapshot, const std::set<std::string>& selected);

// Wiki link targets are first-letter case-insensitive; underscores are spaces.
std::string normalize_title(std::string title);

// ---------------------------------------------------------------------------
// Category type propagation

struct TypeMapResult {
  std::map<std::string, EntityType> types;
  std::vector<std::string> untyped;
};

std::map<std::string, EntityType> read_type_map(const std::filesystem::path& path);

// Categories at depth <= manual_depth take their type from `manual_map`;
// deeper categories are visited breadth-first and inherit from their typed
// parents: majority, then the shallowest parent, then the smallest type name.
TypeMapResult propagate_type_map(const CategoryGraph& graph,
                                 const std::map<std::string, EntityType>& manual_map,
                                 std::size_t manual_depth);

}  // namespace ser
