#include "ser/wiki.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <istream>
#include <sstream>

#include "json.hpp"
#include "ser/markup.hpp"

namespace ser {

using json = nlohmann::json;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Category-page parent links: parent -> child.
std::map<std::string, std::set<std::string>> category_edges(const WikiSnapshot& snapshot) {
  std::map<std::string, std::set<std::string>> edges;
  for (const auto& page : snapshot.pages) {
    if (!page.is_category() || page.is_redirect()) continue;
    const auto child = page.category_name();
    for (const auto& parent : page.categories) edges[parent].insert(child);
  }
  return edges;
}

}  // namespace

const Page* WikiSnapshot::find(const std::string& title) const {
  for (const auto& p : pages) {
    if (p.title == title) return &p;
  }
  return nullptr;
}

std::set<std::string> WikiSnapshot::category_names() const {
  std::set<std::string> names;
  for (const auto& p : pages) {
    if (p.is_category()) names.insert(p.category_name());
    names.insert(p.categories.begin(), p.categories.end());
  }
  return names;
}

WikiSnapshot read_snapshot(std::istream& in, std::string id) {
  WikiSnapshot snapshot;
  snapshot.id = std::move(id);
  std::set<std::string> titles;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = "snapshot line " + std::to_string(line_no) + ": ";
    const std::string t = trim(line);
    if (t.empty() || t.rfind("//", 0) == 0) continue;

    json record;
    try {
      record = json::parse(t);
    } catch (const json::parse_error& e) {
      throw DataError(where + "invalid record (" + e.what() + ")");
    }
    if (!record.is_object() || !record.contains("title") || !record["title"].is_string()) {
      throw DataError(where + "record needs a string 'title'");
    }
    Page page;
    page.title = record["title"].get<std::string>();
    if (page.title.empty()) throw DataError(where + "empty title");
    try {
      if (record.contains("categories")) {
        page.categories = record["categories"].get<std::vector<std::string>>();
      }
      if (record.contains("redirect") && !record["redirect"].is_null()) {
        page.redirect_target = record["redirect"].get<std::string>();
      }
      if (record.contains("body")) page.body = record["body"].get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(where + "bad field type (" + e.what() + ")");
    }
    if (!titles.insert(page.title).second) {
      throw DataError(where + "duplicate title '" + page.title + "'");
    }
    if (!page.is_redirect()) {
      try {
        strip_link_markup(page.body);
      } catch (const DataError& e) {
        throw DataError(where + e.what());
      }
    }
    snapshot.pages.push_back(std::move(page));
  }
  return snapshot;
}

WikiSnapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open snapshot " + path.string());
  return read_snapshot(in, path.filename().string());
}

// ---------------------------------------------------------------------------

bool CategoryGraph::is_alive(const std::string& name) const {
  const auto it = alive.find(name);
  return it != alive.end() && it->second;
}

std::size_t CategoryGraph::alive_count() const {
  return static_cast<std::size_t>(
      std::count_if(alive.begin(), alive.end(), [](const auto& kv) { return kv.second; }));
}

std::size_t CategoryGraph::max_depth() const {
  std::size_t m = 0;
  for (const auto& [name, d] : depth) {
    if (is_alive(name)) m = std::max(m, d);
  }
  return m;
}

CategoryGraph build_category_graph(const WikiSnapshot& snapshot, const std::string& root) {
  if (snapshot.category_names().count(root) == 0) {
    throw DataError("root category '" + root + "' not found in snapshot");
  }
  const auto edges = category_edges(snapshot);

  CategoryGraph graph;
  graph.root = root;
  std::deque<std::string> queue{root};
  graph.depth[root] = 0;
  while (!queue.empty()) {
    const std::string current = queue.front();
    queue.pop_front();
    const auto it = edges.find(current);
    if (it == edges.end()) continue;
    for (const auto& child : it->second) {
      if (graph.depth.emplace(child, graph.depth[current] + 1).second) queue.push_back(child);
    }
  }
  for (const auto& [name, d] : graph.depth) {
    graph.alive[name] = true;
    graph.children[name];
    graph.parents[name];
  }
  for (const auto& [parent, kids] : edges) {
    if (!graph.contains(parent)) continue;
    for (const auto& child : kids) {
      graph.children[parent].push_back(child);
      graph.parents[child].push_back(parent);
    }
  }
  for (auto& [name, ps] : graph.parents) std::sort(ps.begin(), ps.end());
  return graph;
}

PruneSpec read_prune_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prune list " + path.string());
  PruneSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("drop:", 0) == 0) {
      spec.droplist.insert(trim(line.substr(5)));
    } else if (line.rfind("block:", 0) == 0) {
      spec.blocklist.insert(trim(line.substr(6)));
    } else {
      spec.blocklist.insert(line);
    }
  }
  return spec;
}

PruneResult prune_blocklist(const CategoryGraph& graph, const PruneSpec& spec) {
  PruneResult result{graph, {}};
  CategoryGraph& g = result.graph;
  for (const auto& name : spec.blocklist) {
    if (!g.contains(name)) result.warnings.push_back("unknown blocklist category '" + name + "'");
    g.blocked.insert(name);
  }
  for (const auto& name : spec.droplist) {
    if (!g.contains(name)) result.warnings.push_back("unknown droplist category '" + name + "'");
    g.dropped.insert(name);
  }

  for (auto& [name, flag] : g.alive) flag = false;
  if (g.blocked.count(g.root) != 0) return result;

  std::set<std::string> reached{g.root};
  std::deque<std::string> queue{g.root};
  while (!queue.empty()) {
    const std::string current = queue.front();
    queue.pop_front();
    for (const auto& child : g.children[current]) {
      if (g.blocked.count(child) != 0) continue;
      if (reached.insert(child).second) queue.push_back(child);
    }
  }
  for (const auto& name : reached) g.alive[name] = g.dropped.count(name) == 0;
  return result;
}

ArticleHeuristic parse_heuristic(const std::string& text) {
  const auto open = text.find('(');
  const auto close = text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw UsageError("heuristic must look like min_count(k) or min_fraction(f): '" + text + "'");
  }
  const std::string name = trim(text.substr(0, open));
  const std::string arg = trim(text.substr(open + 1, close - open - 1));
  try {
    if (name == "min_count") return ArticleHeuristic::count(std::stoul(arg));
    if (name == "min_fraction") {
      const double f = std::stod(arg);
      if (f < 0.0 || f > 1.0) throw UsageError("min_fraction must be in [0,1]");
      return ArticleHeuristic::fraction(f);
    }
  } catch (const std::logic_error&) {
    throw UsageError("bad heuristic argument in '" + text + "'");
  }
  throw UsageError("unknown heuristic '" + name + "'");
}

std::string to_string(const ArticleHeuristic& h) {
  std::ostringstream os;
  if (h.kind == ArticleHeuristic::Kind::kMinCount) {
    os << "min_count(" << h.min_count << ")";
  } else {
    os << "min_fraction(" << h.min_fraction << ")";
  }
  return os.str();
}

std::set<std::string> filter_articles(const WikiSnapshot& snapshot, const CategoryGraph& graph,
                                      const ArticleHeuristic& heuristic) {
  std::set<std::string> kept;
  for (const auto& page : snapshot.pages) {
    if (!page.is_article()) continue;
    const std::set<std::string> listed(page.categories.begin(), page.categories.end());
    const auto alive = static_cast<std::size_t>(std::count_if(
        listed.begin(), listed.end(), [&](const std::string& c) { return graph.is_alive(c); }));
    bool keep = false;
    if (heuristic.kind == ArticleHeuristic::Kind::kMinCount) {
      keep = alive >= heuristic.min_count;
    } else {
      keep = !listed.empty() && static_cast<double>(alive) / static_cast<double>(listed.size()) >=
                                    heuristic.min_fraction;
    }
    if (keep) kept.insert(page.title);
  }
  return kept;
}

// ---------------------------------------------------------------------------

std::string normalize_title(std::string title) {
  std::replace(title.begin(), title.end(), '_', ' ');
  title = trim(title);
  if (!title.empty()) title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[0])));
  return title;
}

std::optional<std::string> EntityLexicon::resolve(const std::string& target) const {
  for (const auto& t : {target, normalize_title(target)}) {
    if (entries.count(t) != 0) return t;
    const auto it = redirects.find(t);
    if (it != redirects.end()) return it->second;
  }
  return std::nullopt;
}

EntityLexicon build_lexicon(const WikiSnapshot& snapshot, const std::set<std::string>& selected) {
  EntityLexicon lex;
  std::map<std::string, const Page*> by_title;
  for (const auto& p : snapshot.pages) by_title[p.title] = &p;

  for (const auto& title : selected) {
    const auto it = by_title.find(title);
    if (it == by_title.end()) throw DataError("selected title '" + title + "' not in snapshot");
    LexiconEntry entry;
    entry.source = title;
    entry.aliases.insert(title);
    const auto paren = title.rfind(" (");
    if (paren != std::string::npos && paren > 0 && title.back() == ')') {
      entry.aliases.insert(title.substr(0, paren));
    }
    lex.entries.emplace(title, std::move(entry));
  }

  for (const auto& page : snapshot.pages) {
    if (!page.is_redirect()) continue;
    std::string target = normalize_title(*page.redirect_target);
    std::size_t hops = 1;
    std::set<std::string> seen{page.title};
    bool broken = false;
    while (true) {
      const auto it = by_title.find(target);
      if (it == by_title.end() || !it->second->is_redirect()) break;
      if (!seen.insert(target).second) {
        lex.warnings.push_back("redirect cycle through '" + page.title + "'");
        broken = true;
        break;
      }
      if (hops == kMaxRedirectHops) {
        lex.warnings.push_back("redirect chain from '" + page.title + "' exceeds " +
                               std::to_string(kMaxRedirectHops) + " hops");
        broken = true;
        break;
      }
      target = normalize_title(*it->second->redirect_target);
      ++hops;
    }
    if (broken) continue;
    const auto entry = lex.entries.find(target);
    if (entry == lex.entries.end()) continue;
    entry->second.aliases.insert(page.title);
    lex.redirects[page.title] = target;
  }

  // Alias collisions: a shared alias is ambiguous and dropped from every entry
  // except as the canonical title of its own entry.
  std::map<std::string, std::vector<std::string>> owners;
  for (const auto& [title, entry] : lex.entries) {
    for (const auto& alias : entry.aliases) owners[alias].push_back(title);
  }
  for (const auto& [alias, titles] : owners) {
    if (titles.size() < 2) continue;
    std::string who;
    for (const auto& t : titles) {
      if (t != alias) lex.entries[t].aliases.erase(alias);
      who += (who.empty() ? "" : ", ") + t;
    }
    lex.redirects.erase(alias);
    lex.warnings.push_back("alias '" + alias + "' shared by {" + who + "} dropped");
  }
  return lex;
}

// ---------------------------------------------------------------------------

std::map<std::string, EntityType> read_type_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open type map " + path.string());
  std::map<std::string, EntityType> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected '<category>\\t<TYPE>'");
    }
    const auto type = parse_entity_type(trim(line.substr(tab + 1)));
    if (!type) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown type '" +
                      trim(line.substr(tab + 1)) + "'");
    }
    out[trim(line.substr(0, tab))] = *type;
  }
  return out;
}

TypeMapResult propagate_type_map(const CategoryGraph& graph,
                                 const std::map<std::string, EntityType>& manual_map,
                                 std::size_t manual_depth) {
  TypeMapResult result;
  std::vector<std::pair<std::size_t, std::string>> deep;
  for (const auto& [name, d] : graph.depth) {
    if (!graph.is_alive(name)) continue;
    const auto manual = manual_map.find(name);
    if (manual != manual_map.end()) {
      result.types[name] = manual->second;
    } else if (d <= manual_depth) {
      result.untyped.push_back(name);
    } else {
      deep.emplace_back(d, name);
    }
  }
  std::sort(deep.begin(), deep.end());

  for (const auto& [d, name] : deep) {
    std::array<std::size_t, kNumEntityTypes> votes{};
    std::array<std::size_t, kNumEntityTypes> shallowest;
    shallowest.fill(static_cast<std::size_t>(-1));
    bool any = false;
    for (const auto& parent : graph.parents.at(name)) {
      const auto it = result.types.find(parent);
      if (it == result.types.end() || !graph.is_alive(parent)) continue;
      const auto t = static_cast<std::size_t>(it->second);
      ++votes[t];
      shallowest[t] = std::min(shallowest[t], graph.depth.at(parent));
      any = true;
    }
    if (!any) {
      result.untyped.push_back(name);
      continue;
    }
    const std::size_t top = *std::max_element(votes.begin(), votes.end());
    std::size_t best_depth = static_cast<std::size_t>(-1);
    for (std::size_t t = 0; t < kNumEntityTypes; ++t) {
      if (votes[t] == top) best_depth = std::min(best_depth, shallowest[t]);
    }
    std::optional<EntityType> chosen;
    for (std::size_t t = 0; t < kNumEntityTypes; ++t) {
      if (votes[t] != top || shallowest[t] != best_depth) continue;
      const auto candidate = static_cast<EntityType>(t);
      if (!chosen || to_string(candidate) < to_string(*chosen)) chosen = candidate;
    }
    result.types[name] = *chosen;
  }
  std::sort(result.untyped.begin(), result.untyped.end());
  return result;
}

}  // namespace ser
