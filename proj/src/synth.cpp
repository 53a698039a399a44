#include <array>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ser/iob.hpp"
#include "ser/noise.hpp"
#include "ser/random.hpp"

namespace ser {

namespace {

struct TypeWords {
  std::vector<std::string> heads;  // may end an entity name
  std::vector<std::string> left;   // context word before a mention
  std::vector<std::string> right;  // context word after a mention
};

// Indexed by EntityType.
const std::array<TypeWords, kNumEntityTypes>& type_words() {
  static const std::array<TypeWords, kNumEntityTypes> words = {{
      {{"Sort", "Search", "Descent"}, {"run", "apply", "compute", "tune"}, {"algorithm", "method"}},
      {{"Studio", "Player", "Office"}, {"launch", "open", "uninstall", "update"}, {"app", "client"}},
      {{"RISC", "Core", "Arch"}, {"target", "design", "emulate", "adopt"}, {"design", "ISA"}},
      {{"Tree", "Heap", "Map"}, {"allocate", "traverse", "index", "store"}, {"structure", "buffer"}},
      {{"Pad", "Drive", "Phone"}, {"plug", "connect", "mount", "charge"}, {"device", "adapter"}},
      {{"Error", "Fault", "Exception"}, {"raise", "throw", "catch", "hit"}, {"error", "exception"}},
      {{"Computing", "Design", "Theory"}, {"discuss", "explain", "study", "teach"}, {"concept", "paradigm"}},
      {{"Script", "Lang", "Lisp"}, {"write", "compile", "learn", "transpile"}, {"code", "language"}},
      {{"JS", "Lib", "Kit"}, {"import", "link", "require", "bundle"}, {"library", "package"}},
      {{"License", "GPL", "Clause"}, {"license", "relicense", "sublicense", "dual-license"}, {"license", "terms"}},
      {{"OS", "Linux", "BSD"}, {"boot", "install", "reinstall", "patch"}, {"kernel", "system"}},
      {{"Protocol", "Link", "Wire"}, {"speak", "negotiate", "tunnel", "encrypt"}, {"protocol", "handshake"}},
  }};
  return words;
}

const std::vector<std::string> kModifiers = {"Open", "Net",   "Pro",  "Micro", "Free",
                                             "Hyper", "Cloud", "Smart", "Deep", "Go"};
const std::vector<std::string> kNeutral = {"the", "some", "our", "a", "every", "that"};
const std::vector<std::string> kConnectors = {"and", "with", "on", "while", "after",
                                              "before", "unlike", "then", "or", "via"};
const std::vector<std::string> kOpeners = {"We", "Today we", "They", "Users", "The team",
                                           "Nobody will", "You can", "Developers"};

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

std::string pseudo_word(Rng& rng) {
  static const std::string consonants = "bcdfgklmnprstvxz";
  static const std::string vowels = "aeiou";
  const std::size_t syllables = 2 + uniform_index(rng, 2);
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += consonants[uniform_index(rng, consonants.size())];
    w += vowels[uniform_index(rng, vowels.size())];
  }
  if (uniform01(rng) < 0.5) w += consonants[uniform_index(rng, consonants.size())];
  w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

using Name = std::vector<std::string>;

std::array<std::vector<Name>, kNumEntityTypes> make_lexicon(std::size_t size, Rng& rng) {
  std::array<std::vector<Name>, kNumEntityTypes> lex;
  std::set<std::string> stems;
  const std::size_t per_type = std::max<std::size_t>(1, size / kNumEntityTypes);
  for (std::size_t t = 0; t < kNumEntityTypes; ++t) {
    const auto& words = type_words()[t];
    for (std::size_t i = 0; i < per_type; ++i) {
      std::string stem;
      do {
        stem = pseudo_word(rng);
      } while (!stems.insert(stem).second);
      Name name;
      if (uniform01(rng) < 0.5) name.push_back(pick(kModifiers, rng));
      name.push_back(stem);
      if (uniform01(rng) < 0.8) name.push_back(pick(words.heads, rng));
      lex[t].push_back(std::move(name));
    }
  }
  return lex;
}

}  // namespace

Corpus gen_synthetic_corpus(std::size_t n_sentences, std::size_t lexicon_size, std::uint64_t seed) {
  Rng lex_rng(derive_seed({seed, 0x1e8}));
  const auto lexicon = make_lexicon(lexicon_size, lex_rng);

  Corpus corpus;
  corpus.metadata.name = "synthetic";
  corpus.metadata.creation_params = "n=" + std::to_string(n_sentences) +
                                    " lexicon=" + std::to_string(lexicon_size) +
                                    " seed=" + std::to_string(seed);
  corpus.sentences.reserve(n_sentences);
  for (std::size_t s = 0; s < n_sentences; ++s) {
    Rng rng(derive_seed({seed, 0x5e7, s}));
    const double u = uniform01(rng);
    const std::size_t slots = u < 0.25 ? 1 : (u < 0.65 ? 2 : 3);

    std::vector<std::string> surfaces;
    std::vector<Span> spans;
    if (uniform01(rng) < 0.3) {
      std::istringstream opener(pick(kOpeners, rng));
      for (std::string w; opener >> w;) surfaces.push_back(w);
    }
    for (std::size_t k = 0; k < slots; ++k) {
      if (k) surfaces.push_back(pick(kConnectors, rng));
      const auto t = static_cast<std::size_t>(uniform_index(rng, kNumEntityTypes));
      const auto& words = type_words()[t];
      const double c = uniform01(rng);
      if (c < 0.5) {
        surfaces.push_back(pick(words.left, rng));
      } else if (c < 0.65) {
        surfaces.push_back(pick(kNeutral, rng));
      }
      const auto& name = lexicon[t][uniform_index(rng, lexicon[t].size())];
      const std::size_t start = surfaces.size();
      surfaces.insert(surfaces.end(), name.begin(), name.end());
      spans.push_back({start, surfaces.size(), static_cast<EntityType>(t)});
      if (uniform01(rng) < 0.2) surfaces.push_back(pick(words.right, rng));
    }
    surfaces.push_back(".");

    LabeledSentence sent;
    sent.tokens = tokens_from_surfaces(surfaces);
    sent.labels = encode_iob(surfaces.size(), spans);
    sent.source_id = "synth#" + std::to_string(s + 1);
    corpus.sentences.push_back(std::move(sent));
  }
  return corpus;
}

}  // namespace ser
