#include "ser/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "ser/iob.hpp"
#include "ser/random.hpp"

namespace ser {

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
  add(kPadSurface);
  add(kUnkSurface);
}

void Vocab::add(const std::string& surface) {
  if (ids_.count(surface)) throw DataError("duplicate vocab entry '" + surface + "'");
  ids_.emplace(surface, surfaces_.size());
  surfaces_.push_back(surface);
}

std::size_t Vocab::id(const std::string& surface) const {
  const auto it = ids_.find(surface);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocab::encode(const LabeledSentence& sentence) const {
  std::vector<std::size_t> out;
  out.reserve(sentence.size());
  for (const auto& t : sentence.tokens) out.push_back(id(t.surface));
  return out;
}

void Vocab::save(std::ostream& out) const {
  for (std::size_t i = 0; i < surfaces_.size(); ++i) out << surfaces_[i] << '\t' << i << '\n';
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab " + path.string());
  save(out);
}

Vocab Vocab::load(std::istream& in) {
  Vocab v;
  v.surfaces_.clear();
  v.ids_.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    std::size_t id = 0;
    try {
      if (tab == std::string::npos) throw std::invalid_argument("tab");
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("vocab line " + std::to_string(line_no) + ": expected '<surface>\\t<id>'");
    }
    if (id != v.surfaces_.size()) {
      throw DataError("vocab line " + std::to_string(line_no) + ": ids must be dense and ordered");
    }
    v.add(line.substr(0, tab));
  }
  if (v.size() < 2 || v.surfaces_[kPad] != kPadSurface || v.surfaces_[kUnk] != kUnkSurface) {
    throw DataError("vocab must start with " + std::string(kPadSurface) + " and " + kUnkSurface);
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab " + path.string());
  return load(in);
}

Vocab build_vocab(const Corpus& corpus, std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) ++counts[t.surface];
  }
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [surface, n] : items) {
    if (n >= min_freq && !v.contains(surface)) v.add(surface);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Tagger

std::size_t TaggerConfig::parameter_count() const {
  return vocab_size * embed_dim + hidden_dim * (window * embed_dim) + hidden_dim +
         num_labels * hidden_dim + num_labels;
}

void TaggerConfig::validate() const {
  if (vocab_size < 2 || embed_dim == 0 || hidden_dim == 0 || num_labels < 2) {
    throw UsageError("tagger dimensions must be positive (vocab >= 2, labels >= 2)");
  }
  if (window % 2 == 0) throw UsageError("tagger window must be odd");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
}

std::size_t Batch::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

struct TokenTagger::Views {
  using Map = Eigen::Map<Matrix>;
  using CMap = Eigen::Map<const Matrix>;
  template <typename P, typename M, typename V>
  struct Set {
    M embed, w1;
    V b1;
    M w2;
    V b2;
  };

  static std::array<std::size_t, 5> offsets(const TaggerConfig& c) {
    const std::size_t e = c.vocab_size * c.embed_dim;
    const std::size_t w1 = e + c.hidden_dim * c.window * c.embed_dim;
    const std::size_t b1 = w1 + c.hidden_dim;
    const std::size_t w2 = b1 + c.num_labels * c.hidden_dim;
    return {0, e, w1, b1, w2};
  }

  static auto mutable_views(const TaggerConfig& c, double* p) {
    const auto o = offsets(c);
    const auto we = static_cast<Eigen::Index>(c.window * c.embed_dim);
    const auto V = static_cast<Eigen::Index>(c.vocab_size);
    const auto E = static_cast<Eigen::Index>(c.embed_dim);
    const auto H = static_cast<Eigen::Index>(c.hidden_dim);
    const auto L = static_cast<Eigen::Index>(c.num_labels);
    return Set<double*, Map, Eigen::Map<Eigen::VectorXd>>{
        Map(p + o[0], V, E), Map(p + o[1], H, we), Eigen::Map<Eigen::VectorXd>(p + o[2], H),
        Map(p + o[3], L, H), Eigen::Map<Eigen::VectorXd>(p + o[4], L)};
  }

  static auto views(const TaggerConfig& c, const double* p) {
    const auto o = offsets(c);
    const auto we = static_cast<Eigen::Index>(c.window * c.embed_dim);
    const auto V = static_cast<Eigen::Index>(c.vocab_size);
    const auto E = static_cast<Eigen::Index>(c.embed_dim);
    const auto H = static_cast<Eigen::Index>(c.hidden_dim);
    const auto L = static_cast<Eigen::Index>(c.num_labels);
    return Set<const double*, CMap, Eigen::Map<const Eigen::VectorXd>>{
        CMap(p + o[0], V, E), CMap(p + o[1], H, we), Eigen::Map<const Eigen::VectorXd>(p + o[2], H),
        CMap(p + o[3], L, H), Eigen::Map<const Eigen::VectorXd>(p + o[4], L)};
  }
};

TokenTagger::TokenTagger(const TaggerConfig& config) : config_(config) {
  config_.validate();
  params_.resize(static_cast<Eigen::Index>(config_.parameter_count()));
  Rng rng(derive_seed({config_.init_seed, 0x1417}));
  for (Eigen::Index i = 0; i < params_.size(); ++i) {
    params_[i] = (2.0 * uniform01(rng) - 1.0) * config_.init_range;
  }
}

void TokenTagger::forward(const Batch& batch, bool stochastic,
                          std::span<const std::uint64_t> pass_seeds, ForwardCache& cache) const {
  const auto& c = config_;
  if (stochastic && pass_seeds.size() != batch.sentences.size()) {
    throw UsageError("one pass seed per sentence is required");
  }
  const std::size_t half = c.window / 2;
  const auto E = static_cast<Eigen::Index>(c.embed_dim);
  const auto H = static_cast<Eigen::Index>(c.hidden_dim);
  const auto v = Views::views(c, params_.data());

  cache.offsets.clear();
  cache.padded_ids.clear();
  cache.padded_offsets.clear();
  std::size_t tokens = 0;
  for (const auto& s : batch.sentences) {
    cache.offsets.push_back(tokens);
    cache.padded_offsets.push_back(cache.padded_ids.size());
    cache.padded_ids.insert(cache.padded_ids.end(), half, Vocab::kPad);
    for (const auto id : s) {
      if (id >= c.vocab_size) {
        throw DataError("token id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(c.vocab_size));
      }
      cache.padded_ids.push_back(id);
    }
    cache.padded_ids.insert(cache.padded_ids.end(), half, Vocab::kPad);
    tokens += s.size();
  }
  const auto P = static_cast<Eigen::Index>(cache.padded_ids.size());
  const auto T = static_cast<Eigen::Index>(tokens);

  cache.embed_mask.setOnes(P, E);
  cache.hidden_mask.setOnes(T, H);
  if (stochastic && c.dropout > 0.0) {
    const double keep = 1.0 / (1.0 - c.dropout);
    for (std::size_t i = 0; i < batch.sentences.size(); ++i) {
      Rng rng(pass_seeds[i]);
      const auto p0 = static_cast<Eigen::Index>(cache.padded_offsets[i]);
      const auto plen = static_cast<Eigen::Index>(batch.sentences[i].size() + 2 * half);
      for (Eigen::Index r = p0; r < p0 + plen; ++r) {
        for (Eigen::Index k = 0; k < E; ++k) {
          cache.embed_mask(r, k) = uniform01(rng) < c.dropout ? 0.0 : keep;
        }
      }
      const auto t0 = static_cast<Eigen::Index>(cache.offsets[i]);
      const auto n = static_cast<Eigen::Index>(batch.sentences[i].size());
      for (Eigen::Index r = t0; r < t0 + n; ++r) {
        for (Eigen::Index k = 0; k < H; ++k) {
          cache.hidden_mask(r, k) = uniform01(rng) < c.dropout ? 0.0 : keep;
        }
      }
    }
  }

  cache.embedded.resize(P, E);
  for (Eigen::Index r = 0; r < P; ++r) {
    cache.embedded.row(r) =
        v.embed.row(static_cast<Eigen::Index>(cache.padded_ids[r])).cwiseProduct(cache.embed_mask.row(r));
  }

  cache.window_input.resize(T, static_cast<Eigen::Index>(c.window) * E);
  for (std::size_t i = 0; i < batch.sentences.size(); ++i) {
    const auto t0 = static_cast<Eigen::Index>(cache.offsets[i]);
    const auto p0 = static_cast<Eigen::Index>(cache.padded_offsets[i]);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(batch.sentences[i].size()); ++k) {
      for (Eigen::Index w = 0; w < static_cast<Eigen::Index>(c.window); ++w) {
        cache.window_input.row(t0 + k).segment(w * E, E) = cache.embedded.row(p0 + k + w);
      }
    }
  }

  cache.hidden.noalias() = cache.window_input * v.w1.transpose();
  cache.hidden.rowwise() += v.b1.transpose();
  cache.hidden = cache.hidden.array().tanh();
  cache.hidden_dropped = cache.hidden.cwiseProduct(cache.hidden_mask);

  cache.probs.noalias() = cache.hidden_dropped * v.w2.transpose();
  cache.probs.rowwise() += v.b2.transpose();
  for (Eigen::Index r = 0; r < T; ++r) {
    auto row = cache.probs.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp();
    row /= row.sum();
  }
}

Matrix TokenTagger::forward(std::span<const std::size_t> ids, bool stochastic,
                            std::uint64_t pass_seed) const {
  Batch batch;
  batch.sentences.emplace_back(ids.begin(), ids.end());
  ForwardCache cache;
  const std::uint64_t seeds[1] = {pass_seed};
  forward(batch, stochastic, seeds, cache);
  return cache.probs;
}

void TokenTagger::backward(const ForwardCache& cache, const Matrix& dlogits, Vector& grad) const {
  const auto& c = config_;
  if (grad.size() != params_.size()) grad = Vector::Zero(params_.size());
  const auto v = Views::views(c, params_.data());
  auto g = Views::mutable_views(c, grad.data());
  const auto E = static_cast<Eigen::Index>(c.embed_dim);

  g.w2.noalias() += dlogits.transpose() * cache.hidden_dropped;
  g.b2 += dlogits.colwise().sum().transpose();

  Matrix d_hidden = (dlogits * v.w2).cwiseProduct(cache.hidden_mask);
  d_hidden.array() *= 1.0 - cache.hidden.array().square();
  g.w1.noalias() += d_hidden.transpose() * cache.window_input;
  g.b1 += d_hidden.colwise().sum().transpose();

  const Matrix d_window = d_hidden * v.w1;
  Matrix d_embedded = Matrix::Zero(cache.embedded.rows(), E);
  for (std::size_t i = 0; i < cache.offsets.size(); ++i) {
    const auto t0 = static_cast<Eigen::Index>(cache.offsets[i]);
    const auto t1 = static_cast<Eigen::Index>(i + 1 < cache.offsets.size()
                                                  ? cache.offsets[i + 1]
                                                  : static_cast<std::size_t>(d_window.rows()));
    const auto p0 = static_cast<Eigen::Index>(cache.padded_offsets[i]);
    for (Eigen::Index k = 0; k < t1 - t0; ++k) {
      for (Eigen::Index w = 0; w < static_cast<Eigen::Index>(c.window); ++w) {
        d_embedded.row(p0 + k + w) += d_window.row(t0 + k).segment(w * E, E);
      }
    }
  }
  d_embedded.array() *= cache.embed_mask.array();
  for (Eigen::Index r = 0; r < d_embedded.rows(); ++r) {
    g.embed.row(static_cast<Eigen::Index>(cache.padded_ids[r])) += d_embedded.row(r);
  }
}

namespace {

constexpr char kMagic[8] = {'S', 'E', 'R', 'T', 'A', 'G', '\0', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("checkpoint truncated while reading " + what);
  return v;
}

}  // namespace

void TokenTagger::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put(out, kCheckpointVersion);
  for (const std::uint64_t d : {config_.vocab_size, config_.embed_dim, config_.hidden_dim,
                                config_.window, config_.num_labels}) {
    put(out, d);
  }
  put(out, config_.dropout);
  put(out, config_.init_range);
  put(out, config_.init_seed);
  put(out, static_cast<std::uint64_t>(params_.size()));
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!out) throw DataError("write failed for " + path.string());
}

TokenTagger TokenTagger::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw DataError(path.string() + " is not a tagger checkpoint");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  TaggerConfig c;
  c.vocab_size = get<std::uint64_t>(in, "vocab size");
  c.embed_dim = get<std::uint64_t>(in, "embedding width");
  c.hidden_dim = get<std::uint64_t>(in, "hidden width");
  c.window = get<std::uint64_t>(in, "window");
  c.num_labels = get<std::uint64_t>(in, "label count");
  c.dropout = get<double>(in, "dropout");
  c.init_range = get<double>(in, "init range");
  c.init_seed = get<std::uint64_t>(in, "init seed");
  const auto count = get<std::uint64_t>(in, "parameter count");
  if (count != c.parameter_count()) throw DataError("checkpoint parameter count mismatch");
  TokenTagger model(c);
  in.read(reinterpret_cast<char*>(model.params_.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw DataError("checkpoint truncated while reading parameters");
  return model;
}

std::vector<TagLabel> decode_labels(const Matrix& probs) {
  std::vector<TagLabel> labels;
  labels.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    labels.push_back(TagLabel::from_id(static_cast<std::size_t>(best)));
  }
  return repair_iob(labels);
}

Corpus predict_corpus(const TokenTagger& model, const Vocab& vocab, const Corpus& corpus) {
  Corpus out = corpus;
  constexpr std::size_t kChunk = 256;
  ForwardCache cache;
  for (std::size_t begin = 0; begin < corpus.size(); begin += kChunk) {
    const std::size_t end = std::min(corpus.size(), begin + kChunk);
    Batch batch;
    for (std::size_t s = begin; s < end; ++s) batch.sentences.push_back(vocab.encode(corpus.sentences[s]));
    model.forward(batch, false, {}, cache);
    for (std::size_t s = begin; s < end; ++s) {
      const auto k = s - begin;
      const auto t0 = static_cast<Eigen::Index>(cache.offsets[k]);
      const auto n = static_cast<Eigen::Index>(batch.sentences[k].size());
      out.sentences[s].labels = decode_labels(cache.probs.middleRows(t0, n));
    }
  }
  return out;
}

}  // namespace ser
