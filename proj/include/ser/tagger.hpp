#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "ser/types.hpp"

namespace ser {

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr const char* kPadSurface = "<pad>";
  static constexpr const char* kUnkSurface = "<unk>";

  Vocab();

  std::size_t id(const std::string& surface) const;  // kUnk when absent
  const std::string& surface(std::size_t id) const { return surfaces_.at(id); }
  std::size_t size() const { return surfaces_.size(); }
  bool contains(const std::string& surface) const { return ids_.count(surface) != 0; }

  std::vector<std::size_t> encode(const LabeledSentence& sentence) const;

  // `surface\tid` lines in id order, reserved entries included.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Vocab load(std::istream& in);
  static Vocab load(const std::filesystem::path& path);

  void add(const std::string& surface);

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Surfaces seen at least min_freq times, by descending frequency then
// byte-lexicographic order.
Vocab build_vocab(const Corpus& corpus, std::size_t min_freq);

struct TaggerConfig {
  std::size_t vocab_size = 2;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t window = 3;  // odd
  std::size_t num_labels = kNumLabels;
  double dropout = 0.10;
  double init_range = 0.08;
  std::uint64_t init_seed = 0;

  // V*E + H*(W*E) + H + L*H + L
  std::size_t parameter_count() const;
  void validate() const;
  friend bool operator==(const TaggerConfig&, const TaggerConfig&) = default;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Token ids of several sentences processed together.
struct Batch {
  std::vector<std::vector<std::size_t>> sentences;
  std::size_t token_count() const;
};

// Intermediate values kept for the backward pass. Rows of every per-token
// matrix follow the batch's sentence order.
struct ForwardCache {
  std::vector<std::size_t> offsets;       // first token row of each sentence
  std::vector<std::size_t> padded_ids;    // per sentence: half pads, ids, half pads
  std::vector<std::size_t> padded_offsets;
  Matrix embed_mask;                      // rows of padded_ids; scale or 0
  Matrix embedded;                        // after dropout
  Matrix window_input;                    // tokens x (W*E)
  Matrix hidden;                          // tanh output, before dropout
  Matrix hidden_mask;
  Matrix hidden_dropped;
  Matrix probs;                           // tokens x L
};

// Embedding -> width-W window feed-forward tanh encoder -> linear -> softmax.
// Dropout (inverted) after the embedding lookup and after the encoder.
class TokenTagger {
 public:
  explicit TokenTagger(const TaggerConfig& config);

  const TaggerConfig& config() const { return config_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  std::size_t parameter_bytes() const { return parameter_count() * sizeof(double); }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  // One row per token; stochastic passes draw masks from pass_seed.
  Matrix forward(std::span<const std::size_t> ids, bool stochastic, std::uint64_t pass_seed) const;

  // pass_seeds[i] drives sentence i's dropout masks when stochastic.
  void forward(const Batch& batch, bool stochastic, std::span<const std::uint64_t> pass_seeds,
               ForwardCache& cache) const;

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(logits).
  void backward(const ForwardCache& cache, const Matrix& dlogits, Vector& grad) const;

  void save(const std::filesystem::path& path) const;
  static TokenTagger load(const std::filesystem::path& path);

 private:
  struct Views;
  TaggerConfig config_;
  Vector params_;
};

// Per-token argmax, then orphan I-X repaired to B-X.
std::vector<TagLabel> decode_labels(const Matrix& probs);

Corpus predict_corpus(const TokenTagger& model, const Vocab& vocab, const Corpus& corpus);

}  // namespace ser
