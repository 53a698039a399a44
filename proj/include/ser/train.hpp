#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ser/tagger.hpp"

namespace ser {

inline constexpr double kProbClamp = 1e-12;

// K per-token probability matrices of equal shape.
struct DistributionSet {
  std::vector<Matrix> passes;

  Matrix average() const;
  std::size_t tokens() const { return passes.empty() ? 0 : static_cast<std::size_t>(passes[0].rows()); }
};

struct LossValue {
  double sum = 0.0;   // over tokens
  double mean = 0.0;  // per token
};

// (1/K) sum_j KL(P_j || P_avg), per token; `symmetric` adds 1/2 KL(P_avg || P_j).
LossValue divergence_loss(const DistributionSet& dists, bool symmetric = false);
// -(1/K) sum_j log P_j[y], per token.
LossValue task_loss(const DistributionSet& dists, std::span<const std::size_t> gold);
inline double agreement_loss(double task, double kl, double alpha) { return task + alpha * kl; }

struct ObjectiveTerms {
  double task = 0.0;  // per-token means
  double kl = 0.0;
  double total = 0.0;
  std::vector<Matrix> dlogits;  // one per pass
};

// Per-token mean of task_scale * L_task + alpha * L_kl and its gradient with
// respect to each pass's logits. Clamped probabilities contribute no gradient
// through the clamped log.
ObjectiveTerms objective(const DistributionSet& dists, std::span<const std::size_t> gold,
                         double alpha, bool symmetric, double task_scale = 1.0);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  double warmup_fraction = 0.10;
  double alpha = 10.0;
  std::size_t k = 3;
  bool symmetric = false;
  bool single_pass_warmup = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t total_steps(std::size_t n_train) const;
  std::size_t warmup_steps(std::size_t n_train) const;  // ceil(warmup_fraction * total)
};

// The defaults above are desk-scale; these are the full-scale values
// (learning rate 1e-5, 30 epochs).
TrainConfig full_scale_train_config();

struct EpochRecord {
  double task = 0.0;  // mean over the epoch's steps
  double kl = 0.0;
  double agree = 0.0;
  double val_micro_f1 = 0.0;
};

struct TrainReport {
  std::string method;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_micro_f1 = 0.0;
  double wall_seconds = 0.0;
  std::size_t peak_rss_bytes = 0;
  std::size_t parameter_bytes = 0;  // summed over trained models
  std::size_t optimizer_bytes = 0;
  std::size_t models = 1;
  std::uint64_t seed = 0;

  void write(std::ostream& out) const;       // one `key value` per line
  void write_table(std::ostream& out) const;  // human-readable
};

// Adam with constant learning rate.
class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1, double beta2, double eps);
  void step(Vector& params, const Vector& grad);
  std::size_t state_bytes() const { return static_cast<std::size_t>(m_.size() + v_.size()) * sizeof(double); }

 private:
  Vector m_, v_;
  double lr_, b1_, b2_, eps_;
  std::uint64_t t_ = 0;
};

struct TrainData {
  const Vocab* vocab = nullptr;
  const Corpus* train = nullptr;
  const Corpus* val = nullptr;
};

using StepObserver = std::function<void(std::size_t step, const ObjectiveTerms&)>;

// Seed of pass j for the sentence at corpus index idx during step (1-based).
std::uint64_t pass_seed(std::uint64_t seed, std::size_t step, std::size_t pass, std::size_t idx);

// K dropout passes per step, L_task during warm-up, L_agree
// after. The returned model is the best-validation-F1 snapshot.
TrainReport train_self_reg(TokenTagger& model, const TrainData& data, const TrainConfig& config,
                           const StepObserver& observer = {});

// Single stochastic pass, task loss only.
TrainReport train_vanilla(TokenTagger& model, const TrainData& data, const TrainConfig& config,
                          const StepObserver& observer = {});

struct CoRegConfig {
  TrainConfig train;
  std::size_t n_models = 2;
};

// N models with different init seeds, one stochastic pass each per step.
// Loss: sum_m L_task(m) + alpha * (1/N) sum_m KL(P_m || mean) after warm-up.
// `models` receives the trained models; the best one is moved to front.
TrainReport train_co_reg(std::vector<TokenTagger>& models, const TrainData& data,
                         const CoRegConfig& config, const StepObserver& observer = {});

// Peak resident set size of this process so far (VmHWM).
std::size_t peak_rss_bytes();
// Resets the VmHWM high-water mark when the kernel allows it.
bool reset_peak_rss();

}  // namespace ser
