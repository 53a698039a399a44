#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ser/eval.hpp"
#include "ser/noise.hpp"
#include "ser/tagger.hpp"
#include "ser/train.hpp"

namespace ser {

// Desk-scale noisy workload: synthetic corpus, 70/15/15 split, noise on the
// train portion only.
struct WorkloadSpec {
  std::size_t sentences = 3000;
  std::size_t lexicon_size = 1200;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::size_t min_freq = 2;
  NoiseSpec noise;  // seed is replaced by the workload seed
};

struct Workload {
  Corpus clean_train;
  Corpus train;  // noisy
  Corpus val;
  Corpus test;
  ChangeLog changes;
  Vocab vocab;
  double disagreement = 0.0;  // token labels of train vs clean_train
  std::uint64_t seed = 0;
};

Workload make_workload(const WorkloadSpec& spec, std::uint64_t seed);

// Reference tagger dimensions for a vocabulary.
TaggerConfig reference_tagger(const Vocab& vocab, std::uint64_t init_seed);

double test_micro_f1(const TokenTagger& model, const Vocab& vocab, const Corpus& test);

struct ReplicationRow {
  std::uint64_t seed = 0;
  double disagreement = 0.0;
  double vanilla_f1 = 0.0;  // test micro-F1
  double selfreg_f1 = 0.0;
  TrainReport vanilla;
  TrainReport selfreg;
};

struct Replication {
  std::vector<ReplicationRow> rows;

  double mean_delta() const;  // mean selfreg - mean vanilla
  std::size_t wins() const;   // seeds with selfreg > vanilla
};

// Vanilla (single pass, task loss) against self-regularization with the
// K/alpha of `selfreg` on one workload per seed. Seeds drive the workload,
// the initialization and training alike.
Replication run_replication(const WorkloadSpec& spec, const std::vector<std::uint64_t>& seeds,
                            const TrainConfig& selfreg);

std::string render_replication(const Replication& r);

struct KSweep {
  std::vector<std::size_t> ks;
  std::vector<KSweepRow> rows;  // one per seed, then the mean
};

// One self-regularization run per K per seed; test micro-F1 of each.
KSweep k_sweep(const Corpus& train, const Corpus& val, const Corpus& test, const Vocab& vocab,
               const TrainConfig& base, const std::vector<std::size_t>& ks,
               const std::vector<std::uint64_t>& seeds);

struct BenchRun {
  std::string label;
  std::string method;  // vanilla | selfreg | coreg
  std::size_t k = 1;
  std::size_t n_models = 1;
};

// Vanilla, self-reg K=2, K=3, co-reg N=2.
std::vector<BenchRun> default_bench_runs();

// Each run trains in a forked child so peak RSS is measured per run; the
// high-water mark is reset right before training.
std::vector<ResourceRow> run_bench(const Workload& workload, const TrainConfig& base,
                                   const std::vector<BenchRun>& runs);

}  // namespace ser
