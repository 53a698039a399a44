#include "ser/experiment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "ser/corpus.hpp"
#include "ser/random.hpp"

namespace ser {

Workload make_workload(const WorkloadSpec& spec, std::uint64_t seed) {
  const auto corpus = gen_synthetic_corpus(spec.sentences, spec.lexicon_size, seed);
  SplitSizes sizes;
  sizes.train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(corpus.size())));
  sizes.val = static_cast<std::size_t>(std::llround(spec.val_fraction * static_cast<double>(corpus.size())));
  sizes.test = corpus.size() - sizes.train - sizes.val;
  auto splits = stratified_split(corpus, sizes, seed);

  Workload w;
  w.seed = seed;
  auto noise = spec.noise;
  noise.seed = seed;
  auto noisy = inject_noise(splits.train, noise);
  w.clean_train = std::move(splits.train);
  w.train = std::move(noisy.corpus);
  w.changes = std::move(noisy.log);
  w.val = std::move(splits.val);
  w.test = std::move(splits.test);
  w.disagreement = label_disagreement(w.train, w.clean_train);
  w.vocab = build_vocab(w.train, spec.min_freq);
  return w;
}

TaggerConfig reference_tagger(const Vocab& vocab, std::uint64_t init_seed) {
  TaggerConfig c;
  c.vocab_size = vocab.size();
  c.init_seed = init_seed;
  return c;
}

double test_micro_f1(const TokenTagger& model, const Vocab& vocab, const Corpus& test) {
  return strict_span_prf(predict_corpus(model, vocab, test), test).micro.f1;
}

double Replication::mean_delta() const {
  if (rows.empty()) return 0.0;
  double d = 0.0;
  for (const auto& r : rows) d += r.selfreg_f1 - r.vanilla_f1;
  return d / static_cast<double>(rows.size());
}

std::size_t Replication::wins() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.selfreg_f1 > r.vanilla_f1 ? 1 : 0;
  return n;
}

Replication run_replication(const WorkloadSpec& spec, const std::vector<std::uint64_t>& seeds,
                            const TrainConfig& selfreg) {
  Replication out;
  for (const auto seed : seeds) {
    const auto w = make_workload(spec, seed);
    const TrainData data{&w.vocab, &w.train, &w.val};
    ReplicationRow row;
    row.seed = seed;
    row.disagreement = w.disagreement;

    auto config = selfreg;
    config.seed = seed;
    auto vanilla_config = config;
    vanilla_config.k = 1;
    vanilla_config.alpha = 0.0;
    TokenTagger vanilla(reference_tagger(w.vocab, seed));
    row.vanilla = train_vanilla(vanilla, data, vanilla_config);
    row.vanilla_f1 = test_micro_f1(vanilla, w.vocab, w.test);

    TokenTagger model(reference_tagger(w.vocab, seed));
    row.selfreg = train_self_reg(model, data, config);
    row.selfreg_f1 = test_micro_f1(model, w.vocab, w.test);
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string render_replication(const Replication& r) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "seed" << std::right << std::setw(14) << "disagreement"
      << std::setw(10) << "vanilla" << std::setw(10) << "selfreg" << std::setw(8) << "delta" << '\n';
  double v = 0.0, s = 0.0;
  for (const auto& row : r.rows) {
    std::ostringstream delta;
    delta << std::showpos << std::fixed << std::setprecision(1)
          << 100.0 * (row.selfreg_f1 - row.vanilla_f1);
    out << std::left << std::setw(6) << row.seed << std::right << std::setw(14)
        << format_pct(row.disagreement) + "%" << std::setw(10) << format_pct(row.vanilla_f1)
        << std::setw(10) << format_pct(row.selfreg_f1) << std::setw(8) << delta.str() << '\n';
    v += row.vanilla_f1;
    s += row.selfreg_f1;
  }
  if (!r.rows.empty()) {
    const auto n = static_cast<double>(r.rows.size());
    std::ostringstream delta;
    delta << std::showpos << std::fixed << std::setprecision(2) << 100.0 * r.mean_delta();
    out << std::left << std::setw(6) << "mean" << std::right << std::setw(14) << "" << std::setw(10)
        << format_pct(v / n) << std::setw(10) << format_pct(s / n) << std::setw(8) << delta.str()
        << '\n';
    out << "selfreg ahead in " << r.wins() << "/" << r.rows.size() << " seeds\n";
  }
  return out.str();
}

KSweep k_sweep(const Corpus& train, const Corpus& val, const Corpus& test, const Vocab& vocab,
               const TrainConfig& base, const std::vector<std::size_t>& ks,
               const std::vector<std::uint64_t>& seeds) {
  for (const auto k : ks) {
    if (k < 1) throw UsageError("K values must be at least 1");
  }
  KSweep out;
  out.ks = ks;
  KSweepRow mean{"Mean", std::vector<double>(ks.size(), 0.0)};
  const TrainData data{&vocab, &train, &val};
  for (const auto seed : seeds) {
    KSweepRow row{"seed " + std::to_string(seed), {}};
    for (std::size_t i = 0; i < ks.size(); ++i) {
      auto config = base;
      config.k = ks[i];
      config.seed = seed;
      TokenTagger model(reference_tagger(vocab, seed));
      train_self_reg(model, data, config);
      row.f1.push_back(test_micro_f1(model, vocab, test));
      mean.f1[i] += row.f1.back() / static_cast<double>(seeds.size());
    }
    out.rows.push_back(std::move(row));
  }
  if (!seeds.empty()) out.rows.push_back(std::move(mean));
  return out;
}

std::vector<BenchRun> default_bench_runs() {
  return {{"Vanilla", "vanilla", 1, 1},
          {"Self-reg (K=2)", "selfreg", 2, 1},
          {"Self-reg (K=3)", "selfreg", 3, 1},
          {"Co-reg (N=2)", "coreg", 1, 2}};
}

namespace {

struct BenchMessage {
  double wall_seconds;
  std::uint64_t peak_rss_bytes;
  std::uint64_t parameter_bytes;
  std::uint64_t optimizer_bytes;
};

BenchMessage bench_child(const Workload& w, const TrainConfig& base, const BenchRun& run) {
  const TrainData data{&w.vocab, &w.train, &w.val};
  auto config = base;
  config.k = run.k;
  TrainReport report;
  if (run.method == "coreg") {
    std::vector<TokenTagger> models;
    for (std::size_t m = 0; m < run.n_models; ++m) {
      models.emplace_back(reference_tagger(w.vocab, derive_seed({base.seed, m})));
    }
    reset_peak_rss();
    report = train_co_reg(models, data, CoRegConfig{config, run.n_models});
  } else {
    TokenTagger model(reference_tagger(w.vocab, base.seed));
    reset_peak_rss();
    if (run.method == "vanilla") {
      config.k = 1;
      config.alpha = 0.0;
      report = train_vanilla(model, data, config);
    } else {
      report = train_self_reg(model, data, config);
    }
  }
  return {report.wall_seconds, report.peak_rss_bytes, report.parameter_bytes, report.optimizer_bytes};
}

}  // namespace

std::vector<ResourceRow> run_bench(const Workload& workload, const TrainConfig& base,
                                   const std::vector<BenchRun>& runs) {
  for (const auto& run : runs) {
    if (run.method != "vanilla" && run.method != "selfreg" && run.method != "coreg") {
      throw UsageError("unknown bench method '" + run.method + "'");
    }
  }
  std::vector<ResourceRow> rows;
  for (const auto& run : runs) {
    int fds[2];
    if (pipe(fds) != 0) throw TrainingError(std::string("pipe failed: ") + std::strerror(errno));
    const pid_t pid = fork();
    if (pid < 0) throw TrainingError(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
      close(fds[0]);
      int status = 0;
      try {
        const auto msg = bench_child(workload, base, run);
        if (write(fds[1], &msg, sizeof msg) != static_cast<ssize_t>(sizeof msg)) status = 1;
      } catch (...) {
        status = 1;
      }
      close(fds[1]);
      _exit(status);
    }
    close(fds[1]);
    BenchMessage msg{};
    const auto got = read(fds[0], &msg, sizeof msg);
    close(fds[0]);
    int status = 0;
    waitpid(pid, &status, 0);
    if (got != static_cast<ssize_t>(sizeof msg) || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      throw TrainingError("bench run '" + run.label + "' failed");
    }
    rows.push_back({run.label, msg.wall_seconds, static_cast<std::size_t>(msg.peak_rss_bytes),
                    static_cast<std::size_t>(msg.parameter_bytes),
                    static_cast<std::size_t>(msg.optimizer_bytes)});
  }
  return rows;
}

}  // namespace ser
