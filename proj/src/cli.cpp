#include "ser/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "ser/corpus.hpp"
#include "ser/eval.hpp"
#include "ser/experiment.hpp"
#include "ser/noise.hpp"
#include "ser/spanlabel.hpp"
#include "ser/tagger.hpp"
#include "ser/train.hpp"
#include "ser/wiki.hpp"

namespace ser {

namespace {

namespace fs = std::filesystem;

std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

fs::path resolve(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("SER_DATA_DIR"); root && *root) return fs::path(root) / p;
  return p;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::optional<std::string> file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!file) return rest;
  std::ifstream in(resolve(*file));
  if (!in) throw UsageError("cannot open config file " + *file);
  std::vector<std::string> flags;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_copy(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(*file + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim_copy(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    flags.push_back("--" + key + "=" + trim_copy(line.substr(eq + 1)));
  }
  // Subcommand names must stay in front of the flags they own.
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < rest.size() && rest[i].rfind("-", 0) != 0) out.push_back(rest[i++]);
  out.insert(out.end(), flags.begin(), flags.end());
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(i), rest.end());
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(trim_copy(item));
    T v{};
    if (!(is >> v) || !is.eof()) throw UsageError(std::string("bad ") + what + " list '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

Corpus load_corpus(const std::string& path) { return read_conll(resolve(path)); }

void save_corpus(const std::string& path, const Corpus& corpus) { write_conll(resolve(path), corpus); }

template <class F>
void write_text(const std::string& path, F&& body) {
  std::ofstream f(resolve(path), std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  body(f);
  if (!f) throw DataError("write failed for " + path);
}

struct TrainFlags {
  TrainConfig config;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::optional<std::uint64_t> init_seed;

  void add(CLI::App* app) {
    app->add_option("--lr", config.learning_rate, "learning rate")->capture_default_str();
    app->add_option("--batch-size", config.batch_size)->capture_default_str();
    app->add_option("--epochs", config.epochs)->capture_default_str();
    app->add_option("--warmup", config.warmup_fraction, "warm-up fraction of steps")->capture_default_str();
    app->add_option("--alpha", config.alpha)->capture_default_str();
    app->add_option("--k", config.k, "forward passes per step")->capture_default_str();
    app->add_flag("--symmetric", config.symmetric, "add the reverse KL direction, halved");
    app->add_flag("--single-pass-warmup", config.single_pass_warmup);
    app->add_option("--seed", config.seed)->capture_default_str();
    app->add_option("--init-seed", init_seed, "defaults to --seed");
    app->add_option("--embed-dim", embed_dim)->capture_default_str();
    app->add_option("--hidden-dim", hidden_dim)->capture_default_str();
  }

  TaggerConfig tagger(const Vocab& vocab, std::uint64_t offset = 0) const {
    TaggerConfig c = reference_tagger(vocab, (init_seed ? *init_seed : config.seed) + offset);
    c.embed_dim = embed_dim;
    c.hidden_dim = hidden_dim;
    return c;
  }
};

// Corpora from files, or the synthetic noisy workload when --train is absent.
struct WorkloadFlags {
  std::string train, val, test;
  std::size_t min_freq = 2;
  WorkloadSpec spec;
  std::uint64_t workload_seed = 0;

  void add(CLI::App* app) {
    app->add_option("--train", train, "train corpus (default: synthetic workload)");
    app->add_option("--val", val);
    app->add_option("--test", test);
    app->add_option("--min-freq", min_freq)->capture_default_str();
    app->add_option("--sentences", spec.sentences, "synthetic corpus size")->capture_default_str();
    app->add_option("--lexicon", spec.lexicon_size, "synthetic lexicon size")->capture_default_str();
    app->add_option("--workload-seed", workload_seed)->capture_default_str();
  }

  Workload load(std::ostream& out) {
    if (train.empty()) {
      spec.min_freq = min_freq;
      auto w = make_workload(spec, workload_seed);
      out << "workload seed: " << workload_seed << " (synthetic, " << spec.sentences
          << " sentences, train disagreement " << format_pct(w.disagreement) << "%)\n";
      return w;
    }
    if (val.empty() || test.empty()) throw UsageError("--train needs --val and --test");
    Workload w;
    w.train = load_corpus(train);
    w.val = load_corpus(val);
    w.test = load_corpus(test);
    w.vocab = build_vocab(w.train, min_freq);
    return w;
  }
};

int cmd_build_corpus(const std::string& snapshot_path, const std::string& pipeline_path,
                     const std::string& out_path, const std::string& log_path, std::ostream& out) {
  const auto snapshot = read_snapshot(resolve(snapshot_path));
  const auto config = PipelineConfig::load(resolve(pipeline_path));
  const auto result = run_pipeline(snapshot, config);
  save_corpus(out_path, result.corpus);
  const auto stats = corpus_stats(result.corpus);
  out << "pages selected: " << result.selected.size() << "\n"
      << "sentences: " << stats.sentences << " (of " << result.log.raw_sentences << " raw)\n"
      << "spans: " << stats.spans << "\n"
      << "type stages: " << result.stage_counts[1] << " deepest category, " << result.stage_counts[2]
      << " majority, " << result.stage_counts[3] << " scorer\n";
  if (!log_path.empty()) {
    write_text(log_path, [&](std::ostream& f) {
      for (const auto& [title, inf] : result.inferred) {
        f << "type\t" << title << '\t' << to_string(inf.type) << "\tstage " << inf.stage << '\n';
      }
      for (const auto& m : result.log.messages) f << "note\t" << m << '\n';
    });
  }
  return kExitOk;
}

void print_tables(std::ostream& out, const MetricTable& t) {
  out << "micro P/R/F1: " << format_prf(t.micro) << "\n\n" << render_type_table(t);
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noisy software entity recognition toolkit", "ser"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--config", "flat key = value file of flag defaults");

  // build-corpus
  std::string snapshot, pipeline, out_path, log_path;
  auto* build = app.add_subcommand("build-corpus", "label a wiki snapshot into a CoNLL corpus");
  build->add_option("--snapshot", snapshot, "JSONL snapshot")->required();
  build->add_option("--pipeline", pipeline, "pipeline config (root, blocklist, heuristic, ...)")->required();
  build->add_option("--out", out_path, "output corpus")->required();
  build->add_option("--log", log_path, "type inference and labeling notes");

  // split
  std::string in_path, train_out, val_out, test_out, fractions = "0.7,0.15,0.15";
  std::uint64_t seed = 0;
  auto* split = app.add_subcommand("split", "stratified train/val/test split");
  split->add_option("--in", in_path)->required();
  split->add_option("--train-out", train_out)->required();
  split->add_option("--val-out", val_out)->required();
  split->add_option("--test-out", test_out)->required();
  split->add_option("--fractions", fractions, "train,val,test")->capture_default_str();
  split->add_option("--seed", seed)->capture_default_str();

  // inject-noise
  NoiseSpec noise;
  auto* inject = app.add_subcommand("inject-noise", "corrupt span labels with a change log");
  inject->add_option("--in", in_path)->required();
  inject->add_option("--out", out_path)->required();
  inject->add_option("--log", log_path, "change log output");
  inject->add_option("--flip", noise.p_type_flip)->capture_default_str();
  inject->add_option("--drop", noise.p_drop)->capture_default_str();
  inject->add_option("--spurious", noise.p_spurious)->capture_default_str();
  inject->add_option("--seed", noise.seed)->capture_default_str();

  // gen-synth
  std::size_t sentences = 3000, lexicon = 1200;
  auto* synth = app.add_subcommand("gen-synth", "generate a synthetic labeled corpus");
  synth->add_option("--sentences", sentences)->capture_default_str();
  synth->add_option("--lexicon", lexicon)->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--out", out_path)->required();

  // train
  std::string method, train_path, val_path, vocab_path, report_path;
  std::size_t min_freq = 2, n_models = 2;
  TrainFlags tf;
  auto* train = app.add_subcommand("train", "train a tagger");
  train->add_option("--method", method)->required()->check(CLI::IsMember({"selfreg", "coreg", "vanilla"}));
  train->add_option("--train", train_path)->required();
  train->add_option("--val", val_path);
  train->add_option("--out", out_path, "checkpoint")->required();
  train->add_option("--vocab", vocab_path, "vocab file; read if it exists, else built and written");
  train->add_option("--min-freq", min_freq)->capture_default_str();
  train->add_option("--n-models", n_models, "co-regularization model count")->capture_default_str();
  train->add_option("--report", report_path, "report file, one metric per line");
  tf.add(train);

  // eval
  std::string pred_path, gold_path, model_path, pred_out;
  auto* eval = app.add_subcommand("eval", "strict span scoring");
  eval->add_option("--gold", gold_path)->required();
  eval->add_option("--pred", pred_path, "predicted corpus");
  eval->add_option("--model", model_path, "checkpoint to predict with");
  eval->add_option("--vocab", vocab_path);
  eval->add_option("--pred-out", pred_out, "write model predictions");
  eval->add_option("--out", out_path, "report file");

  // ksweep
  std::string ks_text = "2,3,4", seeds_text = "0";
  WorkloadFlags wf;
  auto* ksweep = app.add_subcommand("ksweep", "test F1 by number of forward passes");
  ksweep->add_option("--ks", ks_text)->capture_default_str();
  ksweep->add_option("--seeds", seeds_text)->capture_default_str();
  ksweep->add_option("--out", out_path, "report file");
  wf.add(ksweep);
  tf.add(ksweep);

  // bench
  auto* bench = app.add_subcommand("bench", "wall-clock and memory per training method");
  bench->add_option("--out", out_path, "report file");
  wf.add(bench);
  tf.add(bench);

  // replicate
  std::string replicate_seeds = "0,1,2,3,4";
  auto* replicate = app.add_subcommand("replicate", "vanilla vs self-regularization on noisy synthetic data");
  replicate->add_option("--seeds", replicate_seeds)->capture_default_str();
  replicate->add_option("--flip", noise.p_type_flip)->capture_default_str();
  replicate->add_option("--drop", noise.p_drop)->capture_default_str();
  replicate->add_option("--spurious", noise.p_spurious)->capture_default_str();
  replicate->add_option("--sentences", wf.spec.sentences)->capture_default_str();
  replicate->add_option("--lexicon", wf.spec.lexicon_size)->capture_default_str();
  replicate->add_option("--min-freq", min_freq)->capture_default_str();
  replicate->add_option("--out", out_path, "report file");
  tf.add(replicate);

  // audit
  double confidence = 0.95, margin = 0.05;
  std::optional<std::size_t> population;
  std::string a_path, b_path;
  std::size_t sample_n = 0;
  auto* audit = app.add_subcommand("audit", "annotation audit arithmetic");
  audit->require_subcommand(1);
  auto* sample_size_cmd = audit->add_subcommand("sample-size", "Cochran sample size");
  sample_size_cmd->add_option("--confidence", confidence)->capture_default_str();
  sample_size_cmd->add_option("--margin", margin)->capture_default_str();
  sample_size_cmd->add_option("--population", population);
  auto* kappa_cmd = audit->add_subcommand("kappa", "Cohen's kappa over token labels");
  kappa_cmd->add_option("--a", a_path)->required();
  kappa_cmd->add_option("--b", b_path)->required();
  auto* dis_cmd = audit->add_subcommand("disagreement", "fraction of differing token labels");
  dis_cmd->add_option("--a", a_path)->required();
  dis_cmd->add_option("--b", b_path)->required();
  auto* draw_cmd = audit->add_subcommand("draw", "seeded audit sample of sentences");
  draw_cmd->add_option("--in", in_path)->required();
  draw_cmd->add_option("--n", sample_n)->required();
  draw_cmd->add_option("--seed", seed)->capture_default_str();
  draw_cmd->add_option("--out", out_path)->required();

  std::vector<std::string> args;
  if (!raw_args.empty() && raw_args[0].rfind("-", 0) != 0 && !app.get_subcommand_no_throw(raw_args[0])) {
    err << "error: unknown subcommand '" << raw_args[0] << "'\n\n" << app.help();
    return kExitUsage;
  }
  try {
    args = expand_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  auto emit = [&](const std::string& text) {
    out << text;
    if (!out_path.empty()) write_text(out_path, [&](std::ostream& f) { f << text; });
  };

  try {
    if (build->parsed()) return cmd_build_corpus(snapshot, pipeline, out_path, log_path, out);

    if (split->parsed()) {
      const auto f = parse_list<double>(fractions, "fraction");
      if (f.size() != 3) throw UsageError("--fractions needs three values");
      const auto corpus = load_corpus(in_path);
      SplitSizes sizes;
      const auto n = static_cast<double>(corpus.size());
      sizes.train = static_cast<std::size_t>(std::llround(f[0] * n));
      sizes.val = static_cast<std::size_t>(std::llround(f[1] * n));
      sizes.test = static_cast<std::size_t>(std::llround(f[2] * n));
      if (f[0] < 0 || f[1] < 0 || f[2] < 0 || sizes.train + sizes.val + sizes.test > corpus.size()) {
        throw UsageError("fractions must be nonnegative and sum to at most 1");
      }
      out << "seed: " << seed << '\n';
      const auto parts = stratified_split(corpus, sizes, seed);
      save_corpus(train_out, parts.train);
      save_corpus(val_out, parts.val);
      save_corpus(test_out, parts.test);
      out << "train " << parts.train.size() << ", val " << parts.val.size() << ", test "
          << parts.test.size() << '\n';
      return kExitOk;
    }

    if (inject->parsed()) {
      noise.validate();
      out << "seed: " << noise.seed << '\n';
      const auto clean = load_corpus(in_path);
      const auto noisy = inject_noise(clean, noise);
      save_corpus(out_path, noisy.corpus);
      if (!log_path.empty()) write_text(log_path, [&](std::ostream& f) { write_change_log(f, noisy.log); });
      out << "changes: " << noisy.log.changes.size() << '\n'
          << "token disagreement: " << label_disagreement(noisy.corpus, clean) << '\n';
      return kExitOk;
    }

    if (synth->parsed()) {
      out << "seed: " << seed << '\n';
      const auto corpus = gen_synthetic_corpus(sentences, lexicon, seed);
      save_corpus(out_path, corpus);
      out << "sentences: " << corpus.size() << ", spans: " << corpus_stats(corpus).spans << '\n';
      return kExitOk;
    }

    if (train->parsed()) {
      tf.config.validate();
      out << "seed: " << tf.config.seed << '\n';
      const auto train_corpus = load_corpus(train_path);
      const Corpus val_corpus = val_path.empty() ? Corpus{} : load_corpus(val_path);
      Vocab vocab;
      if (!vocab_path.empty() && fs::exists(resolve(vocab_path))) {
        std::ifstream vin(resolve(vocab_path));
        vocab = Vocab::load(vin);
      } else {
        vocab = build_vocab(train_corpus, min_freq);
        if (!vocab_path.empty()) write_text(vocab_path, [&](std::ostream& f) { vocab.save(f); });
      }
      const TrainData data{&vocab, &train_corpus, val_path.empty() ? nullptr : &val_corpus};
      TrainReport report;
      if (method == "coreg") {
        std::vector<TokenTagger> models;
        for (std::size_t m = 0; m < n_models; ++m) models.emplace_back(tf.tagger(vocab, m));
        report = train_co_reg(models, data, CoRegConfig{tf.config, n_models});
        models.front().save(resolve(out_path));
      } else {
        TokenTagger model(tf.tagger(vocab));
        report = method == "vanilla" ? train_vanilla(model, data, tf.config)
                                     : train_self_reg(model, data, tf.config);
        model.save(resolve(out_path));
      }
      report.write_table(out);
      if (!report_path.empty()) write_text(report_path, [&](std::ostream& f) { report.write(f); });
      return kExitOk;
    }

    if (eval->parsed()) {
      const auto gold = load_corpus(gold_path);
      Corpus pred;
      if (!model_path.empty()) {
        if (vocab_path.empty()) throw UsageError("--model needs --vocab");
        std::ifstream vin(resolve(vocab_path));
        if (!vin) throw DataError("cannot open vocab file " + vocab_path);
        const auto vocab = Vocab::load(vin);
        pred = predict_corpus(TokenTagger::load(resolve(model_path)), vocab, gold);
        if (!pred_out.empty()) save_corpus(pred_out, pred);
      } else if (!pred_path.empty()) {
        pred = load_corpus(pred_path);
      } else {
        throw UsageError("eval needs --pred or --model");
      }
      std::ostringstream text;
      print_tables(text, strict_span_prf(pred, gold));
      emit(text.str());
      return kExitOk;
    }

    if (ksweep->parsed()) {
      tf.config.validate();
      const auto ks = parse_list<std::size_t>(ks_text, "K");
      const auto seeds = parse_list<std::uint64_t>(seeds_text, "seed");
      out << "seeds: " << seeds_text << '\n';
      const auto w = wf.load(out);
      const auto sweep = k_sweep(w.train, w.val, w.test, w.vocab, tf.config, ks, seeds);
      emit(render_k_table(sweep.ks, sweep.rows));
      return kExitOk;
    }

    if (bench->parsed()) {
      tf.config.validate();
      out << "seed: " << tf.config.seed << '\n';
      const auto w = wf.load(out);
      emit(render_resource_table(run_bench(w, tf.config, default_bench_runs())));
      return kExitOk;
    }

    if (replicate->parsed()) {
      tf.config.validate();
      noise.validate();
      const auto seeds = parse_list<std::uint64_t>(replicate_seeds, "seed");
      out << "seeds: " << replicate_seeds << '\n';
      wf.spec.noise = noise;
      wf.spec.min_freq = min_freq;
      emit(render_replication(run_replication(wf.spec, seeds, tf.config)));
      return kExitOk;
    }

    if (sample_size_cmd->parsed()) {
      out << sample_size(confidence, margin, population) << '\n';
      return kExitOk;
    }
    if (kappa_cmd->parsed()) {
      out << cohen_kappa(load_corpus(a_path), load_corpus(b_path)) << '\n';
      return kExitOk;
    }
    if (dis_cmd->parsed()) {
      out << label_disagreement(load_corpus(a_path), load_corpus(b_path)) << '\n';
      return kExitOk;
    }
    if (draw_cmd->parsed()) {
      out << "seed: " << seed << '\n';
      const auto sample = draw_audit_sample(load_corpus(in_path), sample_n, seed);
      save_corpus(out_path, sample.corpus);
      out << "sentences: " << sample.corpus.size() << ", entity labels: " << sample.label_count << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what() << '\n';
    return kExitTraining;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace ser
