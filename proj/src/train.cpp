#include "ser/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "ser/eval.hpp"
#include "ser/random.hpp"

namespace ser {

namespace {

void check_shapes(const DistributionSet& dists) {
  if (dists.passes.empty()) throw DataError("distribution set has no passes");
  for (const auto& p : dists.passes) {
    if (p.rows() != dists.passes[0].rows() || p.cols() != dists.passes[0].cols()) {
      throw DataError("distribution passes differ in shape");
    }
  }
}

inline double clamped_log(double p) { return std::log(std::max(p, kProbClamp)); }

// Gradient of sum_t -log P[t, y_t] scaled by `scale`, in logit space.
void add_task_gradient(const Matrix& probs, std::span<const std::size_t> gold, double scale,
                       Matrix& dlogits) {
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    const auto y = static_cast<Eigen::Index>(gold[static_cast<std::size_t>(t)]);
    if (probs(t, y) < kProbClamp) continue;
    dlogits.row(t) = scale * probs.row(t);
    dlogits(t, y) -= scale;
  }
}

// Row-wise softmax backward: dZ = P * (g - <g, P>).
Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs) {
  Matrix out(probs.rows(), probs.cols());
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    const double dot = grad_probs.row(t).dot(probs.row(t));
    out.row(t) = probs.row(t).cwiseProduct(grad_probs.row(t).array().matrix() -
                                           Eigen::RowVectorXd::Constant(probs.cols(), dot));
  }
  return out;
}

void check_gold(std::span<const std::size_t> gold, const DistributionSet& dists) {
  if (gold.size() != dists.tokens()) throw DataError("gold labels do not match distribution rows");
  for (const auto y : gold) {
    if (y >= static_cast<std::size_t>(dists.passes[0].cols())) {
      throw DataError("gold label id " + std::to_string(y) + " outside label space");
    }
  }
}

}  // namespace

Matrix DistributionSet::average() const {
  if (passes.empty()) return {};
  Matrix sum = passes[0];
  for (std::size_t j = 1; j < passes.size(); ++j) sum += passes[j];
  return sum / static_cast<double>(passes.size());
}

LossValue divergence_loss(const DistributionSet& dists, bool symmetric) {
  check_shapes(dists);
  const Matrix avg = dists.average();
  const Matrix log_avg = avg.unaryExpr(&clamped_log);
  const double K = static_cast<double>(dists.passes.size());
  double sum = 0.0;
  for (const auto& p : dists.passes) {
    const Matrix log_p = p.unaryExpr(&clamped_log);
    double kl = (p.array() * (log_p - log_avg).array()).sum();
    if (symmetric) kl += 0.5 * (avg.array() * (log_avg - log_p).array()).sum();
    sum += kl;
  }
  sum /= K;
  const auto T = static_cast<double>(dists.tokens());
  return {sum, T > 0 ? sum / T : 0.0};
}

LossValue task_loss(const DistributionSet& dists, std::span<const std::size_t> gold) {
  check_shapes(dists);
  check_gold(gold, dists);
  double sum = 0.0;
  for (const auto& p : dists.passes) {
    for (Eigen::Index t = 0; t < p.rows(); ++t) {
      sum -= clamped_log(p(t, static_cast<Eigen::Index>(gold[static_cast<std::size_t>(t)])));
    }
  }
  sum /= static_cast<double>(dists.passes.size());
  const auto T = static_cast<double>(dists.tokens());
  return {sum, T > 0 ? sum / T : 0.0};
}

ObjectiveTerms objective(const DistributionSet& dists, std::span<const std::size_t> gold,
                         double alpha, bool symmetric, double task_scale) {
  check_shapes(dists);
  check_gold(gold, dists);
  const std::size_t K = dists.passes.size();
  const double T = static_cast<double>(dists.tokens());
  ObjectiveTerms out;
  out.task = task_scale * task_loss(dists, gold).mean;
  out.kl = divergence_loss(dists, symmetric).mean;
  out.total = agreement_loss(out.task, out.kl, alpha);
  if (T == 0) {
    for (const auto& p : dists.passes) out.dlogits.push_back(Matrix::Zero(p.rows(), p.cols()));
    return out;
  }

  const double scale = task_scale / (static_cast<double>(K) * T);
  const Matrix avg = dists.average();
  const Matrix log_avg = avg.unaryExpr(&clamped_log);
  const Matrix avg_live = avg.unaryExpr([](double m) { return m >= kProbClamp ? 1.0 : 0.0; });
  Matrix sum_log_p;
  std::vector<Matrix> log_ps;
  for (const auto& p : dists.passes) log_ps.push_back(p.unaryExpr(&clamped_log));
  if (symmetric) {
    sum_log_p = log_ps[0];
    for (std::size_t j = 1; j < K; ++j) sum_log_p += log_ps[j];
  }

  const double kl_scale = 1.0 / (static_cast<double>(K) * T);
  for (std::size_t j = 0; j < K; ++j) {
    const auto& p = dists.passes[j];
    Matrix d = Matrix::Zero(p.rows(), p.cols());
    add_task_gradient(p, gold, scale, d);

    const Matrix p_live = p.unaryExpr([](double v) { return v >= kProbClamp ? 1.0 : 0.0; });
    Matrix g = kl_scale * (log_ps[j] - log_avg + p_live - avg_live);
    if (symmetric) {
      // d/dP_j of (1/2K) sum_i KL(avg || P_i): direct term plus the path via avg.
      const Matrix ratio = (avg.array() / p.array().max(kProbClamp)).matrix().cwiseProduct(p_live);
      g += 0.5 * kl_scale *
           (-ratio + (static_cast<double>(K) * (log_avg + avg_live) - sum_log_p) /
                         static_cast<double>(K));
    }
    d += alpha * softmax_backward(p, g);
    out.dlogits.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (k < 1) throw UsageError("K must be at least 1");
  if (!(alpha >= 0.0)) throw UsageError("alpha must be nonnegative");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw UsageError("warmup fraction must lie in [0, 1)");
  }
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (epochs == 0) throw UsageError("epochs must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
}

std::size_t TrainConfig::total_steps(std::size_t n_train) const {
  return epochs * ((n_train + batch_size - 1) / batch_size);
}

std::size_t TrainConfig::warmup_steps(std::size_t n_train) const {
  const double w = warmup_fraction * static_cast<double>(total_steps(n_train));
  // Guard against 0.1 * 200 landing a hair above 20.
  return static_cast<std::size_t>(std::ceil(w - 1e-9));
}

TrainConfig full_scale_train_config() {
  TrainConfig c;
  c.learning_rate = 1e-5;
  c.epochs = 30;
  return c;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : m_(Vector::Zero(static_cast<Eigen::Index>(n))),
      v_(Vector::Zero(static_cast<Eigen::Index>(n))),
      lr_(lr),
      b1_(beta1),
      b2_(beta2),
      eps_(eps) {}

void Adam::step(Vector& params, const Vector& grad) {
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

std::uint64_t pass_seed(std::uint64_t seed, std::size_t step, std::size_t pass, std::size_t idx) {
  return derive_seed({seed, 0x9a55, step, pass, idx});
}

void TrainReport::write(std::ostream& out) const {
  out << std::setprecision(10);
  out << "method " << method << '\n' << "seed " << seed << '\n' << "models " << models << '\n';
  out << "epochs " << epochs.size() << '\n';
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const auto& r = epochs[e];
    out << "epoch." << e + 1 << ".task " << r.task << '\n'
        << "epoch." << e + 1 << ".kl " << r.kl << '\n'
        << "epoch." << e + 1 << ".agree " << r.agree << '\n'
        << "epoch." << e + 1 << ".val_micro_f1 " << r.val_micro_f1 << '\n';
  }
  out << "best_epoch " << best_epoch << '\n'
      << "best_val_micro_f1 " << best_val_micro_f1 << '\n'
      << "wall_seconds " << wall_seconds << '\n'
      << "peak_rss_bytes " << peak_rss_bytes << '\n'
      << "parameter_bytes " << parameter_bytes << '\n'
      << "optimizer_bytes " << optimizer_bytes << '\n';
}

void TrainReport::write_table(std::ostream& out) const {
  out << "method " << method << "  seed " << seed << '\n';
  out << std::left << std::setw(7) << "epoch" << std::right << std::setw(10) << "L_task"
      << std::setw(10) << "L_kl" << std::setw(10) << "L_agree" << std::setw(10) << "val F1" << '\n';
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const auto& r = epochs[e];
    out << std::left << std::setw(7) << e + 1 << std::right << std::fixed << std::setprecision(4)
        << std::setw(10) << r.task << std::setw(10) << r.kl << std::setw(10) << r.agree
        << std::setw(10) << format_pct(r.val_micro_f1) << '\n';
  }
  out.unsetf(std::ios::floatfield);
  out << "best epoch " << best_epoch << " (val F1 " << format_pct(best_val_micro_f1) << ")\n"
      << "wall-clock " << std::fixed << std::setprecision(2) << wall_seconds << " s, peak RSS "
      << peak_rss_bytes / 1024 << " KiB, parameters " << parameter_bytes / 1024
      << " KiB, optimizer " << optimizer_bytes / 1024 << " KiB\n";
  out.unsetf(std::ios::floatfield);
}

std::size_t peak_rss_bytes() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream ss(line.substr(6));
      std::size_t kb = 0;
      ss >> kb;
      return kb * 1024;
    }
  }
  return 0;
}

bool reset_peak_rss() {
  std::ofstream out("/proc/self/clear_refs");
  if (!out) return false;
  out << "5";
  out.flush();
  return static_cast<bool>(out);
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

struct Prepared {
  std::vector<std::vector<std::size_t>> ids;
  std::vector<std::vector<std::size_t>> gold;
};

Prepared prepare(const Vocab& vocab, const Corpus& corpus) {
  Prepared p;
  for (const auto& s : corpus.sentences) {
    p.ids.push_back(vocab.encode(s));
    std::vector<std::size_t> g;
    for (const auto& l : s.labels) g.push_back(l.id());
    p.gold.push_back(std::move(g));
  }
  return p;
}

double val_f1(const TokenTagger& model, const TrainData& data) {
  if (!data.val || data.val->size() == 0) return 0.0;
  return strict_span_prf(predict_corpus(model, *data.vocab, *data.val), *data.val).micro.f1;
}

void check_data(const TrainData& data, const TokenTagger& model) {
  if (!data.vocab || !data.train) throw UsageError("training needs a vocabulary and a train corpus");
  if (data.train->size() == 0) throw DataError("train corpus is empty");
  if (data.vocab->size() != model.config().vocab_size) {
    throw UsageError("model vocabulary size " + std::to_string(model.config().vocab_size) +
                     " does not match vocab of " + std::to_string(data.vocab->size()));
  }
  if (model.config().num_labels != kNumLabels) throw UsageError("model must use the 25-label space");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed({seed, 0xe90c, epoch}));
  shuffle_in_place(order, rng);
  return order;
}

struct StepBatch {
  Batch batch;
  std::vector<std::size_t> indices;
  std::vector<std::size_t> gold;
};

StepBatch make_batch(const Prepared& data, const std::vector<std::size_t>& order, std::size_t b,
                     std::size_t batch_size) {
  StepBatch sb;
  const std::size_t end = std::min(order.size(), (b + 1) * batch_size);
  for (std::size_t i = b * batch_size; i < end; ++i) {
    sb.indices.push_back(order[i]);
    sb.batch.sentences.push_back(data.ids[order[i]]);
    sb.gold.insert(sb.gold.end(), data.gold[order[i]].begin(), data.gold[order[i]].end());
  }
  return sb;
}

std::vector<std::uint64_t> seeds_for(const StepBatch& sb, std::uint64_t seed, std::size_t step,
                                     std::size_t pass) {
  std::vector<std::uint64_t> out;
  for (const auto idx : sb.indices) out.push_back(pass_seed(seed, step, pass, idx));
  return out;
}

void check_finite(const ObjectiveTerms& terms, std::size_t step, std::size_t epoch, std::size_t b) {
  if (!std::isfinite(terms.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << step << " (epoch " << epoch + 1 << ", batch " << b
        << "): task " << terms.task << ", kl " << terms.kl;
    throw TrainingError(msg.str());
  }
}

}  // namespace

TrainReport train_self_reg(TokenTagger& model, const TrainData& data, const TrainConfig& config,
                           const StepObserver& observer) {
  config.validate();
  check_data(data, model);
  const auto prepared = prepare(*data.vocab, *data.train);
  const std::size_t n = data.train->size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t warmup = config.warmup_steps(n);

  TrainReport report;
  report.method = "selfreg";
  report.seed = config.seed;
  Adam adam(model.parameter_count(), config.learning_rate, config.beta1, config.beta2, config.adam_eps);
  Vector best = model.parameters();
  report.best_val_micro_f1 = -1.0;
  std::vector<ForwardCache> caches(config.k);
  Vector grad(model.parameters().size());

  const auto start = Clock::now();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(n, config.seed, epoch);
    EpochRecord rec;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      ++step;
      const bool warming = step <= warmup;
      const std::size_t passes = warming && config.single_pass_warmup ? 1 : config.k;
      const auto sb = make_batch(prepared, order, b, config.batch_size);
      DistributionSet dists;
      for (std::size_t j = 0; j < passes; ++j) {
        model.forward(sb.batch, true, seeds_for(sb, config.seed, step, j), caches[j]);
        dists.passes.push_back(caches[j].probs);
      }
      const auto terms = objective(dists, sb.gold, warming ? 0.0 : config.alpha, config.symmetric);
      check_finite(terms, step, epoch, b);
      grad.setZero();
      for (std::size_t j = 0; j < passes; ++j) model.backward(caches[j], terms.dlogits[j], grad);
      adam.step(model.parameters(), grad);
      if (observer) observer(step, terms);
      rec.task += terms.task;
      rec.kl += terms.kl;
      rec.agree += terms.total;
    }
    rec.task /= static_cast<double>(per_epoch);
    rec.kl /= static_cast<double>(per_epoch);
    rec.agree /= static_cast<double>(per_epoch);
    rec.val_micro_f1 = val_f1(model, data);
    if (rec.val_micro_f1 > report.best_val_micro_f1) {
      report.best_val_micro_f1 = rec.val_micro_f1;
      report.best_epoch = epoch + 1;
      best = model.parameters();
    }
    report.epochs.push_back(rec);
  }
  model.parameters() = best;
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  report.peak_rss_bytes = peak_rss_bytes();
  report.parameter_bytes = model.parameter_bytes();
  report.optimizer_bytes = adam.state_bytes();
  return report;
}

TrainReport train_vanilla(TokenTagger& model, const TrainData& data, const TrainConfig& config,
                          const StepObserver& observer) {
  config.validate();
  check_data(data, model);
  const auto prepared = prepare(*data.vocab, *data.train);
  const std::size_t n = data.train->size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;

  TrainReport report;
  report.method = "vanilla";
  report.seed = config.seed;
  Adam adam(model.parameter_count(), config.learning_rate, config.beta1, config.beta2, config.adam_eps);
  Vector best = model.parameters();
  report.best_val_micro_f1 = -1.0;
  ForwardCache cache;
  Vector grad(model.parameters().size());

  const auto start = Clock::now();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(n, config.seed, epoch);
    EpochRecord rec;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      ++step;
      const auto sb = make_batch(prepared, order, b, config.batch_size);
      model.forward(sb.batch, true, seeds_for(sb, config.seed, step, 0), cache);
      const auto& p = cache.probs;
      ObjectiveTerms terms;
      double loss = 0.0;
      for (Eigen::Index t = 0; t < p.rows(); ++t) {
        loss -= std::log(std::max(p(t, static_cast<Eigen::Index>(sb.gold[static_cast<std::size_t>(t)])),
                                  kProbClamp));
      }
      terms.task = terms.total = loss / static_cast<double>(p.rows());
      check_finite(terms, step, epoch, b);
      Matrix d = Matrix::Zero(p.rows(), p.cols());
      add_task_gradient(p, sb.gold, 1.0 / (1.0 * static_cast<double>(p.rows())), d);
      grad.setZero();
      model.backward(cache, d, grad);
      adam.step(model.parameters(), grad);
      if (observer) {
        terms.dlogits.push_back(std::move(d));
        observer(step, terms);
      }
      rec.task += terms.task;
      rec.agree += terms.total;
    }
    rec.task /= static_cast<double>(per_epoch);
    rec.agree /= static_cast<double>(per_epoch);
    rec.val_micro_f1 = val_f1(model, data);
    if (rec.val_micro_f1 > report.best_val_micro_f1) {
      report.best_val_micro_f1 = rec.val_micro_f1;
      report.best_epoch = epoch + 1;
      best = model.parameters();
    }
    report.epochs.push_back(rec);
  }
  model.parameters() = best;
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  report.peak_rss_bytes = peak_rss_bytes();
  report.parameter_bytes = model.parameter_bytes();
  report.optimizer_bytes = adam.state_bytes();
  return report;
}

TrainReport train_co_reg(std::vector<TokenTagger>& models, const TrainData& data,
                         const CoRegConfig& config, const StepObserver& observer) {
  const auto& tc = config.train;
  tc.validate();
  if (config.n_models < 2 || models.size() != config.n_models) {
    throw UsageError("co-regularization needs N >= 2 models (got " + std::to_string(models.size()) + ")");
  }
  for (const auto& m : models) {
    check_data(data, m);
    auto a = m.config();
    auto b = models[0].config();
    a.init_seed = b.init_seed = 0;
    if (!(a == b)) throw UsageError("co-regularized models must share an architecture");
  }
  const std::size_t N = models.size();
  const auto prepared = prepare(*data.vocab, *data.train);
  const std::size_t n = data.train->size();
  const std::size_t per_epoch = (n + tc.batch_size - 1) / tc.batch_size;
  const std::size_t warmup = tc.warmup_steps(n);

  TrainReport report;
  report.method = "coreg";
  report.seed = tc.seed;
  report.models = N;
  std::vector<Adam> adams;
  std::vector<Vector> best;
  std::vector<Vector> grads;
  for (auto& m : models) {
    adams.emplace_back(m.parameter_count(), tc.learning_rate, tc.beta1, tc.beta2, tc.adam_eps);
    best.push_back(m.parameters());
    grads.emplace_back(m.parameters().size());
  }
  std::vector<double> best_f1(N, -1.0);
  std::vector<std::size_t> best_epoch(N, 0);
  std::vector<ForwardCache> caches(N);

  const auto start = Clock::now();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto order = epoch_order(n, tc.seed, epoch);
    EpochRecord rec;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      ++step;
      const bool warming = step <= warmup;
      const auto sb = make_batch(prepared, order, b, tc.batch_size);
      DistributionSet dists;
      for (std::size_t m = 0; m < N; ++m) {
        // Dropout streams follow the model's init seed, so identical models
        // see identical masks.
        const auto stream = derive_seed({tc.seed, models[m].config().init_seed});
        models[m].forward(sb.batch, true, seeds_for(sb, stream, step, 0), caches[m]);
        dists.passes.push_back(caches[m].probs);
      }
      const auto terms = objective(dists, sb.gold, warming ? 0.0 : tc.alpha, tc.symmetric,
                                   static_cast<double>(N));
      check_finite(terms, step, epoch, b);
      for (std::size_t m = 0; m < N; ++m) {
        grads[m].setZero();
        models[m].backward(caches[m], terms.dlogits[m], grads[m]);
        adams[m].step(models[m].parameters(), grads[m]);
      }
      if (observer) observer(step, terms);
      rec.task += terms.task;
      rec.kl += terms.kl;
      rec.agree += terms.total;
    }
    rec.task /= static_cast<double>(per_epoch);
    rec.kl /= static_cast<double>(per_epoch);
    rec.agree /= static_cast<double>(per_epoch);
    rec.val_micro_f1 = -1.0;
    for (std::size_t m = 0; m < N; ++m) {
      const double f1 = val_f1(models[m], data);
      rec.val_micro_f1 = std::max(rec.val_micro_f1, f1);
      if (f1 > best_f1[m]) {
        best_f1[m] = f1;
        best_epoch[m] = epoch + 1;
        best[m] = models[m].parameters();
      }
    }
    report.epochs.push_back(rec);
  }
  std::size_t winner = 0;
  for (std::size_t m = 1; m < N; ++m) {
    if (best_f1[m] > best_f1[winner]) winner = m;
  }
  for (std::size_t m = 0; m < N; ++m) models[m].parameters() = best[m];
  std::swap(models[0], models[winner]);
  report.best_val_micro_f1 = best_f1[winner];
  report.best_epoch = best_epoch[winner];
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  report.peak_rss_bytes = peak_rss_bytes();
  for (std::size_t m = 0; m < N; ++m) {
    report.parameter_bytes += models[m].parameter_bytes();
    report.optimizer_bytes += adams[m].state_bytes();
  }
  return report;
}

}  // namespace ser
