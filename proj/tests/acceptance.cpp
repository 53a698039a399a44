#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>

#include "gradcheck.hpp"
#include "ser/cli.hpp"
#include "ser/corpus.hpp"
#include "ser/eval.hpp"
#include "ser/experiment.hpp"
#include "ser/iob.hpp"
#include "ser/noise.hpp"
#include "ser/spanlabel.hpp"
#include "ser/train.hpp"
#include "ser/wiki.hpp"

using namespace ser;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix row2(double a, double b) {
  Matrix m(1, 2);
  m << a, b;
  return m;
}

Outcome loss_identities() {
  Outcome o;
  Rng rng(derive_seed({1, 1}));
  for (int trial = 0; trial < 50; ++trial) {
    Matrix p(9, 25);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = 1e-3 + uniform01(rng);
      p.row(r) /= p.row(r).sum();
    }
    Matrix q = p;
    q.row(0) = p.row(0).reverse();
    const std::size_t k = 1 + uniform_index(rng, 4);
    const DistributionSet same{std::vector<Matrix>(k, p)};
    if (!(std::abs(divergence_loss(same).mean) < 1e-9)) o.pass = false;
    if (divergence_loss(DistributionSet{{q}}).mean != 0.0) o.pass = false;
    std::vector<std::size_t> gold(9);
    for (auto& g : gold) g = uniform_index(rng, 25);
    const DistributionSet mixed{{p, q}};
    const double task = task_loss(mixed, gold).mean;
    if (agreement_loss(task, divergence_loss(mixed).mean, 0.0) != task) o.pass = false;
    if (objective(mixed, gold, 0.0, false).total != task) o.pass = false;
  }
  o.detail = "identical passes, K=1 and alpha=0 over 50 random sets";
  return o;
}

Outcome hand_values() {
  const double kl = divergence_loss(DistributionSet{{row2(0.9, 0.1), row2(0.7, 0.3)}}).mean;
  const std::vector<std::size_t> gold = {0};
  const double task = task_loss(DistributionSet{{row2(0.5, 0.5), row2(0.25, 0.75)}}, gold).mean;
  Outcome o;
  o.pass = std::abs(kl - 0.032429) < 1e-5 && std::abs(task - 1.039721) < 1e-5;
  o.detail = "L_kl " + fmt("%.6f", kl) + ", L_task " + fmt("%.6f", task);
  return o;
}

Outcome gradients() {
  double worst = 0.0;
  std::size_t params = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto task_case = ser::testing::make_gradcheck_case(1, seed);
    const auto agree_case = ser::testing::make_gradcheck_case(3, seed);
    params = task_case.model.parameter_count();
    worst = std::max(worst, ser::testing::max_relative_error(task_case, 0.0, false, 20, seed));
    worst = std::max(worst, ser::testing::max_relative_error(agree_case, 10.0, false, 20, seed));
  }
  Outcome o;
  o.pass = params <= 1000 && worst < 1e-4;
  o.detail = std::to_string(params) + " parameters, max relative error " + fmt("%.2e", worst);
  return o;
}

// Spans drawn directly, so they are their own oracle.
std::vector<Span> random_spans(Rng& rng, std::size_t n) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < n) {
    if (uniform01(rng) < 0.3) {
      const std::size_t len = 1 + uniform_index(rng, std::min<std::size_t>(4, n - i));
      spans.push_back({i, i + len, static_cast<EntityType>(uniform_index(rng, kNumEntityTypes))});
      i += len + uniform_index(rng, 2);
    } else {
      ++i;
    }
  }
  return spans;
}

Outcome iob_and_metrics() {
  Rng rng(derive_seed({4, 4}));
  std::size_t round_trips = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = uniform_index(rng, 25);
    const auto spans = random_spans(rng, n);
    const auto labels = encode_iob(n, spans);
    if (validate_iob(labels).empty() && decode_spans(labels) == spans) ++round_trips;
  }
  std::size_t agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::vector<Span>> gold, pred;
    std::set<std::tuple<std::size_t, std::size_t, std::size_t, int>> g, p;
    const std::size_t sentences = 1 + uniform_index(rng, 5);
    for (std::size_t s = 0; s < sentences; ++s) {
      const std::size_t n = 1 + uniform_index(rng, 12);
      gold.push_back(random_spans(rng, n));
      pred.push_back(uniform01(rng) < 0.5 ? gold.back() : random_spans(rng, n));
      if (!pred.back().empty() && uniform01(rng) < 0.5) pred.back().erase(pred.back().begin());
      for (const auto& x : gold.back()) g.insert({s, x.start, x.end, static_cast<int>(x.type)});
      for (const auto& x : pred.back()) p.insert({s, x.start, x.end, static_cast<int>(x.type)});
    }
    std::size_t tp = 0;
    for (const auto& t : p) tp += g.count(t);
    const double prec = p.empty() ? (g.empty() ? 1.0 : 0.0) : static_cast<double>(tp) / static_cast<double>(p.size());
    const double rec = g.empty() ? (p.empty() ? 1.0 : 0.0) : static_cast<double>(tp) / static_cast<double>(g.size());
    const double f1 = prec + rec == 0.0 ? 0.0 : 2 * prec * rec / (prec + rec);
    const auto table = strict_span_prf(pred, gold);
    if (table.micro.true_positive == tp && table.micro.gold == g.size() &&
        table.micro.predicted == p.size() && std::abs(table.micro.f1 - f1) < 1e-12) {
      ++agree;
    }
  }
  Outcome o;
  o.pass = round_trips == 1000 && agree == 1000;
  o.detail = "round trips " + std::to_string(round_trips) + "/1000, metric agreement " +
             std::to_string(agree) + "/1000";
  return o;
}

const std::vector<std::uint64_t> kSeeds = {0, 1, 2, 3, 4};

Outcome replication() {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig config;
  config.k = 3;
  config.alpha = 10.0;
  config.warmup_fraction = 0.10;
  const auto r = run_replication(WorkloadSpec{}, kSeeds, config);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  std::cout << render_replication(r);
  bool band = true;
  for (const auto& row : r.rows) band = band && row.disagreement >= 0.08 && row.disagreement <= 0.20;
  Outcome o;
  o.pass = band && 100.0 * r.mean_delta() >= 0.5 && r.wins() >= 4 && minutes <= 20.0;
  o.detail = "delta " + fmt("%+.2f", 100.0 * r.mean_delta()) + " F1, ahead in " + std::to_string(r.wins()) +
             "/5 seeds, disagreement " + (band ? "in" : "outside") + " [8%, 20%], " + fmt("%.1f", minutes) +
             " min";
  return o;
}

Outcome resources() {
  const auto w = make_workload(WorkloadSpec{}, 0);
  const auto rows = run_bench(w, TrainConfig{}, default_bench_runs());
  std::cout << render_resource_table(rows);
  const auto& vanilla = rows[0];
  const auto& k2 = rows[1];
  const auto& k3 = rows[2];
  const auto& co = rows[3];
  const double mem_ratio = static_cast<double>(k2.peak_rss_bytes) / static_cast<double>(vanilla.peak_rss_bytes);
  Outcome o;
  o.pass = co.parameter_bytes == 2 * vanilla.parameter_bytes && mem_ratio <= 1.15 &&
           vanilla.wall_seconds < k2.wall_seconds && k2.wall_seconds < k3.wall_seconds &&
           co.peak_rss_bytes > k2.peak_rss_bytes;
  o.detail = "co-reg params " + fmt("%.1f", static_cast<double>(co.parameter_bytes) / vanilla.parameter_bytes) +
             "x, K=2 peak " + fmt("%.3f", mem_ratio) + "x vanilla, times " + fmt("%.1f", vanilla.wall_seconds) +
             " < " + fmt("%.1f", k2.wall_seconds) + " < " + fmt("%.1f", k3.wall_seconds) + " s";
  return o;
}

Outcome sampling() {
  const std::vector<std::size_t> a = {1, 1, 0, 0};
  const std::vector<std::size_t> b = {1, 0, 1, 0};
  const std::vector<std::size_t> c = {3, 0, 7, 7, 1};
  Outcome o;
  o.pass = sample_size(0.95, 0.05) == 385 && cohen_kappa(a, b) == 0.0 && cohen_kappa(c, c) == 1.0;
  o.detail = "n " + std::to_string(sample_size(0.95, 0.05)) + ", kappa " + fmt("%.1f", cohen_kappa(a, b)) +
             " and " + fmt("%.1f", cohen_kappa(c, c));
  return o;
}

Outcome pipeline() {
  const fs::path dir(SER_FIXTURE_DIR);
  const auto result = run_pipeline(read_snapshot(dir / "snapshot.jsonl"), PipelineConfig::load(dir / "pipeline.conf"));
  std::ostringstream built;
  write_conll(built, result.corpus);
  std::ifstream in(dir / "golden.conll", std::ios::binary);
  std::ostringstream golden;
  golden << in.rdbuf();
  const auto& chrome = result.inferred.at("ChromeOS");
  Outcome o;
  o.pass = built.str() == golden.str() && chrome.type == EntityType::kOperatingSystem && chrome.stage == 2;
  o.detail = std::string(built.str() == golden.str() ? "byte-identical" : "differs") + ", " +
             std::to_string(result.corpus.size()) + " sentences, ChromeOS " + std::string(to_string(chrome.type)) +
             " by stage " + std::to_string(chrome.stage);
  return o;
}

Outcome ksweep_and_render() {
  const auto report = fs::temp_directory_path() / "ser_acceptance_ksweep.txt";
  std::ostringstream out, err;
  const int code = run_cli({"ksweep", "--ks", "2,3,4", "--seeds", "0", "--out", report.string()}, out, err);
  std::ifstream in(report);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  std::cout << out.str();
  bool shaped = code == kExitOk && lines.size() == 3 && lines[0].find("# Forward Passes (K)") == 0;
  for (std::size_t i = 0; shaped && i < lines.size(); ++i) {
    // Label text, then exactly three numeric columns.
    std::istringstream ss(lines[i]);
    std::vector<std::string> words;
    for (std::string w; ss >> w;) words.push_back(w);
    std::vector<double> v;
    for (std::size_t j = words.size() >= 3 ? words.size() - 3 : 0; j < words.size(); ++j) {
      char* end = nullptr;
      v.push_back(std::strtod(words[j].c_str(), &end));
      shaped = shaped && *end == '\0';
    }
    shaped = shaped && v.size() == 3 && (i > 0 || (v[0] == 2 && v[1] == 3 && v[2] == 4));
  }
  PrfRow license, micro;
  license.precision = 0.866;
  license.recall = 0.909;
  license.f1 = 0.887;
  micro.precision = 0.738;
  micro.recall = 0.735;
  micro.f1 = 0.737;
  const bool rows = format_prf(license) == "86.6 90.9 88.7" && format_prf(micro) == "73.8 73.5 73.7";
  const auto k_row = render_k_table({2, 3, 4}, {{"Self-regularization", {0.707, 0.737, 0.738}}});
  const bool k_ok = k_row.find("70.7  73.7  73.8") != std::string::npos;
  Outcome o;
  o.pass = shaped && rows && k_ok;
  o.detail = std::string("K table ") + (shaped ? "well-formed" : "malformed") + ", example rows " +
             (rows && k_ok ? "match" : "differ");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"loss identities", loss_identities},
      {"hand-oracle loss values", hand_values},
      {"gradient check", gradients},
      {"IOB and metric oracles", iob_and_metrics},
      {"noisy synthetic replication", replication},
      {"resource directionality", resources},
      {"sampling arithmetic", sampling},
      {"pipeline golden file", pipeline},
      {"K-sweep and report rendering", ksweep_and_render},
  };
  std::vector<std::string> lines;
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    lines.push_back("criterion " + std::to_string(i + 1) + " " + (o.pass ? "PASS" : "FAIL") + ": " +
                    criteria[i].first + " (" + o.detail + ")");
    std::cout << lines.back() << std::endl;
  }
  std::cout << "\nsummary\n";
  for (const auto& l : lines) std::cout << l << '\n';
  return failed == 0 ? 0 : 1;
}
