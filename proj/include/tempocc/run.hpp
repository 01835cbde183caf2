#pragma once

// Run orchestration behind the command-line tool: dataset resolution, run
// directories, artifacts, ablation grids and the raw k-means baseline.
//
// Run directory layout: <root>/<dataset>/<config-hash>/<seed>/ holding
// checkpoint.bin, history.csv, metrics.json and manifest.json.

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tempocc/config.hpp"
#include "tempocc/dataset.hpp"
#include "tempocc/metrics.hpp"
#include "tempocc/spectral.hpp"
#include "tempocc/trainer.hpp"

namespace tempocc::run {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// First 16 hex digits of the SHA-256 of `text`.
inline std::string digest(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < 8 && i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

/// Stable digest of the resolved configuration (seed excluded).
inline std::string config_hash(const Config& cfg) { return digest(cfg.canonical()); }

inline fs::path runs_root() {
  if (const char* env = std::getenv("TEMPOCC_RUNS_DIR"); env && *env) return env;
  return "runs";
}

inline fs::path ucr_root() {
  if (const char* env = std::getenv("TEMPOCC_UCR_DIR"); env && *env) return env;
  return "data/UCR";
}

inline Delimiter parse_delimiter(const std::string& s) {
  if (s == "auto") return Delimiter::Auto;
  if (s == "tab") return Delimiter::Tab;
  if (s == "comma") return Delimiter::Comma;
  throw ConfigError("unknown delimiter '" + s + "'");
}

/// Resolves the dataset named by the config: explicit paths, the synthetic
/// generator, or <UCR root>/<name>/<name>_{TRAIN,TEST}.tsv.
inline TimeSeriesDataset load_dataset(const Config& cfg) {
  const std::string name = cfg.get("dataset");
  const std::string split = cfg.get("split");
  if (split != "train" && split != "test" && split != "merged")
    throw ConfigError("split must be train, test or merged, got '" + split + "'");
  const Delimiter delim = parse_delimiter(cfg.get("delimiter"));
  TimeSeriesDataset d;
  std::string train_path = cfg.get("train_path"), test_path = cfg.get("test_path");
  if (train_path.empty() && test_path.empty()) {
    if (name == "synth_two_cluster") {
      d = synth_two_cluster(cfg.get_uint("synth_n_per"), cfg.get_uint("synth_length"), cfg.get_uint("synth_seed"));
    } else {
      const fs::path dir = ucr_root() / name;
      train_path = (dir / (name + "_TRAIN.tsv")).string();
      test_path = (dir / (name + "_TEST.tsv")).string();
      if (!fs::exists(train_path) && !fs::exists(test_path))
        throw ConfigError("dataset '" + name + "' not found under " + dir.string());
    }
  }
  if (!train_path.empty() || !test_path.empty()) {
    TimeSeriesDataset train, test;
    if (split != "test" && !train_path.empty()) train = load_ucr(train_path, delim);
    if (split != "train" && !test_path.empty()) test = load_ucr(test_path, delim);
    d = merge(train, test);
    if (d.empty()) throw ConfigError("split '" + split + "' selects no data");
  }
  d.name = name;
  if (cfg.get_bool("znormalize")) d = znormalize(d);
  return d;
}

inline std::string timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json config_json(const Config& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.values()) j[k] = v;
  return j;
}

inline Config config_from_json(const json& j) {
  Config cfg;
  for (const auto& [k, v] : j.items()) cfg.set(k, v.get<std::string>());
  return cfg;
}

/// Report shared by train, evaluate and baseline.
inline json metrics_report(const std::string& dataset, std::uint64_t seed, double nmi_value, double ri_value,
                           const std::string& hash) {
  json j;
  j["dataset"] = dataset;
  j["seed"] = seed;
  j["nmi"] = nmi_value;
  j["ri"] = ri_value;
  j["config-hash"] = hash;
  return j;
}

inline void write_labels_csv(const fs::path& path, const std::vector<int>& pred, const std::vector<int>& truth) {
  std::ostringstream os;
  os << "sample_index,predicted_label,true_label\n";
  for (std::size_t i = 0; i < pred.size(); ++i) os << i << ',' << pred[i] << ',' << truth[i] << '\n';
  write_text(path, os.str());
}

struct RunOutcome {
  fs::path dir;
  std::string hash;
  double nmi = 0.0;
  double ri = 0.0;
  std::vector<LossBreakdown> history;
};

/// Trains one configuration for one seed and writes the run directory.
inline RunOutcome train_run(Config cfg, std::uint64_t seed, const std::vector<std::string>& overrides,
                            const std::string& command, const fs::path& root, std::ostream* log = nullptr) {
  cfg.set("seed", std::to_string(seed));
  const std::string started = timestamp();
  TrainConfig tc = cfg.train_config();
  TimeSeriesDataset data = load_dataset(cfg);
  RunOutcome out;
  out.hash = config_hash(cfg);
  out.dir = root / data.name / out.hash / std::to_string(seed);
  fs::create_directories(out.dir);

  TrainResult result = train(data, tc, [&](std::size_t epoch, const LossBreakdown& b) {
    if (log && (epoch == 1 || epoch % 25 == 0 || epoch == tc.epochs))
      *log << "[" << data.name << " seed " << seed << "] epoch " << epoch << " total " << b.total << '\n';
  });
  Evaluation ev = evaluate(result.params, result.indicator, data, tc.labels_from, result.k, tc.kmeans_restarts, seed);
  out.nmi = ev.nmi;
  out.ri = ev.ri;
  out.history = result.history;

  save_checkpoint((out.dir / "checkpoint.bin").string(), to_named_arrays(result));
  std::ostringstream hist;
  write_history_csv(hist, result.history);
  write_text(out.dir / "history.csv", hist.str());
  json metrics = metrics_report(data.name, seed, ev.nmi, ev.ri, out.hash);
  metrics["labels_from"] = to_string(tc.labels_from);
  metrics["k"] = result.k;
  metrics["epochs"] = tc.epochs;
  metrics["final_total_loss"] = result.history.empty() ? 0.0 : result.history.back().total;
  write_text(out.dir / "metrics.json", metrics.dump(2) + "\n");

  json manifest;
  manifest["command"] = command;
  manifest["config_hash"] = out.hash;
  manifest["dataset"] = data.name;
  manifest["seed"] = seed;
  manifest["overrides"] = overrides;
  manifest["config"] = config_json(cfg);
  manifest["provenance"] = data.provenance;
  manifest["started_at"] = started;
  manifest["finished_at"] = timestamp();
  manifest["artifacts"] = {"checkpoint.bin", "history.csv", "metrics.json", "manifest.json"};
  write_text(out.dir / "manifest.json", manifest.dump(2) + "\n");
  return out;
}

/// Re-evaluates a finished run from its manifest and checkpoint. Writes
/// evaluation.json and labels.csv into the run directory.
inline json evaluate_run(const fs::path& dir, std::optional<LabelMode> mode = std::nullopt) {
  json manifest = json::parse(read_text(dir / "manifest.json"));
  Config cfg = config_from_json(manifest["config"]);
  TrainConfig tc = cfg.train_config();
  TimeSeriesDataset data = load_dataset(cfg);
  TrainResult r = from_named_arrays(tc.model, load_checkpoint((dir / "checkpoint.bin").string()));
  const LabelMode used = mode.value_or(tc.labels_from);
  Evaluation ev = evaluate(r.params, r.indicator, data, used, r.k, tc.kmeans_restarts, tc.seed);
  json report = metrics_report(data.name, tc.seed, ev.nmi, ev.ri, config_hash(cfg));
  report["labels_from"] = to_string(used);
  if (ev.empty_cluster) report["warning"] = "argmax readout left at least one cluster empty";
  write_text(dir / "evaluation.json", report.dump(2) + "\n");
  write_labels_csv(dir / "labels.csv", ev.labels, data.labels);
  return report;
}

/// Runs `tasks` on up to `jobs` worker threads; each task is independent.
inline void run_parallel(std::size_t jobs, const std::vector<std::function<void()>>& tasks) {
  jobs = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
  if (jobs == 1) {
    for (const auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < tasks.size(); i = next++) {
        try {
          tasks[i]();
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

enum class AblationGrid { ContrastiveLosses, ClusterDistribution };

inline AblationGrid parse_grid(const std::string& s) {
  if (s == "icl-ccl" || s == "contrastive") return AblationGrid::ContrastiveLosses;
  if (s == "cd" || s == "cd-org-aug") return AblationGrid::ClusterDistribution;
  throw ConfigError("unknown ablation grid '" + s + "' (expected icl-ccl or cd)");
}

struct AblationRow {
  std::string dataset;
  bool first = false, second = false;  ///< ICL/CCL or cd-org/cd-aug
  std::string toggles;
  double nmi_mean = 0.0, ri_mean = 0.0;
  std::vector<std::uint64_t> seeds;
};

/// The four toggle rows in table order: (✗,✓), (✓,✗), (✗,✗), (✓,✓).
inline std::vector<std::pair<bool, bool>> ablation_rows() { return {{false, true}, {true, false}, {false, false}, {true, true}}; }

inline std::vector<AblationRow> run_ablation(const Config& base, AblationGrid grid, const std::vector<std::uint64_t>& seeds,
                                             std::size_t jobs, const fs::path& root, std::ostream* log = nullptr) {
  const char* k1 = grid == AblationGrid::ContrastiveLosses ? "use_instance" : "use_cd_org";
  const char* k2 = grid == AblationGrid::ContrastiveLosses ? "use_cluster" : "use_cd_aug";
  const char* n1 = grid == AblationGrid::ContrastiveLosses ? "ICL" : "cd-org";
  const char* n2 = grid == AblationGrid::ContrastiveLosses ? "CCL" : "cd-aug";
  auto rows_spec = ablation_rows();
  std::vector<AblationRow> rows(rows_spec.size());
  std::vector<std::vector<RunOutcome>> outcomes(rows_spec.size(), std::vector<RunOutcome>(seeds.size()));
  std::vector<std::function<void()>> tasks;
  std::mutex log_mu;
  for (std::size_t r = 0; r < rows_spec.size(); ++r) {
    Config cfg = base;
    cfg.set(k1, rows_spec[r].first ? "true" : "false");
    cfg.set(k2, rows_spec[r].second ? "true" : "false");
    rows[r].first = rows_spec[r].first;
    rows[r].second = rows_spec[r].second;
    rows[r].toggles = std::string(n1) + (rows[r].first ? "=on" : "=off") + " " + n2 + (rows[r].second ? "=on" : "=off");
    rows[r].seeds = seeds;
    for (std::size_t s = 0; s < seeds.size(); ++s)
      tasks.push_back([&, cfg, r, s] {
        std::vector<std::string> overrides = {std::string(k1) + "=" + cfg.get(k1), std::string(k2) + "=" + cfg.get(k2)};
        outcomes[r][s] = train_run(cfg, seeds[s], overrides, "ablate", root);
        if (log) {
          std::lock_guard<std::mutex> lock(log_mu);
          *log << rows[r].toggles << " seed " << seeds[s] << ": nmi " << outcomes[r][s].nmi << " ri "
               << outcomes[r][s].ri << '\n';
        }
      });
  }
  run_parallel(jobs, tasks);
  const std::string dataset = load_dataset(base).name;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r].dataset = dataset;
    for (const auto& o : outcomes[r]) {
      rows[r].nmi_mean += o.nmi / static_cast<double>(seeds.size());
      rows[r].ri_mean += o.ri / static_cast<double>(seeds.size());
    }
  }
  return rows;
}

inline std::string seeds_string(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? ";" : "") + std::to_string(seeds[i]);
  return s;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "dataset,toggles,nmi_mean,ri_mean,seeds\n";
  for (const auto& r : rows)
    os << r.dataset << ',' << r.toggles << ',' << std::setprecision(6) << std::fixed << r.nmi_mean << ','
       << r.ri_mean << ',' << seeds_string(r.seeds) << '\n';
  return os.str();
}

/// Plain-text table with one ✓/✗ column per toggled loss.
inline std::string ablation_text(const std::vector<AblationRow>& rows, AblationGrid grid) {
  const bool icl = grid == AblationGrid::ContrastiveLosses;
  std::ostringstream os;
  os << std::left << std::setw(24) << "Dataset" << std::setw(8) << (icl ? "ICL" : "cd-org") << std::setw(8)
     << (icl ? "CCL" : "cd-aug") << std::setw(10) << "NMI" << std::setw(10) << "RI" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << r.dataset << std::setw(10) << (r.first ? "✓" : "✗") << std::setw(10)
       << (r.second ? "✓" : "✗") << std::fixed << std::setprecision(4) << std::setw(10) << r.nmi_mean
       << std::setw(10) << r.ri_mean << '\n';
  }
  return os.str();
}

/// k-means on the raw series, one report per seed.
inline std::vector<json> run_baseline(const Config& cfg, std::size_t k, std::size_t restarts,
                                      const std::vector<std::uint64_t>& seeds) {
  TimeSeriesDataset data = load_dataset(cfg);
  if (k == 0) k = data.k_true();
  if (k > data.size())
    throw ConfigError("k=" + std::to_string(k) + " exceeds the number of series (" + std::to_string(data.size()) + ")");
  const std::string hash = digest(cfg.canonical({"seed"}) + "baseline=kmeans\nk=" + std::to_string(k) +
                                  "\nrestarts=" + std::to_string(restarts) + "\n");
  std::vector<json> reports;
  for (auto seed : seeds) {
    auto res = kmeans(data.series, k, seed, restarts);
    json j = metrics_report(data.name, seed, nmi(res.labels, data.labels), rand_index(res.labels, data.labels), hash);
    j["method"] = "kmeans";
    j["k"] = k;
    reports.push_back(std::move(j));
  }
  return reports;
}

}  // namespace tempocc::run
