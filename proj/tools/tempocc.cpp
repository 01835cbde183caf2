// tempocc: train, evaluate, ablate, baseline and synth commands.
//
// Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tempocc/run.hpp"

namespace {

using namespace tempocc;
namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> dataset, split, labels_from;
  std::optional<std::size_t> warmup_recon;
  bool detached_q = false, ntxent_standard = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key=value config file");
  cmd->add_option("--set", o.sets, "override a config key (key=value), repeatable")->take_all();
  cmd->add_option("--dataset", o.dataset, "dataset name (synth_two_cluster or a UCR name)");
  cmd->add_option("--split", o.split, "train, test or merged");
  cmd->add_option("--labels-from", o.labels_from, "kmeans-on-Z or argmax-absQ");
  cmd->add_option("--warmup-recon", o.warmup_recon, "epochs of reconstruction-only training");
  cmd->add_flag("--detached-q", o.detached_q, "treat Q as a constant in the cluster loss");
  cmd->add_flag("--ntxent-standard", o.ntxent_standard, "use the conventional NT-Xent denominator");
}

// Resolves the config file plus flag overrides. Explicit flags apply first,
// then --set assignments in order, so --set wins.
Config resolve(const CommonOptions& o, std::vector<std::string>& overrides) {
  Config cfg = o.config_path.empty() ? Config() : Config::load(o.config_path);
  auto apply = [&](const std::string& key, const std::string& value) {
    cfg.set(key, value);
    overrides.push_back(key + "=" + value);
  };
  if (o.dataset) apply("dataset", *o.dataset);
  if (o.split) apply("split", *o.split);
  if (o.labels_from) apply("labels_from", *o.labels_from);
  if (o.warmup_recon) apply("warmup_recon", std::to_string(*o.warmup_recon));
  if (o.detached_q) apply("detached_q", "true");
  if (o.ntxent_standard) apply("ntxent_standard", "true");
  for (const auto& s : o.sets) {
    cfg.set_assignment(s);
    overrides.push_back(s);
  }
  cfg.train_config();
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("no seeds given");
  return seeds;
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep temporal contrastive clustering for univariate time series"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  std::uint64_t train_seed = 0;
  std::string train_seeds;
  std::size_t train_jobs = 1;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a run directory");
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--seed", train_seed, "random seed");
  train_cmd->add_option("--seeds", train_seeds, "comma-separated seeds (overrides --seed)");
  train_cmd->add_option("--jobs", train_jobs, "concurrent runs")->check(CLI::PositiveNumber);

  CommonOptions eval_opts;
  std::string eval_run;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "re-evaluate a finished run");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--run", eval_run, "run directory (otherwise derived from --config and --seed)");
  eval_cmd->add_option("--seed", eval_seed, "random seed");

  CommonOptions abl_opts;
  std::string abl_grid = "icl-ccl", abl_seeds = "0,1,2", abl_out;
  std::size_t abl_jobs = 1;
  auto* abl_cmd = app.add_subcommand("ablate", "run a loss-toggle grid and tabulate NMI and RI");
  add_common(abl_cmd, abl_opts);
  abl_cmd->add_option("--grid", abl_grid, "icl-ccl, cd or both");
  abl_cmd->add_option("--seeds", abl_seeds, "comma-separated seeds");
  abl_cmd->add_option("--jobs", abl_jobs, "concurrent runs")->check(CLI::PositiveNumber);
  abl_cmd->add_option("--out", abl_out, "output directory for the tables");

  CommonOptions base_opts;
  std::string base_seeds = "0";
  std::size_t base_k = 0, base_restarts = 10;
  std::string base_out;
  auto* base_cmd = app.add_subcommand("baseline", "k-means on the raw series");
  add_common(base_cmd, base_opts);
  base_cmd->add_option("--k", base_k, "number of clusters (default: number of classes)");
  base_cmd->add_option("--restarts", base_restarts, "k-means restarts")->check(CLI::PositiveNumber);
  base_cmd->add_option("--seeds", base_seeds, "comma-separated seeds");
  base_cmd->add_option("--out", base_out, "write the reports to this JSON file");

  std::size_t synth_n_per = 25, synth_length = 64;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "write the two-cluster synthetic set as a UCR file");
  synth_cmd->add_option("--n-per", synth_n_per, "series per class");
  synth_cmd->add_option("--length", synth_length, "series length");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--out", synth_out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = command_line(argc, argv);
  try {
    if (*train_cmd) {
      std::vector<std::string> overrides;
      Config cfg = resolve(train_opts, overrides);
      auto seeds = train_seeds.empty() ? std::vector<std::uint64_t>{train_seed} : parse_seeds(train_seeds);
      std::vector<run::RunOutcome> outs(seeds.size());
      std::vector<std::function<void()>> tasks;
      for (std::size_t i = 0; i < seeds.size(); ++i)
        tasks.push_back([&, i] {
          outs[i] = run::train_run(cfg, seeds[i], overrides, command, run::runs_root(), train_jobs == 1 ? &std::cerr : nullptr);
        });
      run::run_parallel(train_jobs, tasks);
      for (std::size_t i = 0; i < seeds.size(); ++i)
        std::cout << outs[i].dir.string() << "  nmi=" << outs[i].nmi << "  ri=" << outs[i].ri << '\n';
    } else if (*eval_cmd) {
      fs::path dir = eval_run;
      if (dir.empty()) {
        // The readout mode does not select the run; it only changes this evaluation.
        CommonOptions locate = eval_opts;
        locate.labels_from.reset();
        std::vector<std::string> overrides;
        Config cfg = resolve(locate, overrides);
        cfg.set("seed", std::to_string(eval_seed));
        dir = run::runs_root() / run::load_dataset(cfg).name / run::config_hash(cfg) / std::to_string(eval_seed);
      }
      if (!fs::exists(dir / "manifest.json")) throw ConfigError("no run found at " + dir.string());
      std::optional<LabelMode> mode;
      if (eval_opts.labels_from) mode = parse_label_mode(*eval_opts.labels_from);
      std::cout << run::evaluate_run(dir, mode).dump(2) << '\n';
    } else if (*abl_cmd) {
      std::vector<std::string> overrides;
      Config cfg = resolve(abl_opts, overrides);
      auto seeds = parse_seeds(abl_seeds);
      std::vector<run::AblationGrid> grids;
      if (abl_grid == "both")
        grids = {run::AblationGrid::ContrastiveLosses, run::AblationGrid::ClusterDistribution};
      else
        grids = {run::parse_grid(abl_grid)};
      const std::string dataset = run::load_dataset(cfg).name;
      fs::path out = abl_out.empty() ? run::runs_root() / dataset / ("ablation-" + run::config_hash(cfg)) : fs::path(abl_out);
      fs::create_directories(out);
      for (auto grid : grids) {
        auto rows = run::run_ablation(cfg, grid, seeds, abl_jobs, run::runs_root(), &std::cerr);
        const std::string stem = grid == run::AblationGrid::ContrastiveLosses ? "icl-ccl" : "cd";
        run::write_text(out / (stem + ".csv"), run::ablation_csv(rows));
        const std::string table = run::ablation_text(rows, grid);
        run::write_text(out / (stem + ".txt"), table);
        std::cout << table << '\n';
      }
      std::cout << "tables written to " << out.string() << '\n';
    } else if (*base_cmd) {
      std::vector<std::string> overrides;
      Config cfg = resolve(base_opts, overrides);
      auto reports = run::run_baseline(cfg, base_k, base_restarts, parse_seeds(base_seeds));
      run::json all = reports;
      if (!base_out.empty()) run::write_text(base_out, all.dump(2) + "\n");
      std::cout << all.dump(2) << '\n';
    } else if (*synth_cmd) {
      save_ucr(synth_two_cluster(synth_n_per, synth_length, synth_seed), synth_out);
      std::cout << synth_out << '\n';
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed run metadata: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
