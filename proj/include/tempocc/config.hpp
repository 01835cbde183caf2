#pragma once

// Flat key=value run configuration. Every key has a default; unknown keys
// are rejected. Lines starting with '#' are comments.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tempocc/augmentation.hpp"
#include "tempocc/error.hpp"
#include "tempocc/model.hpp"
#include "tempocc/objectives.hpp"
#include "tempocc/spectral.hpp"

namespace tempocc {

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t refresh_period = 5;
  std::size_t batch_size = 0;  ///< 0: half the dataset, rounded up
  double learning_rate = 5e-3;
  std::uint64_t seed = 0;
  std::size_t k = 0;  ///< 0: number of ground-truth classes
  LossConfig loss;
  AugmentationSpec augmentation;
  ModelSpec model;
  bool detached_q = false;        ///< cluster loss sees Q as a constant
  std::size_t warmup_recon = 0;   ///< epochs trained on reconstruction only
  double grad_clip = 0.0;         ///< global-norm clip; 0 disables
  LabelMode labels_from = LabelMode::KMeansOnZ;
  std::size_t kmeans_restarts = 10;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (refresh_period < 1) throw ConfigError("refresh_period must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (k == 1) throw ConfigError("k must be >= 2");
    if (batch_size == 1) throw ConfigError("batch_size must be >= 2");
    if (grad_clip < 0) throw ConfigError("grad_clip must be >= 0");
    loss.validate();
    augmentation.validate();
    model.validate();
  }
};

class Config {
 public:
  Config() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"dataset", "synth_two_cluster"},
        {"train_path", ""},
        {"test_path", ""},
        {"split", "merged"},
        {"delimiter", "auto"},
        {"znormalize", "true"},
        {"synth_n_per", "25"},
        {"synth_length", "64"},
        {"synth_seed", "0"},
        {"seed", "0"},
        {"epochs", "300"},
        {"refresh_period", "5"},
        {"batch_size", "0"},
        {"learning_rate", "0.005"},
        {"k", "0"},
        {"units", "50,30,30"},
        {"dilations", "1,4,16"},
        {"cell", "gru"},
        {"shared_weights", "true"},
        {"tau_instance", "0.5"},
        {"tau_cluster", "1.0"},
        {"lambda", "0.5"},
        {"use_instance", "true"},
        {"use_cluster", "true"},
        {"use_cd_org", "true"},
        {"use_cd_aug", "true"},
        {"ntxent_standard", "false"},
        {"detached_q", "false"},
        {"augment", "jitter,scaling,permute"},
        {"jitter_sigma", "0.1"},
        {"scaling_sigma", "0.1"},
        {"permute_parts", "4"},
        {"shift_max_frac", "0.1"},
        {"augment_compose", "false"},
        {"warmup_recon", "0"},
        {"grad_clip", "0"},
        {"labels_from", "kmeans-on-Z"},
        {"kmeans_restarts", "10"},
    };
    return d;
  }

  static Config parse(std::istream& in) {
    Config c;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(row) + ": expected key=value");
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
  }

  static Config parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in);
  }

  void set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// Applies "key=value".
  void set_assignment(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key) const {
    const std::string& s = get(key);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError("config key '" + key + "': '" + s + "' is not a number");
    return v;
  }

  std::uint64_t get_uint(const std::string& key) const {
    const std::string& s = get(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError("config key '" + key + "': '" + s + "' is not a non-negative integer");
    return v;
  }

  bool get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config key '" + key + "': '" + s + "' is not a boolean");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  std::vector<std::size_t> get_uint_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& s : get_list(key)) {
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("config key '" + key + "': '" + s + "' is not a non-negative integer");
      out.push_back(v);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Sorted key=value lines of every key except those listed.
  std::string canonical(const std::vector<std::string>& exclude = {"seed"}) const {
    std::string out;
    for (const auto& [k, v] : values_) {
      if (std::find(exclude.begin(), exclude.end(), k) != exclude.end()) continue;
      out += k + "=" + v + "\n";
    }
    return out;
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.epochs = get_uint("epochs");
    t.refresh_period = get_uint("refresh_period");
    t.batch_size = get_uint("batch_size");
    t.learning_rate = get_double("learning_rate");
    t.seed = get_uint("seed");
    t.k = get_uint("k");
    t.loss.tau_instance = get_double("tau_instance");
    t.loss.tau_cluster = get_double("tau_cluster");
    t.loss.lambda = get_double("lambda");
    t.loss.use_instance = get_bool("use_instance");
    t.loss.use_cluster = get_bool("use_cluster");
    t.loss.use_cd_org = get_bool("use_cd_org");
    t.loss.use_cd_aug = get_bool("use_cd_aug");
    t.loss.ntxent_standard = get_bool("ntxent_standard");
    t.augmentation.family.clear();
    for (const auto& a : get_list("augment")) t.augmentation.family.push_back(parse_augment_kind(a));
    t.augmentation.jitter_sigma = get_double("jitter_sigma");
    t.augmentation.scaling_sigma = get_double("scaling_sigma");
    t.augmentation.permute_parts = get_uint("permute_parts");
    t.augmentation.shift_max_frac = get_double("shift_max_frac");
    t.augmentation.compose = get_bool("augment_compose");
    t.model.units = get_uint_list("units");
    t.model.dilations = get_uint_list("dilations");
    t.model.cell = parse_cell_type(get("cell"));
    t.model.shared_weights = get_bool("shared_weights");
    t.detached_q = get_bool("detached_q");
    t.warmup_recon = get_uint("warmup_recon");
    t.grad_clip = get_double("grad_clip");
    t.labels_from = parse_label_mode(get("labels_from"));
    t.kmeans_restarts = get_uint("kmeans_restarts");
    t.validate();
    return t;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace tempocc
