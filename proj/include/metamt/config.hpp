#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "train.hpp"
#include "transmission.hpp"

namespace metamt {

// Flat key=value run configuration with section prefixes (model., transmission.,
// train., data., decode., run.). Unknown keys are rejected; the resolved set
// echoes deterministically and reparses byte-for-byte.
class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> kDefaults = {
        {"model.d_model", "32"},
        {"model.n_layers", "1"},
        {"model.n_heads", "2"},
        {"model.ffn_dim", "64"},
        {"model.dropout", "0.1"},
        {"model.max_len", "64"},
        {"model.enc_proj", "1"},
        {"model.dec_proj", "1"},
        {"model.label_smoothing", "0"},
        {"model.seed", "1"},
        {"transmission.n_base", "64"},
        {"transmission.d", "32"},
        {"transmission.normalize_rows", "1"},
        {"transmission.score_norm", "none"},
        {"transmission.init_policy", "identity"},
        {"train.inner_steps", "200"},
        {"train.meta_steps", "50"},
        {"train.finetune_steps", "400"},
        {"train.patience", "5"},
        {"train.eval_every", "20"},
        {"train.batch_size", "16"},
        {"train.epochs", "2"},
        {"train.lr", "3e-4"},
        {"train.meta_lr", "0.1"},
        {"train.seed", "1"},
        {"train.aggregate", "per_pair"},
        {"data.train_ratio", "0.8"},
        {"data.dev_ratio", "0.1"},
        {"data.test_ratio", "0.1"},
        {"data.bpe_ops", "300"},
        {"data.min_freq", "1"},
        {"data.synth.domains", "4"},
        {"data.synth.shared_vocab", "48"},
        {"data.synth.exclusive", "8"},
        {"data.synth.polysemy", "8"},
        {"data.synth.len_min", "4"},
        {"data.synth.len_max", "9"},
        {"data.synth.pairs", "1000"},
        {"data.synth.zipf", "1.0"},
        {"data.synth.swap_noise", "0"},
        {"data.synth.seed", "1"},
        {"data.synth.heldout", "1"},
        {"data.synth.heldout_pairs", "250"},
        {"decode.beam", "5"},
        {"decode.max_len", "32"},
        {"decode.length_norm", "0"},
        {"run.label", ""},
    };
    return kDefaults;
  }

  void set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw ConfigError("unknown config key: " + key);
    values_[key] = value;
  }

  void load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + " is not key=value");
      set(line.substr(0, eq), line.substr(eq + 1));
    }
  }

  void apply_overrides(const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("override is not key=value: " + kv);
      set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }

  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    return it->second;
  }

  std::uint64_t get_u64(const std::string& key) const {
    try {
      return std::stoull(raw(key));
    } catch (const std::exception&) {
      throw ConfigError("config " + key + ": not an integer: " + raw(key));
    }
  }

  double get_double(const std::string& key) const {
    try {
      return std::stod(raw(key));
    } catch (const std::exception&) {
      throw ConfigError("config " + key + ": not a number: " + raw(key));
    }
  }

  bool get_bool(const std::string& key) const {
    const auto& v = raw(key);
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config " + key + ": not a boolean: " + v);
  }

  // Sorted key=value lines; parsing the echo reproduces the config exactly.
  std::string echo() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  static RunConfig from_echo(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("bad echo line: " + line);
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
  }

  ModelConfig model_config(std::size_t src_vocab, std::size_t tgt_vocab) const {
    ModelConfig cfg;
    cfg.d_model = get_u64("model.d_model");
    cfg.n_layers = get_u64("model.n_layers");
    cfg.n_heads = get_u64("model.n_heads");
    cfg.ffn_dim = get_u64("model.ffn_dim");
    cfg.dropout = get_double("model.dropout");
    cfg.max_len = get_u64("model.max_len");
    cfg.src_vocab = src_vocab;
    cfg.tgt_vocab = tgt_vocab;
    cfg.enc_proj = get_bool("model.enc_proj");
    cfg.dec_proj = get_bool("model.dec_proj");
    cfg.label_smoothing = get_double("model.label_smoothing");
    cfg.seed = get_u64("model.seed");
    cfg.trans_n = get_u64("transmission.n_base");
    cfg.trans_d = get_u64("transmission.d");
    cfg.trans_normalize_rows = get_bool("transmission.normalize_rows");
    cfg.trans_score_norm = parse_score_norm(raw("transmission.score_norm"));
    return cfg;
  }

  TrainConfig train_config() const {
    TrainConfig cfg;
    cfg.inner_steps = get_u64("train.inner_steps");
    cfg.meta_steps = get_u64("train.meta_steps");
    cfg.finetune_steps = get_u64("train.finetune_steps");
    cfg.patience = get_u64("train.patience");
    cfg.eval_every = get_u64("train.eval_every");
    cfg.batch_size = get_u64("train.batch_size");
    cfg.epochs = get_u64("train.epochs");
    cfg.lr = get_double("train.lr");
    cfg.meta_lr = get_double("train.meta_lr");
    cfg.seed = get_u64("train.seed");
    const auto& agg = raw("train.aggregate");
    if (agg == "per_pair")
      cfg.per_epoch_aggregate = false;
    else if (agg == "per_epoch")
      cfg.per_epoch_aggregate = true;
    else
      throw ConfigError("train.aggregate must be per_pair or per_epoch");
    return cfg;
  }

  SyntheticTaskSpec synth_spec() const {
    SyntheticTaskSpec spec;
    spec.num_domains = get_u64("data.synth.domains");
    spec.shared_vocab = get_u64("data.synth.shared_vocab");
    spec.exclusive_per_domain = get_u64("data.synth.exclusive");
    spec.polysemy = get_u64("data.synth.polysemy");
    spec.len_min = get_u64("data.synth.len_min");
    spec.len_max = get_u64("data.synth.len_max");
    spec.pairs_per_domain = get_u64("data.synth.pairs");
    spec.heldout = get_u64("data.synth.heldout");
    spec.heldout_pairs = get_u64("data.synth.heldout_pairs");
    spec.zipf_exponent = get_double("data.synth.zipf");
    spec.swap_noise = get_bool("data.synth.swap_noise");
    spec.seed = get_u64("data.synth.seed");
    return spec;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace metamt
