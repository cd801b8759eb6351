#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace metamt {

struct DomainDataset {
  std::string domain_id;
  std::vector<IdPair> train, dev, test;

  void validate() const {
    if (train.empty() || dev.empty() || test.empty())
      throw DataError("domain " + domain_id + ": every split must be non-empty");
  }
};

// Subword-encode a text dataset: source gets a trailing <eos>, target is
// wrapped in <bos> ... <eos>.
inline IdPair encode_pair(const BpeModel& bpe_src, const BpeModel& bpe_tgt,
                          const Vocab& vocab_src, const Vocab& vocab_tgt,
                          const std::pair<std::string, std::string>& pair) {
  IdPair out;
  out.first = encode_ids(vocab_src, bpe_encode(bpe_src, pair.first));
  out.first.push_back(Vocab::eos_id);
  out.second.push_back(Vocab::bos_id);
  for (int id : encode_ids(vocab_tgt, bpe_encode(bpe_tgt, pair.second)))
    out.second.push_back(id);
  out.second.push_back(Vocab::eos_id);
  return out;
}

inline DomainDataset encode_dataset(const TextDataset& text, const BpeModel& bpe_src,
                                    const BpeModel& bpe_tgt, const Vocab& vocab_src,
                                    const Vocab& vocab_tgt) {
  DomainDataset out;
  out.domain_id = text.domain_id;
  for (const auto& p : text.train)
    out.train.push_back(encode_pair(bpe_src, bpe_tgt, vocab_src, vocab_tgt, p));
  for (const auto& p : text.dev)
    out.dev.push_back(encode_pair(bpe_src, bpe_tgt, vocab_src, vocab_tgt, p));
  for (const auto& p : text.test)
    out.test.push_back(encode_pair(bpe_src, bpe_tgt, vocab_src, vocab_tgt, p));
  return out;
}

// ---------------------------------------------------------------------------
// training log
// ---------------------------------------------------------------------------

struct LogRecord {
  std::int64_t step{-1};
  std::int64_t epoch{-1};
  std::string phase;  // model | meta | meta-update | finetune | eval
  std::string domain_i, domain_j;
  std::string split;  // data the loss was computed on
  double loss{std::numeric_limits<double>::quiet_NaN()};
  double dev_metric{std::numeric_limits<double>::quiet_NaN()};

  std::string to_json() const;
};

class TrainLog {
 public:
  TrainLog() = default;

  void open(const std::string& path) {
    file_.open(path, std::ios::binary | std::ios::app);
    if (!file_) throw IoError("cannot open training log: " + path);
  }

  void add(const LogRecord& r) {
    records_.push_back(r);
    if (file_.is_open()) file_ << r.to_json() << "\n" << std::flush;
  }

  const std::vector<LogRecord>& records() const { return records_; }

 private:
  std::vector<LogRecord> records_;
  std::ofstream file_;
};

struct TrainConfig {
  std::size_t inner_steps{200};
  std::size_t meta_steps{50};
  std::size_t finetune_steps{400};
  std::size_t patience{5};
  std::size_t eval_every{20};
  std::size_t batch_size{16};
  std::size_t epochs{2};
  double lr{3e-4};
  double meta_lr{0.1};
  std::uint64_t seed{1};
  bool per_epoch_aggregate{false};  // default: meta update after every pair
  bool allow_single_domain{false};  // degenerate mode; reduces to plain training
};

// ---------------------------------------------------------------------------
// core loops
// ---------------------------------------------------------------------------

namespace detail {

template <class S>
Var<S> batch_loss(const TransformerModel<S>& model, Tape<S>* tape, const Batch& batch,
                  const std::string& domain, TrainMode<S> mode) {
  Var<S> total;
  for (std::size_t i = 0; i < batch.src.size(); ++i) {
    const auto row = batch_row(batch, i);
    auto loss = model.forward_loss(tape, row.first, row.second, domain, mode);
    total = total ? add(tape, total, loss) : loss;
  }
  return scale(tape, total, S(1) / S(batch.src.size()));
}

template <class S>
double eval_loss(const TransformerModel<S>& model, const std::vector<IdPair>& split,
                 const std::string& domain) {
  double total = 0;
  for (const auto& [src, tgt] : split) {
    auto loss = model.forward_loss(nullptr, src, tgt, domain);
    total += static_cast<double>(loss->v[0]);
  }
  return total / static_cast<double>(split.size());
}

template <class S>
std::map<std::string, std::vector<S>> snapshot_values(const ParamStore<S>& store,
                                                      const std::vector<std::string>& paths) {
  std::map<std::string, std::vector<S>> out;
  for (const auto& p : paths) out[p] = store.at(p)->v;
  return out;
}

}  // namespace detail

// Early-stopped optimization of `trainable` paths on (train, dev). Fresh Adam
// state per run; dev loss is evaluated before the first step and every
// eval_every steps after that, and training halts once `patience` evaluations
// pass without improvement. With restore_best the best-dev snapshot is
// restored at the end (fine-tuning); without it the parameters at the stopping
// point are returned (model and meta steps). Every random decision derives
// from stream_seed, so identical calls are bit-identical.
template <class S>
TransformerModel<S> train_run(const TransformerModel<S>& start,
                              const std::vector<IdPair>& train_split,
                              const std::vector<IdPair>& dev_split,
                              const std::vector<std::string>& trainable,
                              std::size_t max_steps, const TrainConfig& cfg,
                              const std::string& domain, std::uint64_t stream_seed,
                              const char* phase, const std::string& split_label,
                              std::int64_t epoch, const std::string& domain_j,
                              TrainLog* log, bool restore_best = false) {
  auto model = start.clone();
  if (max_steps == 0 || trainable.empty()) return model;
  if (train_split.empty() || dev_split.empty())
    throw DataError(std::string(phase) + ": empty split for domain " + domain);

  Adam<S> adam(typename Adam<S>::Hyper{static_cast<S>(cfg.lr)});
  std::map<std::string, std::vector<S>> best;
  if (restore_best) best = detail::snapshot_values(model.store(), trainable);
  double best_dev = detail::eval_loss(model, dev_split, domain);
  std::size_t bad_evals = 0;

  std::vector<Batch> batches;
  std::size_t cursor = 0, cycle = 0;
  const double rate = model.config().dropout;
  for (std::size_t step = 1; step <= max_steps; ++step) {
    if (cursor == batches.size()) {
      batches = make_batches(train_split, cfg.batch_size, Vocab::pad_id,
                             mix_seed(stream_seed, 0xb000 + cycle));
      cursor = 0;
      ++cycle;
    }
    Rng drop_rng(mix_seed(stream_seed, 0xd0000000ULL + step));
    TrainMode<S> mode{rate, rate > 0 ? &drop_rng : nullptr};
    Tape<S> tape;
    model.store().zero_grads();
    auto loss = detail::batch_loss(model, &tape, batches[cursor++], domain, mode);
    tape.backward(loss);
    adam.step(model.store(), trainable);
    if (log)
      log->add({static_cast<std::int64_t>(step), epoch, phase, domain, domain_j, split_label,
                static_cast<double>(loss->v[0]),
                std::numeric_limits<double>::quiet_NaN()});

    if (step % cfg.eval_every == 0 || step == max_steps) {
      const double dev = detail::eval_loss(model, dev_split, domain);
      if (log)
        log->add({static_cast<std::int64_t>(step), epoch, phase, domain, domain_j, "dev",
                  std::numeric_limits<double>::quiet_NaN(), dev});
      if (dev < best_dev) {
        best_dev = dev;
        if (restore_best) best = detail::snapshot_values(model.store(), trainable);
        bad_evals = 0;
      } else if (++bad_evals >= cfg.patience) {
        break;
      }
    }
  }
  if (restore_best)
    for (auto& [path, values] : best) model.store().at(path)->v = values;
  return model;
}

// Model training (Algorithm 1, inner step): full-parameter training on
// D_tr^i with early stopping on D_dev^i. Returns the trained snapshot; the
// starting model is untouched.
template <class S>
TransformerModel<S> model_training_step(const TransformerModel<S>& model,
                                        const DomainDataset& data, const TrainConfig& cfg,
                                        std::uint64_t stream_seed, std::int64_t epoch = -1,
                                        TrainLog* log = nullptr) {
  data.validate();
  return train_run(model, data.train, data.dev, model.partition().all, cfg.inner_steps, cfg,
                   data.domain_id, stream_seed, "model", "train", epoch, "", log);
}

// Meta training: optimizes only the meta parameters (transmission + encoder)
// on a deterministic 90/10 split of D_dev^j; everything outside the meta set
// stays bit-identical.
template <class S>
TransformerModel<S> meta_training_step(const TransformerModel<S>& snapshot,
                                       const DomainDataset& data_j, const TrainConfig& cfg,
                                       std::uint64_t stream_seed, std::int64_t epoch = -1,
                                       TrainLog* log = nullptr) {
  if (data_j.dev.size() < 10)
    throw DataError("meta_training_step: D_dev^" + data_j.domain_id +
                    " has fewer than 10 pairs");
  std::vector<std::size_t> order(data_j.dev.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(cfg.seed, mix_seed(hash_str(data_j.domain_id), 0x9010)));
  rng.shuffle(order);
  const std::size_t n90 = (order.size() * 9) / 10;
  std::vector<IdPair> dev90, dev10;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n90 ? dev90 : dev10).push_back(data_j.dev[order[i]]);

  return train_run(snapshot, dev90, dev10, snapshot.partition().meta, cfg.meta_steps, cfg,
                   data_j.domain_id, stream_seed, "meta", "dev90", epoch, data_j.domain_id,
                   log);
}

// First-order meta update: one gradient of the training loss at each
// snapshot, summed by path, applied to the live parameters with plain SGD.
template <class S>
void meta_update(TransformerModel<S>& live,
                 const std::vector<const TransformerModel<S>*>& snapshots,
                 const std::vector<const DomainDataset*>& datasets, double meta_lr,
                 const TrainConfig& cfg, std::uint64_t stream_seed, std::int64_t epoch = -1,
                 TrainLog* log = nullptr) {
  if (snapshots.empty()) throw ContractError("meta_update: no snapshots");
  if (snapshots.size() != datasets.size())
    throw ContractError("meta_update: snapshot/dataset count mismatch");

  std::map<std::string, std::vector<S>> combined;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    auto snap = snapshots[i]->clone();
    const auto batches = make_batches(datasets[i]->train, cfg.batch_size, Vocab::pad_id,
                                      mix_seed(stream_seed, 0xabc0 + i));
    Tape<S> tape;
    snap.store().zero_grads();
    auto loss = detail::batch_loss(snap, &tape, batches.front(), datasets[i]->domain_id, {});
    tape.backward(loss);
    if (log)
      log->add({-1, epoch, "meta-update", datasets[i]->domain_id, "", "train",
                static_cast<double>(loss->v[0]),
                std::numeric_limits<double>::quiet_NaN()});
    for (const auto& [path, var] : snap.store()) {
      auto& acc = combined[path];
      if (acc.empty()) acc.assign(var->g.size(), S(0));
      for (std::size_t k = 0; k < var->g.size(); ++k) {
        if (!std::isfinite(static_cast<double>(var->g[k])))
          throw NumericError("meta_update: non-finite gradient in " + path);
        acc[k] += var->g[k];
      }
    }
  }
  for (const auto& [path, grad] : combined) {
    if (!live.store().contains(path)) continue;
    const auto& var = live.store().at(path);
    for (std::size_t k = 0; k < grad.size(); ++k)
      var->v[k] -= static_cast<S>(meta_lr) * grad[k];
  }
}

// All parameters trainable on the target domain; returns the best-dev model.
template <class S>
TransformerModel<S> fine_tune(const TransformerModel<S>& model, const DomainDataset& data,
                              const TrainConfig& cfg, TrainLog* log = nullptr) {
  data.validate();
  if (!model.has_domain(data.domain_id))
    throw ContractError("fine_tune: domain not registered: " + data.domain_id);
  return train_run(model, data.train, data.dev, model.partition().all, cfg.finetune_steps,
                   cfg, data.domain_id, mix_seed(cfg.seed, mix_seed(hash_str(data.domain_id), 0xf7)),
                   "finetune", "train", -1, "", log, /*restore_best=*/true);
}

using EpochCallback = std::function<void(std::size_t epoch)>;

// Algorithm 1 outer loop. Per epoch, all ordered domain pairs (i, j), i != j,
// are visited in a seeded shuffle. Each pair runs model training (which
// updates the translation model: the live parameters adopt the trained
// snapshot) and meta training of the transmission/encoder set, then the
// collected first-order gradients at the adjusted snapshot take one SGD step
// (per pair by default, per epoch when configured). With a single domain the
// schedule degenerates to the self pair with no meta step or update, which
// makes the loop step-for-step identical to plain training.
template <class S>
void run_meta_training(TransformerModel<S>& model, const std::vector<DomainDataset>& datasets,
                       const TrainConfig& cfg, TrainLog* log = nullptr,
                       const EpochCallback& on_epoch_end = nullptr,
                       std::size_t start_epoch = 0) {
  if (datasets.empty()) throw ConfigError("run_meta_training: no datasets");
  if (datasets.size() < 2 && !cfg.allow_single_domain)
    throw ConfigError("run_meta_training: at least 2 domains required");
  for (const auto& d : datasets) {
    d.validate();
    if (!model.has_domain(d.domain_id))
      throw ContractError("run_meta_training: domain not registered: " + d.domain_id);
  }

  std::vector<std::pair<std::size_t, std::size_t>> base_pairs;
  for (std::size_t i = 0; i < datasets.size(); ++i)
    for (std::size_t j = 0; j < datasets.size(); ++j)
      if (i != j) base_pairs.push_back({i, j});
  if (base_pairs.empty()) base_pairs.push_back({0, 0});

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto schedule = base_pairs;
    Rng sched_rng(mix_seed(cfg.seed, 0x5c000 + epoch));
    sched_rng.shuffle(schedule);

    std::vector<TransformerModel<S>> epoch_snaps;
    std::vector<const DomainDataset*> epoch_data;
    for (std::size_t idx = 0; idx < schedule.size(); ++idx) {
      const auto [i, j] = schedule[idx];
      const std::uint64_t pair_seed =
          mix_seed(cfg.seed, epoch * 1000003ULL + idx * 1009ULL);
      if (log)
        log->add({static_cast<std::int64_t>(idx), static_cast<std::int64_t>(epoch), "pair",
                  datasets[i].domain_id, datasets[j].domain_id, "",
                  std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN()});
      auto theta_i = model_training_step(model, datasets[i], cfg, mix_seed(pair_seed, 1),
                                         static_cast<std::int64_t>(epoch), log);
      if (i == j) {
        // Degenerate single-domain schedule: adopt the trained snapshot.
        model.store().copy_values_from(theta_i.store());
        continue;
      }
      auto theta_i_prime = meta_training_step(theta_i, datasets[j], cfg, mix_seed(pair_seed, 2),
                                              static_cast<std::int64_t>(epoch), log);
      model.store().copy_values_from(theta_i_prime.store());
      if (cfg.per_epoch_aggregate) {
        epoch_snaps.push_back(std::move(theta_i_prime));
        epoch_data.push_back(&datasets[i]);
      } else {
        const TransformerModel<S>* snap = &theta_i_prime;
        meta_update(model, {snap}, {&datasets[i]}, cfg.meta_lr, cfg, mix_seed(pair_seed, 3),
                    static_cast<std::int64_t>(epoch), log);
      }
    }
    if (cfg.per_epoch_aggregate && !epoch_snaps.empty()) {
      std::vector<const TransformerModel<S>*> snaps;
      for (const auto& s : epoch_snaps) snaps.push_back(&s);
      meta_update(model, snaps, epoch_data, cfg.meta_lr, cfg,
                  mix_seed(cfg.seed, 0xe9d000 + epoch), static_cast<std::int64_t>(epoch), log);
    }

    if (log)
      for (const auto& d : datasets)
        log->add({-1, static_cast<std::int64_t>(epoch), "eval", d.domain_id, "", "dev",
                  std::numeric_limits<double>::quiet_NaN(),
                  detail::eval_loss(model, d.dev, d.domain_id)});
    if (on_epoch_end) on_epoch_end(epoch);
  }
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (static_cast<unsigned char>(c) < 0x20) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "\\u%04x", c);
      out += buf;
    } else {
      out += c;
    }
  }
  return out;
}

inline std::string LogRecord::to_json() const {
  std::string out = "{";
  out += "\"step\":" + std::to_string(step);
  out += ",\"epoch\":" + std::to_string(epoch);
  out += ",\"phase\":\"" + json_escape(phase) + "\"";
  out += ",\"domain_i\":\"" + json_escape(domain_i) + "\"";
  out += ",\"domain_j\":\"" + json_escape(domain_j) + "\"";
  out += ",\"split\":\"" + json_escape(split) + "\"";
  char buf[64];
  if (std::isfinite(loss)) {
    std::snprintf(buf, sizeof(buf), "%.9g", loss);
    out += ",\"loss\":" + std::string(buf);
  }
  if (std::isfinite(dev_metric)) {
    std::snprintf(buf, sizeof(buf), "%.9g", dev_metric);
    out += ",\"dev_metric\":" + std::string(buf);
  }
  return out + "}";
}

}  // namespace metamt
