#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bpe.hpp"
#include "errors.hpp"
#include "optim.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "transmission.hpp"

namespace metamt {

// Architecture and ablation switches. Desk-scale defaults; the full-scale
// configuration (embedding 300, hidden 512, 4 layers, 6 heads, dropout 0.3)
// is provided as a named preset.
struct ModelConfig {
  std::size_t d_model{32};
  std::size_t n_layers{1};
  std::size_t n_heads{2};
  std::size_t ffn_dim{64};
  double dropout{0.1};
  std::size_t max_len{64};
  std::size_t src_vocab{0};
  std::size_t tgt_vocab{0};
  bool enc_proj{true};
  bool dec_proj{true};
  double label_smoothing{0.0};
  std::uint64_t seed{1};

  // transmission settings
  std::size_t trans_n{64};
  std::size_t trans_d{32};
  bool trans_normalize_rows{true};
  ScoreNorm trans_score_norm{ScoreNorm::none};

  static ModelConfig full_scale() {
    ModelConfig cfg;
    cfg.d_model = 512;
    cfg.n_layers = 4;
    cfg.n_heads = 6;
    cfg.ffn_dim = 2048;
    cfg.dropout = 0.3;
    cfg.trans_n = 10000;
    cfg.trans_d = 300;
    return cfg;
  }

  void validate() const {
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
      throw ConfigError("d_model must be a positive multiple of n_heads");
    if (src_vocab < 4 || tgt_vocab < 4)
      throw ConfigError("vocab sizes must include the four specials");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (max_len == 0) throw ConfigError("max_len must be positive");
  }
};

// Dropout is active only when both fields are set; evaluation passes the
// default.
template <class S>
struct TrainMode {
  double dropout{0.0};
  Rng* rng{nullptr};
  bool active() const { return dropout > 0.0 && rng != nullptr; }
};

template <class S>
struct ParameterPartition {
  std::vector<std::string> meta;  // transmission.src.*, transmission.tgt.*, encoder.*
  std::vector<std::string> all;
};

template <class S>
class TransformerModel {
 public:
  TransformerModel(ModelConfig cfg, BaseSpace<S> src_base, BaseSpace<S> tgt_base,
                   std::vector<std::string> src_tokens = {},
                   std::vector<std::string> tgt_tokens = {},
                   std::shared_ptr<const EmbeddingTable> src_pretrained = nullptr,
                   std::shared_ptr<const EmbeddingTable> tgt_pretrained = nullptr)
      : cfg_(cfg),
        src_tokens_(std::move(src_tokens)),
        tgt_tokens_(std::move(tgt_tokens)),
        src_pretrained_(std::move(src_pretrained)),
        tgt_pretrained_(std::move(tgt_pretrained)) {
    cfg_.validate();
    if (cfg_.enc_proj) {
      if (src_base.n == 0) throw ConfigError("enc_proj requires a source base space");
      src_trans_ = TransmissionLayer<S>(std::move(src_base), "src", cfg_.trans_score_norm);
    }
    if (cfg_.dec_proj) {
      if (tgt_base.n == 0) throw ConfigError("dec_proj requires a target base space");
      tgt_trans_ = TransmissionLayer<S>(std::move(tgt_base), "tgt", cfg_.trans_score_norm);
    }
    build_shared_parameters();
    build_positional_encoding();
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<S>& store() { return store_; }
  const ParamStore<S>& store() const { return store_; }
  const TransmissionLayer<S>& src_transmission() const { return src_trans_; }
  const TransmissionLayer<S>& tgt_transmission() const { return tgt_trans_; }

  std::vector<std::string> registered_domains() const {
    if (cfg_.enc_proj) return src_trans_.domains();
    if (cfg_.dec_proj) return tgt_trans_.domains();
    return domains_no_proj_;
  }

  bool has_domain(const std::string& id) const {
    const auto doms = registered_domains();
    return std::find(doms.begin(), doms.end(), id) != doms.end();
  }

  // Registers the domain on every engaged side: a fresh d x d projection per
  // init_policy plus a per-domain embedding table initialized from the
  // pretrained table where covered, seeded uniform(-0.1, 0.1) otherwise.
  // With the average policy the embedding table is likewise the mean of the
  // existing domains' tables, so a late-registered domain starts from the
  // representation the rest of the model was trained against.
  void register_domain(const std::string& id, InitPolicy policy = InitPolicy::identity) {
    if (has_domain(id)) throw ContractError("domain already registered: " + id);
    if (cfg_.enc_proj) {
      std::vector<std::string> prior;
      for (const auto& d : src_trans_.domains()) prior.push_back(src_trans_.emb_path(d));
      src_trans_.register_domain(store_, id, policy, cfg_.seed);
      init_domain_embedding("src", src_trans_.emb_path(id), cfg_.src_vocab, src_tokens_,
                            src_pretrained_.get());
      if (policy == InitPolicy::average) average_domain_table(src_trans_.emb_path(id), prior);
    }
    if (cfg_.dec_proj) {
      std::vector<std::string> prior;
      for (const auto& d : tgt_trans_.domains()) prior.push_back(tgt_trans_.emb_path(d));
      tgt_trans_.register_domain(store_, id, policy, cfg_.seed);
      init_domain_embedding("tgt", tgt_trans_.emb_path(id), cfg_.tgt_vocab, tgt_tokens_,
                            tgt_pretrained_.get());
      if (policy == InitPolicy::average) average_domain_table(tgt_trans_.emb_path(id), prior);
    }
    if (!cfg_.enc_proj && !cfg_.dec_proj) domains_no_proj_.push_back(id);
  }

  // Source embeddings -> transmission projection (when enabled) -> positional
  // encoding -> n_layers of self-attention + feed-forward.
  Var<S> encode(Tape<S>* tape, const std::vector<int>& src_ids, const std::string& domain,
                TrainMode<S> mode = {}) const {
    check_sequence(src_ids, "encode");
    auto x = embed_source(tape, src_ids, domain, mode);
    const auto pad = pad_flags(src_ids);
    const auto mask = key_pad_mask(src_ids.size(), pad);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string p = "encoder.layer" + std::to_string(l) + ".";
      auto attn = attention(tape, p + "attn.", x, x, x, mask, mode);
      x = layer_norm(tape, add(tape, x, attn), store_.at(p + "ln1.gamma"),
                     store_.at(p + "ln1.beta"));
      auto ffn = feed_forward(tape, p + "ffn.", x, mode);
      x = layer_norm(tape, add(tape, x, ffn), store_.at(p + "ln2.gamma"),
                     store_.at(p + "ln2.beta"));
    }
    return x;
  }

  // Teacher-forced decoder logits: [len(tgt_in) x tgt_vocab].
  Var<S> decoder_logits(Tape<S>* tape, const Var<S>& memory, const std::vector<int>& tgt_in,
                        const std::vector<int>& src_ids, const std::string& domain,
                        TrainMode<S> mode = {}) const {
    check_sequence(tgt_in, "decode");
    auto x = embed_target(tape, tgt_in, domain, mode);
    const auto tgt_pad = pad_flags(tgt_in);
    const auto self_mask = causal_mask(tgt_in.size(), tgt_pad);
    const auto cross_mask = key_pad_mask(tgt_in.size(), pad_flags(src_ids), memory->rows());
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string p = "decoder.layer" + std::to_string(l) + ".";
      auto self = attention(tape, p + "self.", x, x, x, self_mask, mode);
      x = layer_norm(tape, add(tape, x, self), store_.at(p + "ln1.gamma"),
                     store_.at(p + "ln1.beta"));
      auto cross = attention(tape, p + "cross.", x, memory, memory, cross_mask, mode);
      x = layer_norm(tape, add(tape, x, cross), store_.at(p + "ln2.gamma"),
                     store_.at(p + "ln2.beta"));
      auto ffn = feed_forward(tape, p + "ffn.", x, mode);
      x = layer_norm(tape, add(tape, x, ffn), store_.at(p + "ln3.gamma"),
                     store_.at(p + "ln3.beta"));
    }
    return add_rowwise(tape, matmul(tape, x, store_.at("output.w")), store_.at("output.b"));
  }

  // Teacher-forced mean cross-entropy; tgt must be [bos, ..., eos].
  Var<S> forward_loss(Tape<S>* tape, const std::vector<int>& src_ids,
                      const std::vector<int>& tgt_ids, const std::string& domain,
                      TrainMode<S> mode = {}) const {
    if (tgt_ids.size() < 2 || tgt_ids.front() != Vocab::bos_id || tgt_ids.back() != Vocab::eos_id)
      throw ContractError("forward_loss: target must begin with <bos> and end with <eos>");
    auto memory = encode(tape, src_ids, domain, mode);
    std::vector<int> tgt_in(tgt_ids.begin(), tgt_ids.end() - 1);
    std::vector<int> labels(tgt_ids.begin() + 1, tgt_ids.end());
    auto logits = decoder_logits(tape, memory, tgt_in, src_ids, domain, mode);
    return cross_entropy(tape, logits, labels, Vocab::pad_id, S(cfg_.label_smoothing));
  }

  // Meta parameters are the transmission layers (both sides) and the encoder;
  // model parameters are everything.
  ParameterPartition<S> partition() const {
    ParameterPartition<S> part;
    part.all = store_.paths();
    for (const auto& p : part.all)
      if (p.rfind("transmission.src.", 0) == 0 || p.rfind("transmission.tgt.", 0) == 0 ||
          p.rfind("encoder.", 0) == 0)
        part.meta.push_back(p);
    return part;
  }

  TransformerModel clone() const {
    TransformerModel out(*this);
    out.store_ = store_.clone();
    return out;
  }

 private:
  void check_sequence(const std::vector<int>& ids, const char* where) const {
    if (ids.empty()) throw ContractError(std::string(where) + ": empty sequence");
    if (ids.size() > cfg_.max_len)
      throw ContractError(std::string(where) + ": sequence length " +
                          std::to_string(ids.size()) + " exceeds max length " +
                          std::to_string(cfg_.max_len));
  }

  static std::vector<char> pad_flags(const std::vector<int>& ids) {
    std::vector<char> flags(ids.size(), 0);
    for (std::size_t i = 0; i < ids.size(); ++i) flags[i] = ids[i] == Vocab::pad_id ? 1 : 0;
    return flags;
  }

  Rng path_rng(const std::string& path) const {
    return Rng(mix_seed(cfg_.seed, hash_str(path)));
  }

  Var<S>& create_linear(const std::string& path, std::size_t fan_in, std::size_t fan_out) {
    auto& w = store_.create(path, {fan_in, fan_out});
    Rng rng = path_rng(path);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : w->v) x = static_cast<S>(rng.uniform(-bound, bound));
    return w;
  }

  void create_attention(const std::string& prefix) {
    const std::size_t d = cfg_.d_model;
    for (const char* name : {"wq", "wk", "wv", "wo"}) create_linear(prefix + name, d, d);
    for (const char* name : {"bq", "bk", "bv", "bo"}) store_.create(prefix + name, {d});
  }

  void create_layer_norm(const std::string& prefix) {
    auto& gamma = store_.create(prefix + "gamma", {cfg_.d_model});
    std::fill(gamma->v.begin(), gamma->v.end(), S(1));
    store_.create(prefix + "beta", {cfg_.d_model});
  }

  void create_embedding(const std::string& path, std::size_t vocab, std::size_t dim) {
    auto& e = store_.create(path, {vocab, dim});
    Rng rng = path_rng(path);
    for (auto& x : e->v) x = static_cast<S>(rng.uniform(-0.1, 0.1));
  }

  void build_shared_parameters() {
    if (!cfg_.enc_proj) create_embedding("encoder.embed", cfg_.src_vocab, cfg_.d_model);
    if (!cfg_.dec_proj) create_embedding("decoder.embed", cfg_.tgt_vocab, cfg_.d_model);
    if (cfg_.enc_proj && cfg_.trans_d != cfg_.d_model) {
      create_linear("transmission.src.adapter.w", cfg_.trans_d, cfg_.d_model);
      store_.create("transmission.src.adapter.b", {cfg_.d_model});
    }
    if (cfg_.dec_proj && cfg_.trans_d != cfg_.d_model) {
      create_linear("transmission.tgt.adapter.w", cfg_.trans_d, cfg_.d_model);
      store_.create("transmission.tgt.adapter.b", {cfg_.d_model});
    }
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string ep = "encoder.layer" + std::to_string(l) + ".";
      create_attention(ep + "attn.");
      create_layer_norm(ep + "ln1.");
      create_linear(ep + "ffn.w1", cfg_.d_model, cfg_.ffn_dim);
      store_.create(ep + "ffn.b1", {cfg_.ffn_dim});
      create_linear(ep + "ffn.w2", cfg_.ffn_dim, cfg_.d_model);
      store_.create(ep + "ffn.b2", {cfg_.d_model});
      create_layer_norm(ep + "ln2.");
      const std::string dp = "decoder.layer" + std::to_string(l) + ".";
      create_attention(dp + "self.");
      create_layer_norm(dp + "ln1.");
      create_attention(dp + "cross.");
      create_layer_norm(dp + "ln2.");
      create_linear(dp + "ffn.w1", cfg_.d_model, cfg_.ffn_dim);
      store_.create(dp + "ffn.b1", {cfg_.ffn_dim});
      create_linear(dp + "ffn.w2", cfg_.ffn_dim, cfg_.d_model);
      store_.create(dp + "ffn.b2", {cfg_.d_model});
      create_layer_norm(dp + "ln3.");
    }
    create_linear("output.w", cfg_.d_model, cfg_.tgt_vocab);
    store_.create("output.b", {cfg_.tgt_vocab});
  }

  void build_positional_encoding() {
    pos_enc_ = make_var<S>({cfg_.max_len, cfg_.d_model});
    for (std::size_t pos = 0; pos < cfg_.max_len; ++pos)
      for (std::size_t i = 0; i < cfg_.d_model; ++i) {
        const double angle = static_cast<double>(pos) /
                             std::pow(10000.0, static_cast<double>(2 * (i / 2)) /
                                                   static_cast<double>(cfg_.d_model));
        pos_enc_->v[pos * cfg_.d_model + i] =
            static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
      }
  }

  void average_domain_table(const std::string& dst_path,
                            const std::vector<std::string>& source_paths) {
    if (source_paths.empty()) return;
    const auto& dst = store_.at(dst_path);
    std::fill(dst->v.begin(), dst->v.end(), S(0));
    for (const auto& p : source_paths) {
      const auto& src = store_.at(p);
      for (std::size_t k = 0; k < dst->v.size(); ++k) dst->v[k] += src->v[k];
    }
    const S inv = S(1) / S(source_paths.size());
    for (auto& x : dst->v) x *= inv;
  }

  void init_domain_embedding(const std::string& side, const std::string& path,
                             std::size_t vocab, const std::vector<std::string>& tokens,
                             const EmbeddingTable* pretrained) {
    auto& table = store_.create(path, {vocab, cfg_.trans_d});
    for (std::size_t t = 0; t < vocab; ++t) {
      const std::string token =
          t < tokens.size() ? tokens[t] : "#" + std::to_string(t);
      const std::vector<double>* pre =
          pretrained && pretrained->dim == cfg_.trans_d ? pretrained->find(token) : nullptr;
      S* row = table->v.data() + t * cfg_.trans_d;
      if (pre) {
        for (std::size_t k = 0; k < cfg_.trans_d; ++k) row[k] = static_cast<S>((*pre)[k]);
      } else {
        const auto vec = fallback_embedding<S>(cfg_.seed, side, token, cfg_.trans_d);
        std::copy(vec.begin(), vec.end(), row);
      }
    }
  }

  Var<S> positional_slice(std::size_t len) const {
    auto out = make_var<S>({len, cfg_.d_model});
    std::copy(pos_enc_->v.begin(), pos_enc_->v.begin() + static_cast<long>(len * cfg_.d_model),
              out->v.begin());
    return out;
  }

  Var<S> embed_source(Tape<S>* tape, const std::vector<int>& ids, const std::string& domain,
                      TrainMode<S> mode) const {
    Var<S> x;
    if (cfg_.enc_proj) {
      if (!src_trans_.has_domain(domain))
        throw ContractError("encode: unregistered domain: " + domain);
      x = embed_rows(tape, store_.at(src_trans_.emb_path(domain)), ids);
      x = src_trans_.project(tape, store_, x, domain);
      if (cfg_.trans_d != cfg_.d_model)
        x = add_rowwise(tape, matmul(tape, x, store_.at("transmission.src.adapter.w")),
                        store_.at("transmission.src.adapter.b"));
    } else {
      x = embed_rows(tape, store_.at("encoder.embed"), ids);
    }
    x = add(tape, x, positional_slice(ids.size()));
    if (mode.active()) x = dropout(tape, x, mode.dropout, *mode.rng);
    return x;
  }

  Var<S> embed_target(Tape<S>* tape, const std::vector<int>& ids, const std::string& domain,
                      TrainMode<S> mode) const {
    Var<S> x;
    if (cfg_.dec_proj) {
      if (!tgt_trans_.has_domain(domain))
        throw ContractError("decode: unregistered domain: " + domain);
      x = embed_rows(tape, store_.at(tgt_trans_.emb_path(domain)), ids);
      x = tgt_trans_.project(tape, store_, x, domain);
      if (cfg_.trans_d != cfg_.d_model)
        x = add_rowwise(tape, matmul(tape, x, store_.at("transmission.tgt.adapter.w")),
                        store_.at("transmission.tgt.adapter.b"));
    } else {
      x = embed_rows(tape, store_.at("decoder.embed"), ids);
    }
    x = add(tape, x, positional_slice(ids.size()));
    if (mode.active()) x = dropout(tape, x, mode.dropout, *mode.rng);
    return x;
  }

  // nullptr when nothing is masked.
  Var<S> key_pad_mask(std::size_t q_len, const std::vector<char>& key_pad,
                      std::size_t k_len = 0) const {
    if (k_len == 0) k_len = key_pad.size();
    bool any = false;
    for (char f : key_pad) any = any || f;
    if (!any) return nullptr;
    auto mask = make_var<S>({q_len, k_len});
    for (std::size_t i = 0; i < q_len; ++i)
      for (std::size_t j = 0; j < k_len; ++j)
        if (j < key_pad.size() && key_pad[j]) mask->v[i * k_len + j] = S(-1e9);
    return mask;
  }

  Var<S> causal_mask(std::size_t len, const std::vector<char>& key_pad) const {
    auto mask = make_var<S>({len, len});
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < len; ++j)
        if (j > i || (j < key_pad.size() && key_pad[j])) mask->v[i * len + j] = S(-1e9);
    return mask;
  }

  Var<S> attention(Tape<S>* tape, const std::string& prefix, const Var<S>& q_in,
                   const Var<S>& k_in, const Var<S>& v_in, const Var<S>& mask,
                   TrainMode<S> mode) const {
    const std::size_t dh = cfg_.d_model / cfg_.n_heads;
    auto q = add_rowwise(tape, matmul(tape, q_in, store_.at(prefix + "wq")),
                         store_.at(prefix + "bq"));
    auto k = add_rowwise(tape, matmul(tape, k_in, store_.at(prefix + "wk")),
                         store_.at(prefix + "bk"));
    auto v = add_rowwise(tape, matmul(tape, v_in, store_.at(prefix + "wv")),
                         store_.at(prefix + "bv"));
    std::vector<Var<S>> heads;
    heads.reserve(cfg_.n_heads);
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
      auto qh = slice_cols(tape, q, h * dh, dh);
      auto kh = slice_cols(tape, k, h * dh, dh);
      auto vh = slice_cols(tape, v, h * dh, dh);
      auto scores = scale(tape, matmul(tape, qh, transpose(tape, kh)),
                          S(1.0 / std::sqrt(static_cast<double>(dh))));
      if (mask) scores = add(tape, scores, mask);
      auto weights = softmax(tape, scores, 1);
      heads.push_back(matmul(tape, weights, vh));
    }
    auto merged = concat_cols(tape, heads);
    auto out = add_rowwise(tape, matmul(tape, merged, store_.at(prefix + "wo")),
                           store_.at(prefix + "bo"));
    if (mode.active()) out = dropout(tape, out, mode.dropout, *mode.rng);
    return out;
  }

  Var<S> feed_forward(Tape<S>* tape, const std::string& prefix, const Var<S>& x,
                      TrainMode<S> mode) const {
    auto h = relu(tape, add_rowwise(tape, matmul(tape, x, store_.at(prefix + "w1")),
                                    store_.at(prefix + "b1")));
    auto out =
        add_rowwise(tape, matmul(tape, h, store_.at(prefix + "w2")), store_.at(prefix + "b2"));
    if (mode.active()) out = dropout(tape, out, mode.dropout, *mode.rng);
    return out;
  }

  ModelConfig cfg_;
  ParamStore<S> store_;
  TransmissionLayer<S> src_trans_;
  TransmissionLayer<S> tgt_trans_;
  std::vector<std::string> domains_no_proj_;
  std::vector<std::string> src_tokens_, tgt_tokens_;
  std::shared_ptr<const EmbeddingTable> src_pretrained_, tgt_pretrained_;
  Var<S> pos_enc_;
};

}  // namespace metamt
