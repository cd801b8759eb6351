#pragma once

// Shared builders for desk-scale test models and synthetic pipelines.

#include <string>
#include <vector>

#include "metamt/metamt.hpp"

namespace modelutil {

template <class S>
metamt::BaseSpace<S> random_base(std::size_t n, std::size_t d, std::uint64_t seed) {
  metamt::BaseSpace<S> base;
  base.n = n;
  base.d = d;
  base.e_g = metamt::make_var<S>({n, d});
  metamt::Rng rng(seed);
  for (auto& x : base.e_g->v) x = static_cast<S>(rng.uniform(-0.5, 0.5));
  for (std::size_t j = 0; j < n; ++j) base.base_words.push_back("base" + std::to_string(j));
  return base;
}

template <class S>
metamt::TransformerModel<S> tiny_model(std::size_t vocab = 12, bool enc_proj = true,
                                       bool dec_proj = true, std::uint64_t seed = 1,
                                       std::size_t n_layers = 1, std::size_t d_model = 16) {
  metamt::ModelConfig cfg;
  cfg.d_model = d_model;
  cfg.n_layers = n_layers;
  cfg.n_heads = 2;
  cfg.ffn_dim = d_model * 2;
  cfg.dropout = 0.0;
  cfg.max_len = 32;
  cfg.src_vocab = vocab;
  cfg.tgt_vocab = vocab;
  cfg.enc_proj = enc_proj;
  cfg.dec_proj = dec_proj;
  cfg.seed = seed;
  cfg.trans_n = 8;
  cfg.trans_d = d_model;
  return metamt::TransformerModel<S>(
      cfg, enc_proj ? random_base<S>(cfg.trans_n, cfg.trans_d, seed + 100) : metamt::BaseSpace<S>{},
      dec_proj ? random_base<S>(cfg.trans_n, cfg.trans_d, seed + 200) : metamt::BaseSpace<S>{});
}

// Deterministic toy id pairs for a copy-ish task: target = source + offset.
inline std::vector<metamt::IdPair> toy_pairs(std::size_t count, std::size_t vocab,
                                             std::uint64_t seed, int offset = 0) {
  metamt::Rng rng(seed);
  std::vector<metamt::IdPair> out;
  const int lo = 4;
  const int hi = static_cast<int>(vocab) - 1;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = 2 + rng.below(4);
    metamt::IdPair pair;
    pair.second.push_back(metamt::Vocab::bos_id);
    for (std::size_t k = 0; k < len; ++k) {
      const int tok = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
      pair.first.push_back(tok);
      int mapped = tok + offset;
      if (mapped > hi) mapped = lo + (mapped - hi - 1);
      pair.second.push_back(mapped);
    }
    pair.first.push_back(metamt::Vocab::eos_id);
    pair.second.push_back(metamt::Vocab::eos_id);
    out.push_back(std::move(pair));
  }
  return out;
}

inline metamt::DomainDataset toy_dataset(const std::string& id, std::size_t train_n,
                                         std::size_t dev_n, std::size_t test_n,
                                         std::size_t vocab, std::uint64_t seed,
                                         int offset = 0) {
  metamt::DomainDataset d;
  d.domain_id = id;
  d.train = toy_pairs(train_n, vocab, seed, offset);
  d.dev = toy_pairs(dev_n, vocab, seed + 1, offset);
  d.test = toy_pairs(test_n, vocab, seed + 2, offset);
  return d;
}

}  // namespace modelutil
