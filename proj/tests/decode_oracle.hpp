#pragma once

// Exhaustive decoding oracle: walks every generatable sequence with the same
// scoring and tie-break rules as the beam, but no pruning. Tiny vocabularies
// only.

#include <string>
#include <vector>

#include "metamt/metamt.hpp"

namespace decode_oracle {

struct Exhaustive {
  const metamt::TransformerModel<float>& model;
  const std::vector<int>& src;
  const std::string& domain;
  std::size_t max_len;
  metamt::Var<float> memory;
  std::vector<metamt::BeamHypothesis> finished, unfinished;

  void walk(metamt::BeamHypothesis hyp) {
    using metamt::Vocab;
    if (hyp.finished) {
      finished.push_back(hyp);
      return;
    }
    if (hyp.generated() == max_len) {
      unfinished.push_back(hyp);
      return;
    }
    const auto lp = metamt::detail::next_logprobs(model, memory, src, hyp.tokens, domain);
    for (std::size_t tok = 0; tok < model.config().tgt_vocab; ++tok) {
      if (tok == Vocab::pad_id || tok == Vocab::bos_id) continue;
      metamt::BeamHypothesis next = hyp;
      next.tokens.push_back(static_cast<int>(tok));
      next.logprob += lp[tok];
      next.finished = static_cast<int>(tok) == Vocab::eos_id;
      walk(next);
    }
  }

  metamt::BeamHypothesis best() {
    memory = model.encode(nullptr, src, domain);
    walk(metamt::BeamHypothesis{{metamt::Vocab::bos_id}, 0.0, false});
    const auto& pool = finished.empty() ? unfinished : finished;
    metamt::BeamHypothesis top = pool.front();
    for (const auto& h : pool)
      if (metamt::detail::beam_better(h, top)) top = h;
    return top;
  }
};

inline metamt::TransformerModel<float> random_tiny(std::uint64_t seed, std::size_t vocab) {
  metamt::ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.ffn_dim = 12;
  cfg.dropout = 0.0;
  cfg.max_len = 10;
  cfg.src_vocab = vocab;
  cfg.tgt_vocab = vocab;
  cfg.enc_proj = false;
  cfg.dec_proj = false;
  cfg.seed = seed;
  metamt::TransformerModel<float> model(cfg, {}, {});
  model.register_domain("dom");
  metamt::Rng rng(metamt::mix_seed(seed, 0x0f));
  for (auto& x : model.store().at("output.w")->v)
    x = static_cast<float>(rng.uniform(-2, 2));
  return model;
}

}  // namespace decode_oracle
