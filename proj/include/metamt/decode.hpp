#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bpe.hpp"
#include "errors.hpp"
#include "model.hpp"

namespace metamt {

struct BeamHypothesis {
  std::vector<int> tokens;  // starts with <bos>
  double logprob{0.0};
  bool finished{false};

  std::size_t generated() const { return tokens.size() - 1; }
};

namespace detail {

// Hypotheses ordered by score desc, ties broken by token-id lexicographic
// order so decoding is deterministic.
inline bool beam_better(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.tokens < b.tokens;
}

template <class S>
std::vector<double> next_logprobs(const TransformerModel<S>& model, const Var<S>& memory,
                                  const std::vector<int>& src_ids,
                                  const std::vector<int>& prefix, const std::string& domain) {
  auto logits = model.decoder_logits(nullptr, memory, prefix, src_ids, domain);
  const std::size_t v = model.config().tgt_vocab;
  const S* row = logits->v.data() + (prefix.size() - 1) * v;
  double mx = static_cast<double>(row[0]);
  for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, static_cast<double>(row[j]));
  double denom = 0;
  for (std::size_t j = 0; j < v; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
  const double log_denom = std::log(denom) + mx;
  std::vector<double> out(v);
  for (std::size_t j = 0; j < v; ++j) out[j] = static_cast<double>(row[j]) - log_denom;
  return out;
}

}  // namespace detail

// Length-unnormalized beam search. Finished hypotheses keep their slot and
// compete with fresh extensions; search ends when every slot is finished or
// max_len tokens have been generated. Returns the best finished hypothesis,
// or the best live one if none finished.
template <class S>
BeamHypothesis beam_search(const TransformerModel<S>& model, const std::vector<int>& src_ids,
                           const std::string& domain, std::size_t beam, std::size_t max_len,
                           bool length_normalize = false) {
  if (beam < 1) throw ContractError("beam_search: beam must be >= 1");
  if (max_len < 1) throw ContractError("beam_search: max_len must be >= 1");
  auto memory = model.encode(nullptr, src_ids, domain);

  std::vector<BeamHypothesis> beams{BeamHypothesis{{Vocab::bos_id}, 0.0, false}};
  const std::size_t vocab = model.config().tgt_vocab;
  for (std::size_t step = 0; step < max_len; ++step) {
    bool all_finished = true;
    for (const auto& h : beams) all_finished = all_finished && h.finished;
    if (all_finished) break;

    std::vector<BeamHypothesis> candidates;
    for (const auto& h : beams) {
      if (h.finished) {
        candidates.push_back(h);
        continue;
      }
      const auto lp = detail::next_logprobs(model, memory, src_ids, h.tokens, domain);
      for (std::size_t tok = 0; tok < vocab; ++tok) {
        // never propose <pad> or a second <bos>
        if (tok == Vocab::pad_id || tok == Vocab::bos_id) continue;
        BeamHypothesis next = h;
        next.tokens.push_back(static_cast<int>(tok));
        next.logprob += lp[tok];
        next.finished = static_cast<int>(tok) == Vocab::eos_id;
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), detail::beam_better);
    if (candidates.size() > beam) candidates.resize(beam);
    beams = std::move(candidates);
  }

  std::vector<BeamHypothesis> finished;
  for (const auto& h : beams)
    if (h.finished) finished.push_back(h);
  auto pool = finished.empty() ? beams : finished;
  if (length_normalize)
    for (auto& h : pool)
      if (h.generated() > 0) h.logprob /= static_cast<double>(h.generated());
  BeamHypothesis best = pool.front();
  for (const auto& h : pool)
    if (detail::beam_better(h, best)) best = h;
  return best;
}

// Beam search per sentence, BPE-decoded back to plain text. Order-preserving
// and stateless across sentences.
template <class S>
std::vector<std::string> translate_corpus(const TransformerModel<S>& model,
                                          const std::vector<std::string>& lines,
                                          const std::string& domain, std::size_t beam,
                                          std::size_t max_len, const BpeModel& bpe_src,
                                          const Vocab& vocab_src, const Vocab& vocab_tgt,
                                          bool length_normalize = false) {
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const auto& line : lines) {
    std::vector<int> src = encode_ids(vocab_src, bpe_encode(bpe_src, line));
    src.push_back(Vocab::eos_id);
    const auto hyp = beam_search(model, src, domain, beam, max_len, length_normalize);
    std::vector<std::string> tokens;
    for (int id : hyp.tokens)
      if (id != Vocab::bos_id && id != Vocab::eos_id && id != Vocab::pad_id)
        tokens.push_back(vocab_tgt.token(id));
    out.push_back(bpe_decode(tokens));
  }
  return out;
}

}  // namespace metamt
