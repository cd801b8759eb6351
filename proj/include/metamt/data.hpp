#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bpe.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace metamt {

struct ParallelCorpus {
  std::string domain_id;
  std::vector<std::pair<std::string, std::string>> pairs;  // (source, target)
};

struct LoadResult {
  ParallelCorpus corpus;
  std::size_t dropped{0};
};

inline std::string strip_ws(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  for (const auto& l : lines) out << l << "\n";
}

// Line-aligned parallel files; pairs with a blank side are dropped and counted.
inline LoadResult load_parallel(const std::string& src_path, const std::string& tgt_path,
                                const std::string& domain_id) {
  const auto src = read_lines(src_path);
  const auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size())
    throw DataError("load_parallel: line count mismatch: " + src_path + " has " +
                    std::to_string(src.size()) + " lines, " + tgt_path + " has " +
                    std::to_string(tgt.size()));
  LoadResult result;
  result.corpus.domain_id = domain_id;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto s = strip_ws(src[i]);
    const auto t = strip_ws(tgt[i]);
    if (s.empty() || t.empty()) {
      ++result.dropped;
      continue;
    }
    result.corpus.pairs.push_back({s, t});
  }
  return result;
}

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

struct TextDataset {
  std::string domain_id;
  std::vector<std::pair<std::string, std::string>> train, dev, test;
};

// Seeded shuffle then contiguous slicing. Splits partition the corpus.
inline TextDataset split_dataset(const ParallelCorpus& corpus, double train_ratio,
                                 double dev_ratio, double test_ratio, std::uint64_t seed) {
  if (train_ratio <= 0 || dev_ratio <= 0 || test_ratio <= 0)
    throw ContractError("split_dataset: ratios must be positive");
  if (std::abs(train_ratio + dev_ratio + test_ratio - 1.0) > 1e-9)
    throw ContractError("split_dataset: ratios must sum to 1");
  auto pairs = corpus.pairs;
  Rng rng(mix_seed(seed, hash_str(corpus.domain_id)));
  rng.shuffle(pairs);
  const std::size_t n = pairs.size();
  const std::size_t n_train = static_cast<std::size_t>(train_ratio * static_cast<double>(n));
  const std::size_t n_dev = static_cast<std::size_t>(dev_ratio * static_cast<double>(n));
  const std::size_t n_test = n - n_train - n_dev;
  if (n_train == 0 || n_dev == 0 || n_test == 0)
    throw DataError("split_dataset: empty split for corpus of " + std::to_string(n) +
                    " pairs (" + corpus.domain_id + ")");
  TextDataset out;
  out.domain_id = corpus.domain_id;
  out.train.assign(pairs.begin(), pairs.begin() + static_cast<long>(n_train));
  out.dev.assign(pairs.begin() + static_cast<long>(n_train),
                 pairs.begin() + static_cast<long>(n_train + n_dev));
  out.test.assign(pairs.begin() + static_cast<long>(n_train + n_dev), pairs.end());
  return out;
}

// ---------------------------------------------------------------------------
// synthetic multi-domain cipher task
// ---------------------------------------------------------------------------

struct SyntheticTaskSpec {
  std::size_t num_domains{4};
  std::size_t shared_vocab{48};
  std::size_t exclusive_per_domain{8};
  std::size_t polysemy{8};          // leading shared tokens; target image differs per domain
  std::size_t len_min{4};
  std::size_t len_max{9};
  std::size_t pairs_per_domain{1000};
  std::size_t heldout{0};           // trailing domains reserved for adaptation
  std::size_t heldout_pairs{0};     // pair count for held-out domains (0: same as the rest)
  double zipf_exponent{1.0};
  std::uint64_t seed{1};
  bool swap_noise{false};           // adjacent-swap on the target side

  std::size_t pairs_for(std::size_t domain) const {
    const bool is_heldout = heldout > 0 && domain + heldout >= num_domains;
    return is_heldout && heldout_pairs > 0 ? heldout_pairs : pairs_per_domain;
  }

  void validate() const {
    if (num_domains == 0) throw ContractError("synth: num_domains must be >= 1");
    if (polysemy > shared_vocab) throw ContractError("synth: polysemy set exceeds shared vocab");
    if (len_min == 0 || len_max < len_min) throw ContractError("synth: bad length range");
    if (heldout >= num_domains) throw ContractError("synth: heldout leaves no training domain");
    for (std::size_t d = 0; d < num_domains; ++d)
      if (pairs_for(d) < 10) throw ContractError("synth: pair counts must be >= 10");
  }
};

// Pronounceable unique token strings; indices below 4900 yield two syllables.
inline std::string synth_token(std::size_t index) {
  static const char cons[] = {'b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'};
  static const char vow[] = {'a', 'e', 'i', 'o', 'u'};
  std::string out;
  std::size_t x = index;
  for (int s = 0; s < 2 || x > 0; ++s) {
    out += cons[(x % 70) % 14];
    out += vow[(x % 70) / 14];
    x /= 70;
  }
  return out;
}

struct SyntheticTask {
  std::vector<ParallelCorpus> corpora;                       // one per domain
  std::vector<std::map<std::string, std::string>> ciphers;   // per-domain source->target map
  std::vector<std::vector<std::string>> source_vocab;        // per-domain, in rank order

  std::string apply_cipher(std::size_t domain, const std::string& source_line) const {
    std::string out;
    for (const auto& tok : split_ws(source_line)) {
      if (!out.empty()) out += ' ';
      auto it = ciphers[domain].find(tok);
      out += it == ciphers[domain].end() ? tok : it->second;
    }
    return out;
  }
};

// Per-domain substitution cipher over Zipf-sampled source sentences. Polysemy
// tokens (the most frequent shared tokens) map to a different target image in
// every domain: a shared base word plus a domain-assigned suffix drawn from a
// suffix alphabet common to all domains (domains permute the assignment, so a
// new domain is a new assignment over already-seen target material). All
// other shared tokens map identically across domains.
inline SyntheticTask synth_generate(const SyntheticTaskSpec& spec) {
  spec.validate();
  SyntheticTask task;

  for (std::size_t dom = 0; dom < spec.num_domains; ++dom) {
    // Rank order interleaves shared and exclusive tokens so domain-exclusive
    // vocabulary stays frequent; rank 0 is always shared.
    std::vector<std::string> ranked;
    std::map<std::string, std::string> cipher;
    std::size_t si = 0, ei = 0;
    while (si < spec.shared_vocab || ei < spec.exclusive_per_domain) {
      if (si < spec.shared_vocab) {
        const std::string tok = synth_token(si);
        ranked.push_back(tok);
        if (si < spec.polysemy) {
          const std::size_t suffix = (si + dom) % spec.num_domains;
          cipher[tok] = synth_token(6000 + si) + " " + synth_token(7000 + suffix);
        } else {
          cipher[tok] = synth_token(5000 + si);
        }
        ++si;
      }
      if (ei < spec.exclusive_per_domain) {
        const std::string tok = synth_token(1000 + dom * 64 + ei);
        ranked.push_back(tok);
        cipher[tok] = synth_token(9000 + dom * 64 + ei);
        ++ei;
      }
    }

    std::vector<double> cdf(ranked.size());
    double acc = 0;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_exponent);
      cdf[r] = acc;
    }

    ParallelCorpus corpus;
    corpus.domain_id = "dom" + std::to_string(dom);
    Rng rng(mix_seed(spec.seed, 0x5e17 + dom));
    for (std::size_t p = 0; p < spec.pairs_for(dom); ++p) {
      const std::size_t len =
          spec.len_min + static_cast<std::size_t>(rng.below(spec.len_max - spec.len_min + 1));
      std::string src, tgt_tokens;
      std::vector<std::string> tgt;
      for (std::size_t k = 0; k < len; ++k) {
        const double u = rng.next_double() * acc;
        const std::size_t r = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        const std::string& tok = ranked[std::min(r, ranked.size() - 1)];
        if (!src.empty()) src += ' ';
        src += tok;
        tgt.push_back(cipher.at(tok));
      }
      if (spec.swap_noise && tgt.size() >= 2) {
        const std::size_t i = static_cast<std::size_t>(rng.below(tgt.size() - 1));
        std::swap(tgt[i], tgt[i + 1]);
      }
      for (const auto& t : tgt) {
        if (!tgt_tokens.empty()) tgt_tokens += ' ';
        tgt_tokens += t;
      }
      corpus.pairs.push_back({src, tgt_tokens});
    }
    task.corpora.push_back(std::move(corpus));
    task.ciphers.push_back(std::move(cipher));
    task.source_vocab.push_back(std::move(ranked));
  }
  return task;
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

using IdPair = std::pair<std::vector<int>, std::vector<int>>;

struct Batch {
  std::vector<std::vector<int>> src, tgt;      // padded to per-batch max length
  std::vector<std::size_t> src_len, tgt_len;   // true lengths
};

// Length-bucketed batches in seeded deterministic order; every pair appears
// exactly once.
inline std::vector<Batch> make_batches(const std::vector<IdPair>& split, std::size_t batch_size,
                                       int pad_id, std::uint64_t seed) {
  if (batch_size < 1) throw ContractError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(split.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = std::make_pair(split[a].first.size(), split[a].second.size());
    const auto kb = std::make_pair(split[b].first.size(), split[b].second.size());
    return ka < kb;
  });

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    std::size_t max_s = 0, max_t = 0;
    for (std::size_t k = start; k < end; ++k) {
      max_s = std::max(max_s, split[order[k]].first.size());
      max_t = std::max(max_t, split[order[k]].second.size());
    }
    for (std::size_t k = start; k < end; ++k) {
      const auto& pair = split[order[k]];
      b.src_len.push_back(pair.first.size());
      b.tgt_len.push_back(pair.second.size());
      auto s = pair.first;
      s.resize(max_s, pad_id);
      auto t = pair.second;
      t.resize(max_t, pad_id);
      b.src.push_back(std::move(s));
      b.tgt.push_back(std::move(t));
    }
    batches.push_back(std::move(b));
  }
  Rng rng(mix_seed(seed, 0xba7c4));
  rng.shuffle(batches);
  return batches;
}

// Unpadded view of one batch row.
inline IdPair batch_row(const Batch& b, std::size_t i) {
  IdPair out;
  out.first.assign(b.src[i].begin(), b.src[i].begin() + static_cast<long>(b.src_len[i]));
  out.second.assign(b.tgt[i].begin(), b.tgt[i].begin() + static_cast<long>(b.tgt_len[i]));
  return out;
}

}  // namespace metamt
