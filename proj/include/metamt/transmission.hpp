#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace metamt {

// ---------------------------------------------------------------------------
// pretrained embedding tables
// ---------------------------------------------------------------------------

// Text format: first line "count dim", then "word v1 ... vd" per line.
struct EmbeddingTable {
  std::size_t dim{0};
  std::unordered_map<std::string, std::vector<double>> vectors;

  const std::vector<double>* find(const std::string& word) const {
    auto it = vectors.find(word);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("embedding file: missing header: " + path);
  std::istringstream head(line);
  long long count = -1, dim = -1;
  if (!(head >> count >> dim) || count < 0 || dim <= 0)
    throw FormatError("embedding file: bad header \"" + line + "\"");
  EmbeddingTable table;
  table.dim = static_cast<std::size_t>(dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word))
      throw FormatError("embedding file: malformed line " + std::to_string(lineno));
    std::vector<double> vec;
    vec.reserve(table.dim);
    double x;
    while (ls >> x) vec.push_back(x);
    if (!ls.eof())
      throw FormatError("embedding file: malformed float at line " + std::to_string(lineno));
    if (vec.size() != table.dim)
      throw FormatError("embedding file: line " + std::to_string(lineno) + " has " +
                        std::to_string(vec.size()) + " values, expected " +
                        std::to_string(table.dim));
    table.vectors[word] = std::move(vec);
  }
  if (table.vectors.size() != static_cast<std::size_t>(count))
    throw FormatError("embedding file: header declares " + std::to_string(count) +
                      " rows, found " + std::to_string(table.vectors.size()));
  return table;
}

// Deterministic fallback when no pretrained table covers a token: the vector
// is a pure function of (seed, side, token), so re-registering a domain or
// adding one later reproduces identical initial rows.
template <class S>
std::vector<S> fallback_embedding(std::uint64_t seed, const std::string& side,
                                  const std::string& token, std::size_t dim) {
  Rng rng(mix_seed(mix_seed(seed, hash_str(side)), hash_str(token)));
  std::vector<S> out(dim);
  for (auto& x : out) x = static_cast<S>(rng.uniform(-0.1, 0.1));
  return out;
}

// Stand-in for a pretrained general-domain table when no embedding file is
// supplied: the fallback vector scaled to unit L2 norm, matching the scale of
// normalized pretrained vectors.
template <class S>
std::vector<S> synthetic_pretrained_vector(std::uint64_t seed, const std::string& side,
                                           const std::string& token, std::size_t dim) {
  auto vec = fallback_embedding<S>(seed, side, token, dim);
  double norm = 0;
  for (S x : vec) norm += static_cast<double>(x) * static_cast<double>(x);
  norm = std::sqrt(norm);
  if (norm > 0)
    for (auto& x : vec) x = static_cast<S>(x / norm);
  return vec;
}

// ---------------------------------------------------------------------------
// base space
// ---------------------------------------------------------------------------

template <class S>
struct BaseSpace {
  std::vector<std::string> base_words;  // row j holds the embedding of base_words[j]
  std::size_t n{0}, d{0};
  Var<S> e_g;  // constant [n x d]; frozen during training
};

// The n most frequent words covered by the table, rows stacked in frequency
// order (count desc, token asc).
template <class S>
BaseSpace<S> select_base_words(const EmbeddingTable& table,
                               const std::vector<std::pair<std::string, long long>>& freq,
                               std::size_t n, bool normalize_rows = true) {
  std::vector<std::pair<std::string, long long>> covered;
  for (const auto& [word, count] : freq)
    if (table.find(word)) covered.push_back({word, count});
  std::stable_sort(covered.begin(), covered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (n > covered.size())
    throw DataError("select_base_words: requested " + std::to_string(n) +
                    " base words but only " + std::to_string(covered.size()) +
                    " are covered by the embedding table");
  BaseSpace<S> space;
  space.n = n;
  space.d = table.dim;
  space.e_g = make_var<S>({n, table.dim});
  for (std::size_t j = 0; j < n; ++j) {
    space.base_words.push_back(covered[j].first);
    const auto& vec = *table.find(covered[j].first);
    S* row = space.e_g->v.data() + j * table.dim;
    for (std::size_t k = 0; k < table.dim; ++k) row[k] = static_cast<S>(vec[k]);
    if (normalize_rows) {
      double norm = 0;
      for (std::size_t k = 0; k < table.dim; ++k)
        norm += static_cast<double>(row[k]) * static_cast<double>(row[k]);
      norm = std::sqrt(norm);
      if (norm > 0)
        for (std::size_t k = 0; k < table.dim; ++k) row[k] = static_cast<S>(row[k] / norm);
    }
  }
  return space;
}

// ---------------------------------------------------------------------------
// transmission layer
// ---------------------------------------------------------------------------

enum class ScoreNorm { none, softmax, scale_by_n };

enum class InitPolicy { identity, average, random };

inline ScoreNorm parse_score_norm(const std::string& s) {
  if (s == "none") return ScoreNorm::none;
  if (s == "softmax") return ScoreNorm::softmax;
  if (s == "scale_by_n") return ScoreNorm::scale_by_n;
  throw ConfigError("unknown score normalization: " + s);
}

inline InitPolicy parse_init_policy(const std::string& s) {
  if (s == "identity") return InitPolicy::identity;
  if (s == "average") return InitPolicy::average;
  if (s == "random") return InitPolicy::random;
  throw ConfigError("unknown init policy: " + s);
}

inline std::string to_string(ScoreNorm n) {
  switch (n) {
    case ScoreNorm::none: return "none";
    case ScoreNorm::softmax: return "softmax";
    default: return "scale_by_n";
  }
}

inline std::string to_string(InitPolicy p) {
  switch (p) {
    case InitPolicy::identity: return "identity";
    case InitPolicy::average: return "average";
    default: return "random";
  }
}

// Projects per-domain word vectors into the span of the base-word embeddings:
// scores a_j = w * A_i * E_G[j], output = sum_j a_j * E_G[j]. Parameters live
// in the model's store under "transmission.<side>."; this class owns the base
// space and the domain registry.
template <class S>
class TransmissionLayer {
 public:
  TransmissionLayer() = default;
  TransmissionLayer(BaseSpace<S> base, std::string side, ScoreNorm norm)
      : base_(std::move(base)), side_(std::move(side)), norm_(norm) {}

  const BaseSpace<S>& base() const { return base_; }
  const std::string& side() const { return side_; }
  ScoreNorm score_norm() const { return norm_; }
  const std::vector<std::string>& domains() const { return domains_; }
  bool has_domain(const std::string& id) const {
    return std::find(domains_.begin(), domains_.end(), id) != domains_.end();
  }

  std::string proj_path(const std::string& domain) const {
    return "transmission." + side_ + ".proj." + domain;
  }
  std::string emb_path(const std::string& domain) const {
    return "transmission." + side_ + ".emb." + domain;
  }

  // Creates the d x d projection for a new domain. The caller owns creation of
  // the per-domain embedding table (it needs the vocab).
  void register_domain(ParamStore<S>& store, const std::string& domain, InitPolicy policy,
                       std::uint64_t seed) {
    if (has_domain(domain))
      throw ContractError("transmission." + side_ + ": domain already registered: " + domain);
    const std::size_t d = base_.d;
    auto& a = store.create(proj_path(domain), {d, d});
    switch (policy) {
      case InitPolicy::identity:
        for (std::size_t i = 0; i < d; ++i) a->v[i * d + i] = S(1);
        break;
      case InitPolicy::average: {
        if (domains_.empty())
          throw ContractError("transmission: average init with no existing domains");
        for (const auto& existing : domains_) {
          const auto& prev = store.at(proj_path(existing));
          for (std::size_t i = 0; i < a->v.size(); ++i) a->v[i] += prev->v[i];
        }
        const S inv = S(1) / S(domains_.size());
        for (auto& x : a->v) x *= inv;
        break;
      }
      case InitPolicy::random: {
        Rng rng(mix_seed(seed, hash_str(proj_path(domain))));
        const double bound = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& x : a->v) x = static_cast<S>(rng.uniform(-bound, bound));
        break;
      }
    }
    domains_.push_back(domain);
  }

  // x: [L x d] rows of per-domain word vectors; returns [L x d] projections.
  Var<S> project(Tape<S>* tape, const ParamStore<S>& store, const Var<S>& x,
                 const std::string& domain) const {
    if (!has_domain(domain))
      throw ContractError("transmission." + side_ + ": unregistered domain: " + domain);
    const auto& a = store.at(proj_path(domain));
    auto xa = matmul(tape, x, a);                       // [L x d]
    auto e_g_t = transpose<S>(tape, base_.e_g);         // [d x n]
    auto scores = matmul(tape, xa, e_g_t);              // [L x n]
    switch (norm_) {
      case ScoreNorm::none: break;
      case ScoreNorm::softmax: scores = softmax(tape, scores, 1); break;
      case ScoreNorm::scale_by_n: scores = scale(tape, scores, S(1) / S(base_.n)); break;
    }
    return matmul(tape, scores, base_.e_g);             // [L x d]
  }

  // Convenience single-vector form used by tests and tooling.
  std::vector<S> project_vector(const ParamStore<S>& store, const std::vector<S>& w,
                                const std::string& domain) const {
    if (w.size() != base_.d) throw ShapeError("project: input width must equal base d");
    auto x = constant<S>({1, base_.d}, std::vector<S>(w));
    auto out = project(nullptr, store, x, domain);
    return out->v;
  }

  void restore_domains(std::vector<std::string> domains) { domains_ = std::move(domains); }

 private:
  BaseSpace<S> base_;
  std::string side_;
  ScoreNorm norm_{ScoreNorm::none};
  std::vector<std::string> domains_;
};

}  // namespace metamt
