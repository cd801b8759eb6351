#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace metamt {

// Single-file checkpoint container, version 1. All integers little-endian;
// str = u32 byte count + UTF-8 bytes; f32 = IEEE-754 single, little-endian.
//
//   magic   8 bytes "MMTCKPT1"
//   u32     version (1)
//   sections, each: 4-byte tag, u64 payload length, payload
//     "CFG "  str(model-config text: key=value lines + domains=...)
//     "RUN "  str(run-config echo, opaque)
//     "SBAS"  u64 n, u64 d, n x str(base word), n*d x f32   (iff enc_proj)
//     "TBAS"  same for the target side                      (iff dec_proj)
//     "PAR "  u64 count, then per parameter in path order:
//               str(path), u32 ndim, ndim x u64 dims, numel x f32
//     "OPT "  u32 present, then if present: u64 adam step count, f32 lr,
//               u64 slots, per slot: str(path), u64 len, len x f32 m,
//               len x f32 v
//     "RNG "  u64 seed, u64 epoch, u64 step
//   u64     CRC-64/XZ of every preceding byte (magic included)

namespace ckpt {

constexpr char kMagic[8] = {'M', 'M', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

inline std::uint64_t crc64(const std::uint8_t* data, std::size_t len,
                           std::uint64_t crc = 0) {
  // CRC-64/XZ, reflected polynomial.
  static const auto table = [] {
    std::array<std::uint64_t, 256> t{};
    for (std::uint64_t i = 0; i < 256; ++i) {
      std::uint64_t c = i;
      for (int k = 0; k < 8; ++k) c = (c >> 1) ^ ((c & 1) ? 0xC96C5795D7870F42ULL : 0);
      t[i] = c;
    }
    return t;
  }();
  crc = ~crc;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return ~crc;
}

struct Writer {
  std::vector<std::uint8_t> bytes;

  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f32(float x) {
    std::uint32_t b;
    std::memcpy(&b, &x, 4);
    u32(b);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
};

struct Reader {
  const std::uint8_t* p;
  const std::uint8_t* end;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n)
      throw CheckpointError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    return x;
  }
  float f32() {
    const std::uint32_t b = u32();
    float x;
    std::memcpy(&x, &b, 4);
    return x;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
};

inline std::string bool_str(bool b) { return b ? "1" : "0"; }

inline std::string config_text(const ModelConfig& cfg, const std::vector<std::string>& domains) {
  char num[64];
  std::ostringstream out;
  out << "d_model=" << cfg.d_model << "\n";
  out << "n_layers=" << cfg.n_layers << "\n";
  out << "n_heads=" << cfg.n_heads << "\n";
  out << "ffn_dim=" << cfg.ffn_dim << "\n";
  std::snprintf(num, sizeof(num), "%.17g", cfg.dropout);
  out << "dropout=" << num << "\n";
  out << "max_len=" << cfg.max_len << "\n";
  out << "src_vocab=" << cfg.src_vocab << "\n";
  out << "tgt_vocab=" << cfg.tgt_vocab << "\n";
  out << "enc_proj=" << bool_str(cfg.enc_proj) << "\n";
  out << "dec_proj=" << bool_str(cfg.dec_proj) << "\n";
  std::snprintf(num, sizeof(num), "%.17g", cfg.label_smoothing);
  out << "label_smoothing=" << num << "\n";
  out << "seed=" << cfg.seed << "\n";
  out << "trans_n=" << cfg.trans_n << "\n";
  out << "trans_d=" << cfg.trans_d << "\n";
  out << "trans_normalize_rows=" << bool_str(cfg.trans_normalize_rows) << "\n";
  out << "trans_score_norm=" << to_string(cfg.trans_score_norm) << "\n";
  std::string doms;
  for (const auto& d : domains) {
    if (!doms.empty()) doms += ",";
    doms += d;
  }
  out << "domains=" << doms << "\n";
  return out.str();
}

inline std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CheckpointError("checkpoint: malformed config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

template <class S>
void write_base(Writer& w, const BaseSpace<S>& base) {
  w.u64(base.n);
  w.u64(base.d);
  for (const auto& word : base.base_words) w.str(word);
  for (S x : base.e_g->v) w.f32(static_cast<float>(x));
}

template <class S>
BaseSpace<S> read_base(Reader& r) {
  BaseSpace<S> base;
  base.n = r.u64();
  base.d = r.u64();
  for (std::size_t i = 0; i < base.n; ++i) base.base_words.push_back(r.str());
  base.e_g = make_var<S>({base.n, base.d});
  for (auto& x : base.e_g->v) x = static_cast<S>(r.f32());
  return base;
}

}  // namespace ckpt

template <class S>
struct TrainCheckpoint {
  TransformerModel<S> model;
  Adam<S> adam;
  bool has_adam{false};
  std::uint64_t seed{0};
  std::uint64_t epoch{0};
  std::uint64_t step{0};
  std::string run_config;
};

template <class S>
void save_checkpoint(const TransformerModel<S>& model, const Adam<S>* adam,
                     std::uint64_t seed, std::uint64_t epoch, std::uint64_t step,
                     const std::string& run_config, const std::string& path) {
  ckpt::Writer w;
  w.bytes.insert(w.bytes.end(), ckpt::kMagic, ckpt::kMagic + 8);
  w.u32(ckpt::kVersion);

  auto section = [&w](const char* tag, const std::vector<std::uint8_t>& payload) {
    w.bytes.insert(w.bytes.end(), tag, tag + 4);
    w.u64(payload.size());
    w.bytes.insert(w.bytes.end(), payload.begin(), payload.end());
  };

  {
    ckpt::Writer s;
    s.str(ckpt::config_text(model.config(), model.registered_domains()));
    section("CFG ", s.bytes);
  }
  {
    ckpt::Writer s;
    s.str(run_config);
    section("RUN ", s.bytes);
  }
  if (model.config().enc_proj) {
    ckpt::Writer s;
    ckpt::write_base(s, model.src_transmission().base());
    section("SBAS", s.bytes);
  }
  if (model.config().dec_proj) {
    ckpt::Writer s;
    ckpt::write_base(s, model.tgt_transmission().base());
    section("TBAS", s.bytes);
  }
  {
    ckpt::Writer s;
    s.u64(model.store().size());
    for (const auto& [p, var] : model.store()) {
      s.str(p);
      s.u32(static_cast<std::uint32_t>(var->shape.size()));
      for (auto d : var->shape) s.u64(d);
      for (S x : var->v) s.f32(static_cast<float>(x));
    }
    section("PAR ", s.bytes);
  }
  {
    ckpt::Writer s;
    s.u32(adam ? 1 : 0);
    if (adam) {
      s.u64(static_cast<std::uint64_t>(adam->steps()));
      s.f32(static_cast<float>(adam->hyper().lr));
      s.u64(adam->slots().size());
      for (const auto& [p, slot] : adam->slots()) {
        s.str(p);
        s.u64(slot.m.size());
        for (S x : slot.m) s.f32(static_cast<float>(x));
        for (S x : slot.v) s.f32(static_cast<float>(x));
      }
    }
    section("OPT ", s.bytes);
  }
  {
    ckpt::Writer s;
    s.u64(seed);
    s.u64(epoch);
    s.u64(step);
    section("RNG ", s.bytes);
  }

  w.u64(ckpt::crc64(w.bytes.data(), w.bytes.size()));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + tmp);
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw IoError("short write on checkpoint: " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot move checkpoint into place: " + path);
  }
}

template <class S>
TrainCheckpoint<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 8 + 4 + 8 || std::memcmp(bytes.data(), ckpt::kMagic, 8) != 0)
    throw CheckpointVersionError("checkpoint: bad magic in " + path);

  const std::uint64_t stored_crc =
      ckpt::Reader{bytes.data() + bytes.size() - 8, bytes.data() + bytes.size()}.u64();
  if (ckpt::crc64(bytes.data(), bytes.size() - 8) != stored_crc)
    throw CheckpointChecksumError("checkpoint: checksum mismatch in " + path);

  ckpt::Reader r{bytes.data() + 8, bytes.data() + bytes.size() - 8};
  const std::uint32_t version = r.u32();
  if (version != ckpt::kVersion)
    throw CheckpointVersionError("checkpoint: unsupported version " +
                                 std::to_string(version));

  std::map<std::string, std::pair<const std::uint8_t*, std::size_t>> sections;
  while (r.p < r.end) {
    r.need(4);
    std::string tag(reinterpret_cast<const char*>(r.p), 4);
    r.p += 4;
    const std::uint64_t len = r.u64();
    r.need(len);
    sections[tag] = {r.p, len};
    r.p += len;
  }
  auto open = [&sections](const char* tag) {
    auto it = sections.find(tag);
    if (it == sections.end())
      throw CheckpointError(std::string("checkpoint: missing section ") + tag);
    return ckpt::Reader{it->second.first, it->second.first + it->second.second};
  };

  auto cfg_reader = open("CFG ");
  const auto kv = ckpt::parse_kv(cfg_reader.str());
  auto get = [&kv](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw CheckpointError("checkpoint: config missing key " + key);
    return it->second;
  };
  ModelConfig cfg;
  cfg.d_model = std::stoull(get("d_model"));
  cfg.n_layers = std::stoull(get("n_layers"));
  cfg.n_heads = std::stoull(get("n_heads"));
  cfg.ffn_dim = std::stoull(get("ffn_dim"));
  cfg.dropout = std::stod(get("dropout"));
  cfg.max_len = std::stoull(get("max_len"));
  cfg.src_vocab = std::stoull(get("src_vocab"));
  cfg.tgt_vocab = std::stoull(get("tgt_vocab"));
  cfg.enc_proj = get("enc_proj") == "1";
  cfg.dec_proj = get("dec_proj") == "1";
  cfg.label_smoothing = std::stod(get("label_smoothing"));
  cfg.seed = std::stoull(get("seed"));
  cfg.trans_n = std::stoull(get("trans_n"));
  cfg.trans_d = std::stoull(get("trans_d"));
  cfg.trans_normalize_rows = get("trans_normalize_rows") == "1";
  cfg.trans_score_norm = parse_score_norm(get("trans_score_norm"));
  std::vector<std::string> domains;
  {
    std::istringstream ds(get("domains"));
    std::string d;
    while (std::getline(ds, d, ','))
      if (!d.empty()) domains.push_back(d);
  }

  BaseSpace<S> src_base, tgt_base;
  if (cfg.enc_proj) {
    auto s = open("SBAS");
    src_base = ckpt::read_base<S>(s);
  }
  if (cfg.dec_proj) {
    auto s = open("TBAS");
    tgt_base = ckpt::read_base<S>(s);
  }

  TransformerModel<S> model(cfg, std::move(src_base), std::move(tgt_base));
  for (const auto& d : domains) model.register_domain(d);

  auto pr = open("PAR ");
  const std::uint64_t count = pr.u64();
  std::vector<std::string> loaded_paths;
  std::map<std::string, std::pair<Shape, std::vector<float>>> records;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string p = pr.str();
    const std::uint32_t ndim = pr.u32();
    Shape shape;
    for (std::uint32_t k = 0; k < ndim; ++k) shape.push_back(pr.u64());
    std::vector<float> data(numel(shape));
    for (auto& x : data) x = pr.f32();
    loaded_paths.push_back(p);
    records[p] = {std::move(shape), std::move(data)};
  }

  const auto expected = model.store().paths();
  for (const auto& p : expected)
    if (!records.count(p))
      throw CheckpointPathError("checkpoint: missing parameter " + p);
  for (const auto& p : loaded_paths)
    if (!model.store().contains(p))
      throw CheckpointPathError("checkpoint: unexpected parameter " + p);

  for (const auto& [p, rec] : records) {
    const auto& var = model.store().at(p);
    if (rec.first != var->shape)
      throw CheckpointPathError("checkpoint: shape mismatch at " + p);
    for (std::size_t k = 0; k < rec.second.size(); ++k)
      var->v[k] = static_cast<S>(rec.second[k]);
  }

  TrainCheckpoint<S> out{std::move(model), Adam<S>{}, false, 0, 0, 0, ""};

  auto orr = open("OPT ");
  if (orr.u32() == 1) {
    const auto t = static_cast<std::int64_t>(orr.u64());
    const float lr = orr.f32();
    const std::uint64_t slots = orr.u64();
    std::map<std::string, typename Adam<S>::Slot> restored;
    for (std::uint64_t i = 0; i < slots; ++i) {
      const std::string p = orr.str();
      const std::uint64_t n = orr.u64();
      typename Adam<S>::Slot slot;
      slot.m.resize(n);
      slot.v.resize(n);
      for (auto& x : slot.m) x = static_cast<S>(orr.f32());
      for (auto& x : slot.v) x = static_cast<S>(orr.f32());
      restored[p] = std::move(slot);
    }
    out.adam = Adam<S>(typename Adam<S>::Hyper{static_cast<S>(lr)});
    out.adam.restore(t, std::move(restored));
    out.has_adam = true;
  }

  auto rr = open("RNG ");
  out.seed = rr.u64();
  out.epoch = rr.u64();
  out.step = rr.u64();

  auto runr = open("RUN ");
  out.run_config = runr.str();
  return out;
}

}  // namespace metamt
