#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "metamt/metamt.hpp"
#include "modelutil.hpp"

using namespace metamt;

namespace {

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void reseal(std::vector<std::uint8_t>& bytes) {
  bytes.resize(bytes.size() - 8);
  const std::uint64_t crc = ckpt::crc64(bytes.data(), bytes.size());
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
}

struct TempPath {
  std::string path;
  explicit TempPath(std::string p) : path(std::move(p)) {}
  ~TempPath() { std::remove(path.c_str()); }
};

TransformerModel<float> checkpoint_model() {
  auto model = modelutil::tiny_model<float>(12, true, true, 91);
  model.register_domain("alpha");
  model.register_domain("beta");
  return model;
}

}  // namespace

TEST_CASE("checkpoint roundtrip restores every byte of state") {
  auto model = checkpoint_model();

  // give Adam some non-trivial moments
  Adam<float> adam(Adam<float>::Hyper{1e-3f});
  std::vector<int> src{4, 5, Vocab::eos_id};
  std::vector<int> tgt{Vocab::bos_id, 6, Vocab::eos_id};
  for (int i = 0; i < 3; ++i) {
    Tape<float> tape;
    model.store().zero_grads();
    auto loss = model.forward_loss(&tape, src, tgt, "alpha");
    tape.backward(loss);
    adam.step(model.store(), model.partition().all);
  }

  TempPath f("ckpt_roundtrip.bin");
  save_checkpoint(model, &adam, 1234, 5, 678, "run.label=test\n", f.path);
  auto loaded = load_checkpoint<float>(f.path);

  CHECK(loaded.seed == 1234);
  CHECK(loaded.epoch == 5);
  CHECK(loaded.step == 678);
  CHECK(loaded.run_config == "run.label=test\n");
  CHECK(loaded.has_adam);
  CHECK(loaded.adam.steps() == adam.steps());
  CHECK(loaded.model.registered_domains() == model.registered_domains());

  for (const auto& [p, var] : model.store()) CHECK(loaded.model.store().at(p)->v == var->v);
  for (const auto& [p, slot] : adam.slots()) {
    CHECK(loaded.adam.slots().at(p).m == slot.m);
    CHECK(loaded.adam.slots().at(p).v == slot.v);
  }
  CHECK(loaded.model.src_transmission().base().base_words ==
        model.src_transmission().base().base_words);
  CHECK(loaded.model.src_transmission().base().e_g->v == model.src_transmission().base().e_g->v);
}

TEST_CASE("identical state produces identical checkpoint files") {
  auto model = checkpoint_model();
  TempPath a("ckpt_a.bin"), b("ckpt_b.bin");
  save_checkpoint<float>(model, nullptr, 7, 0, 0, "", a.path);
  save_checkpoint<float>(model, nullptr, 7, 0, 0, "", b.path);
  CHECK(read_bytes(a.path) == read_bytes(b.path));
}

TEST_CASE("payload tampering is caught by the checksum") {
  auto model = checkpoint_model();
  TempPath f("ckpt_tamper.bin");
  save_checkpoint<float>(model, nullptr, 7, 0, 0, "", f.path);
  auto bytes = read_bytes(f.path);
  bytes[bytes.size() / 2] ^= 0x40;
  write_bytes(f.path, bytes);
  CHECK_THROWS_AS(load_checkpoint<float>(f.path), CheckpointChecksumError);
}

TEST_CASE("unknown version raises a version error") {
  auto model = checkpoint_model();
  TempPath f("ckpt_version.bin");
  save_checkpoint<float>(model, nullptr, 7, 0, 0, "", f.path);
  auto bytes = read_bytes(f.path);
  bytes[8] = 99;  // version field follows the 8-byte magic
  reseal(bytes);
  write_bytes(f.path, bytes);
  CHECK_THROWS_AS(load_checkpoint<float>(f.path), CheckpointVersionError);

  auto garbage = read_bytes(f.path);
  garbage[0] = 'X';
  write_bytes(f.path, garbage);
  CHECK_THROWS_AS(load_checkpoint<float>(f.path), CheckpointVersionError);
}

TEST_CASE("config/parameter mismatch raises a path error naming the offender") {
  auto model = checkpoint_model();
  TempPath f("ckpt_paths.bin");
  save_checkpoint<float>(model, nullptr, 7, 0, 0, "", f.path);

  // rewrite the CFG section to forget domain "beta"; its parameters remain
  auto bytes = read_bytes(f.path);
  ckpt::Reader r{bytes.data() + 12, bytes.data() + bytes.size() - 8};
  std::vector<std::uint8_t> rebuilt(bytes.begin(), bytes.begin() + 12);
  while (r.p < r.end) {
    std::string tag(reinterpret_cast<const char*>(r.p), 4);
    r.p += 4;
    const std::uint64_t len = r.u64();
    std::vector<std::uint8_t> payload(r.p, r.p + len);
    r.p += len;
    if (tag == "CFG ") {
      ckpt::Reader cr{payload.data(), payload.data() + payload.size()};
      std::string text = cr.str();
      const auto pos = text.find(",beta");
      REQUIRE(pos != std::string::npos);
      text.erase(pos, 5);
      ckpt::Writer cw;
      cw.str(text);
      payload = cw.bytes;
    }
    ckpt::Writer sw;
    rebuilt.insert(rebuilt.end(), tag.begin(), tag.end());
    sw.u64(payload.size());
    rebuilt.insert(rebuilt.end(), sw.bytes.begin(), sw.bytes.end());
    rebuilt.insert(rebuilt.end(), payload.begin(), payload.end());
  }
  rebuilt.resize(rebuilt.size() + 8);
  reseal(rebuilt);
  write_bytes(f.path, rebuilt);

  try {
    load_checkpoint<float>(f.path);
    FAIL("expected CheckpointPathError");
  } catch (const CheckpointPathError& e) {
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }
}

TEST_CASE("resume from a mid-run checkpoint matches uninterrupted training") {
  auto data = modelutil::toy_dataset("alpha", 24, 10, 8, 12, 3);
  TempPath f("ckpt_resume.bin");

  auto run_steps = [&data](TransformerModel<float>& model, Adam<float>& adam, int from,
                           int to, std::vector<float>& losses, const std::string& save_at) {
    const auto paths = model.partition().all;
    auto batches = make_batches(data.train, 8, Vocab::pad_id, 99);
    for (int step = from; step < to; ++step) {
      Tape<float> tape;
      model.store().zero_grads();
      auto loss =
          metamt::detail::batch_loss(model, &tape, batches[step % batches.size()], "alpha", {});
      tape.backward(loss);
      adam.step(model.store(), paths);
      losses.push_back(loss->v[0]);
      if (!save_at.empty() && step == 24)
        save_checkpoint(model, &adam, 9, 0, static_cast<std::uint64_t>(step + 1), "", save_at);
    }
  };

  auto continuous = checkpoint_model();
  Adam<float> adam_c(Adam<float>::Hyper{1e-3f});
  std::vector<float> losses_c;
  run_steps(continuous, adam_c, 0, 50, losses_c, f.path);

  auto resumed_state = load_checkpoint<float>(f.path);
  REQUIRE(resumed_state.has_adam);
  REQUIRE(resumed_state.step == 25);
  std::vector<float> losses_r;
  run_steps(resumed_state.model, resumed_state.adam, 25, 50, losses_r, "");

  REQUIRE(losses_r.size() == 25);
  for (std::size_t i = 0; i < losses_r.size(); ++i) CHECK(losses_r[i] == losses_c[25 + i]);
  for (const auto& [p, var] : continuous.store())
    CHECK(resumed_state.model.store().at(p)->v == var->v);
}
