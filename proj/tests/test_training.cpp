#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "metamt/metamt.hpp"
#include "modelutil.hpp"

using namespace metamt;

namespace {

constexpr std::size_t kVocab = 14;

TrainConfig fast_cfg() {
  TrainConfig cfg;
  cfg.inner_steps = 24;
  cfg.meta_steps = 8;
  cfg.finetune_steps = 24;
  cfg.eval_every = 8;
  cfg.patience = 5;
  cfg.batch_size = 8;
  cfg.epochs = 1;
  cfg.lr = 3e-3;
  cfg.meta_lr = 0.05;
  cfg.seed = 42;
  return cfg;
}

TransformerModel<float> make_model(std::uint64_t seed, const std::vector<std::string>& domains) {
  auto model = modelutil::tiny_model<float>(kVocab, true, true, seed);
  for (const auto& d : domains) model.register_domain(d);
  return model;
}

bool params_equal(const TransformerModel<float>& a, const TransformerModel<float>& b,
                  const std::vector<std::string>& paths) {
  for (const auto& p : paths)
    if (a.store().at(p)->v != b.store().at(p)->v) return false;
  return true;
}

std::vector<std::string> non_meta_paths(const TransformerModel<float>& m) {
  const auto part = m.partition();
  std::set<std::string> meta(part.meta.begin(), part.meta.end());
  std::vector<std::string> out;
  for (const auto& p : part.all)
    if (!meta.count(p)) out.push_back(p);
  return out;
}

}  // namespace

TEST_CASE("model_training_step: zero steps is the identity, training converges") {
  auto data = modelutil::toy_dataset("d0", 16, 12, 8, kVocab, 7);
  auto model = make_model(5, {"d0"});

  auto cfg = fast_cfg();
  cfg.inner_steps = 0;
  auto same = model_training_step(model, data, cfg, 1);
  CHECK(params_equal(model, same, model.partition().all));

  cfg = fast_cfg();
  cfg.inner_steps = 300;
  cfg.patience = 100;
  TrainLog log;
  auto trained = model_training_step(model, data, cfg, 1, 0, &log);
  double first_loss = -1, last_loss = -1;
  for (const auto& r : log.records())
    if (r.phase == "model" && std::isfinite(r.loss)) {
      if (first_loss < 0) first_loss = r.loss;
      last_loss = r.loss;
    }
  CHECK(last_loss < first_loss);

  // live model untouched (snapshot isolation)
  CHECK_FALSE(params_equal(model, trained, model.partition().all));
  auto again = model_training_step(model, data, cfg, 1);
  CHECK(params_equal(trained, again, model.partition().all));
}

TEST_CASE("meta_training_step freezes everything outside the meta set") {
  auto data_i = modelutil::toy_dataset("d0", 16, 12, 8, kVocab, 7, 0);
  auto data_j = modelutil::toy_dataset("d1", 16, 12, 8, kVocab, 8, 1);
  auto model = make_model(6, {"d0", "d1"});
  auto cfg = fast_cfg();

  auto theta_i = model_training_step(model, data_i, cfg, 11);
  auto theta_i_prime = meta_training_step(theta_i, data_j, cfg, 12);

  CHECK(params_equal(theta_i, theta_i_prime, non_meta_paths(model)));
  bool any_meta_changed = false;
  for (const auto& p : model.partition().meta)
    if (theta_i.store().at(p)->v != theta_i_prime.store().at(p)->v) any_meta_changed = true;
  CHECK(any_meta_changed);

  auto cfg0 = cfg;
  cfg0.meta_steps = 0;
  auto unchanged = meta_training_step(theta_i, data_j, cfg0, 12);
  CHECK(params_equal(theta_i, unchanged, model.partition().all));

  auto small = data_j;
  small.dev.resize(9);
  CHECK_THROWS_AS(meta_training_step(theta_i, small, cfg, 12), DataError);
}

TEST_CASE("meta training uses only the dev split of domain j") {
  auto data_i = modelutil::toy_dataset("d0", 16, 12, 8, kVocab, 7, 0);
  auto data_j = modelutil::toy_dataset("d1", 16, 12, 8, kVocab, 8, 1);
  auto model = make_model(6, {"d0", "d1"});
  auto cfg = fast_cfg();

  TrainLog log;
  auto theta_i = model_training_step(model, data_i, cfg, 11, 0, &log);
  meta_training_step(theta_i, data_j, cfg, 12, 0, &log);
  bool saw_meta = false;
  for (const auto& r : log.records()) {
    if (r.phase != "meta") continue;
    saw_meta = true;
    CHECK((r.split == "dev90" || r.split == "dev"));
  }
  CHECK(saw_meta);
}

TEST_CASE("meta_update composes per-domain gradients and skips untouched rows") {
  auto data0 = modelutil::toy_dataset("d0", 16, 12, 8, kVocab, 7, 0);
  auto data1 = modelutil::toy_dataset("d1", 16, 12, 8, kVocab, 8, 1);
  auto model = make_model(9, {"d0", "d1"});
  auto cfg = fast_cfg();
  const double meta_lr = 0.05;

  auto snap0 = model_training_step(model, data0, cfg, 21);
  auto snap1 = model_training_step(model, data1, cfg, 22);

  // hand-composed oracle: same batches, same gradients, one SGD step
  std::map<std::string, std::vector<float>> expect;
  for (const auto& [p, var] : model.store()) expect[p] = var->v;
  const std::uint64_t update_seed = 777;
  std::size_t idx = 0;
  for (auto pack : {std::make_pair(&snap0, &data0), std::make_pair(&snap1, &data1)}) {
    auto work = pack.first->clone();
    auto batches = make_batches(pack.second->train, cfg.batch_size, Vocab::pad_id,
                                mix_seed(update_seed, 0xabc0 + idx));
    Tape<float> tape;
    work.store().zero_grads();
    auto loss = metamt::detail::batch_loss(work, &tape, batches.front(),
                                           pack.second->domain_id, {});
    tape.backward(loss);
    for (const auto& [p, var] : work.store())
      for (std::size_t k = 0; k < var->g.size(); ++k)
        expect[p][k] -= static_cast<float>(meta_lr) * var->g[k];
    ++idx;
  }

  auto live = model.clone();
  meta_update(live, {&snap0, &snap1}, {&data0, &data1}, meta_lr, cfg, update_seed);
  for (const auto& [p, var] : live.store()) {
    const auto& e = expect.at(p);
    for (std::size_t k = 0; k < var->v.size(); ++k)
      CHECK(var->v[k] == doctest::Approx(e[k]).epsilon(1e-6));
  }

  // degenerate case: one snapshot equal to theta is one plain gradient step
  auto single = model.clone();
  const auto* self = &model;
  meta_update(single, {self}, {&data0}, meta_lr, cfg, 555);
  auto work = model.clone();
  auto batches = make_batches(data0.train, cfg.batch_size, Vocab::pad_id,
                              mix_seed(555, 0xabc0));
  Tape<float> tape;
  work.store().zero_grads();
  auto loss = metamt::detail::batch_loss(work, &tape, batches.front(), "d0", {});
  tape.backward(loss);
  for (const auto& [p, var] : work.store())
    for (std::size_t k = 0; k < var->v.size(); ++k)
      CHECK(single.store().at(p)->v[k] ==
            doctest::Approx(model.store().at(p)->v[k] -
                            static_cast<float>(meta_lr) * var->g[k])
                .epsilon(1e-6));

  // token rows that never occur in the batch keep zero gradient: unchanged
  const auto& before = model.store().at("transmission.src.emb.d1")->v;
  const auto& after = single.store().at("transmission.src.emb.d1")->v;
  CHECK(before == after);  // domain d1 saw no data in this update
}

TEST_CASE("fine_tune trains the decoder too and zero steps is the identity") {
  auto data = modelutil::toy_dataset("d0", 16, 12, 8, kVocab, 7);
  auto model = make_model(5, {"d0"});
  auto cfg = fast_cfg();

  cfg.finetune_steps = 0;
  auto same = fine_tune(model, data, cfg);
  CHECK(params_equal(model, same, model.partition().all));

  cfg.finetune_steps = 40;
  auto tuned = fine_tune(model, data, cfg);
  bool decoder_changed = false;
  for (const auto& p : non_meta_paths(model))
    if (model.store().at(p)->v != tuned.store().at(p)->v) decoder_changed = true;
  CHECK(decoder_changed);

  CHECK_THROWS_AS(fine_tune(model, modelutil::toy_dataset("nope", 12, 10, 8, kVocab, 3), cfg),
                  ContractError);
}

TEST_CASE("run_meta_training visits every ordered pair once per epoch") {
  std::vector<DomainDataset> datasets{
      modelutil::toy_dataset("d0", 14, 12, 8, kVocab, 7, 0),
      modelutil::toy_dataset("d1", 14, 12, 8, kVocab, 8, 1)};
  auto model = make_model(31, {"d0", "d1"});
  auto cfg = fast_cfg();
  cfg.inner_steps = 6;
  cfg.meta_steps = 4;
  cfg.eval_every = 3;

  TrainLog log;
  run_meta_training(model, datasets, cfg, &log);

  std::vector<std::pair<std::string, std::string>> visited;
  for (const auto& r : log.records())
    if (r.phase == "pair") visited.push_back({r.domain_i, r.domain_j});
  CHECK(visited.size() == 2);
  CHECK(std::set<std::pair<std::string, std::string>>(visited.begin(), visited.end()) ==
        std::set<std::pair<std::string, std::string>>{{"d0", "d1"}, {"d1", "d0"}});

  std::size_t meta_updates = 0;
  for (const auto& r : log.records())
    if (r.phase == "meta-update") ++meta_updates;
  CHECK(meta_updates == 2);  // one per ordered pair

  CHECK_THROWS_AS(run_meta_training(model, {datasets[0]}, cfg), ConfigError);
}

TEST_CASE("identical seeds give bit-identical meta training runs") {
  std::vector<DomainDataset> datasets{
      modelutil::toy_dataset("d0", 14, 12, 8, kVocab, 7, 0),
      modelutil::toy_dataset("d1", 14, 12, 8, kVocab, 8, 1)};
  auto cfg = fast_cfg();
  cfg.inner_steps = 8;
  cfg.meta_steps = 4;
  cfg.eval_every = 4;
  cfg.epochs = 2;

  auto m1 = make_model(31, {"d0", "d1"});
  auto m2 = make_model(31, {"d0", "d1"});
  run_meta_training(m1, datasets, cfg);
  run_meta_training(m2, datasets, cfg);
  CHECK(params_equal(m1, m2, m1.partition().all));

  auto cfg2 = cfg;
  cfg2.seed = 43;
  auto m3 = make_model(31, {"d0", "d1"});
  run_meta_training(m3, datasets, cfg2);
  CHECK_FALSE(params_equal(m1, m3, m1.partition().all));
}

TEST_CASE("single-domain meta training reduces to plain training") {
  auto data = modelutil::toy_dataset("d0", 16, 12, 8, kVocab, 7);
  std::vector<DomainDataset> datasets{data};
  auto cfg = fast_cfg();
  cfg.allow_single_domain = true;
  cfg.meta_steps = 0;
  cfg.inner_steps = 12;
  cfg.eval_every = 6;
  cfg.epochs = 2;

  auto meta_model = make_model(77, {"d0"});
  TrainLog meta_log;
  run_meta_training(meta_model, datasets, cfg, &meta_log);

  // ordinary training: the same per-epoch inner runs, adopted in place
  auto plain_model = make_model(77, {"d0"});
  TrainLog plain_log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto schedule_rng = Rng(mix_seed(cfg.seed, 0x5c000 + epoch));  // matches the trainer
    (void)schedule_rng;
    const std::uint64_t pair_seed = mix_seed(cfg.seed, epoch * 1000003ULL);
    auto next = model_training_step(plain_model, data, cfg, mix_seed(pair_seed, 1),
                                    static_cast<std::int64_t>(epoch), &plain_log);
    plain_model.store().copy_values_from(next.store());
  }

  CHECK(params_equal(meta_model, plain_model, meta_model.partition().all));

  std::vector<double> meta_losses, plain_losses;
  for (const auto& r : meta_log.records())
    if (r.phase == "model" && std::isfinite(r.loss)) meta_losses.push_back(r.loss);
  for (const auto& r : plain_log.records())
    if (r.phase == "model" && std::isfinite(r.loss)) plain_losses.push_back(r.loss);
  CHECK(meta_losses == plain_losses);
}

TEST_CASE("a 4-domain epoch improves dev loss on most domains") {
  std::vector<DomainDataset> datasets;
  for (int d = 0; d < 4; ++d)
    datasets.push_back(modelutil::toy_dataset("d" + std::to_string(d), 24, 14, 8, kVocab,
                                              100 + d, d));
  auto model = make_model(55, {"d0", "d1", "d2", "d3"});
  auto cfg = fast_cfg();
  cfg.inner_steps = 30;
  cfg.meta_steps = 10;
  cfg.eval_every = 10;
  cfg.meta_lr = 0.02;
  cfg.epochs = 1;

  std::vector<double> before;
  for (const auto& d : datasets)
    before.push_back(metamt::detail::eval_loss(model, d.dev, d.domain_id));
  run_meta_training(model, datasets, cfg);
  int improved = 0;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    if (metamt::detail::eval_loss(model, datasets[d].dev, datasets[d].domain_id) < before[d])
      ++improved;
  CHECK(improved >= 3);
}

TEST_CASE("epoch callback fires and training log is valid json lines") {
  std::vector<DomainDataset> datasets{
      modelutil::toy_dataset("d0", 14, 12, 8, kVocab, 7, 0),
      modelutil::toy_dataset("d1", 14, 12, 8, kVocab, 8, 1)};
  auto model = make_model(3, {"d0", "d1"});
  auto cfg = fast_cfg();
  cfg.inner_steps = 4;
  cfg.meta_steps = 2;
  cfg.eval_every = 2;

  TrainLog log;
  std::vector<std::size_t> epochs_seen;
  run_meta_training(model, datasets, cfg, &log,
                    [&epochs_seen](std::size_t e) { epochs_seen.push_back(e); });
  CHECK(epochs_seen == std::vector<std::size_t>{0});

  for (const auto& r : log.records()) {
    const auto j = r.to_json();
    CHECK(j.front() == '{');
    CHECK(j.back() == '}');
    CHECK(j.find("\"phase\":\"") != std::string::npos);
  }
}
