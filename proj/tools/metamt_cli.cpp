// metamt command-line workbench: synthetic data generation, BPE, vocabulary
// construction, meta training, fine-tuning, translation, BLEU evaluation and
// experiment reports. METAMT_FP64=1 switches the numeric core to doubles
// (gradient-verification mode).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "metamt/config.hpp"
#include "metamt/metamt.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace metamt;

namespace {

struct Args {
  std::string command;

  std::string config_file;
  std::vector<std::string> overrides;

  std::string out_dir;        // synth-data, train-meta, finetune output directory
  std::string data_dir;       // corpus directory
  std::vector<std::string> domains;
  std::string domain;

  std::vector<std::string> inputs;
  std::string output;
  std::string bpe_model;
  std::string src_bpe, tgt_bpe;
  std::string src_vocab, tgt_vocab;
  std::string src_embeddings, tgt_embeddings;
  std::string src_freq, tgt_freq;
  std::string init_checkpoint;
  std::string hyp_file, ref_file;
  std::string label;
  std::string report_dir;
  std::size_t bpe_ops = 0;
  std::size_t min_freq = 0;
  bool resume = false;
};

RunConfig resolve_config(const Args& args) {
  RunConfig cfg;
  if (!args.config_file.empty()) cfg.load_file(args.config_file);
  cfg.apply_overrides(args.overrides);
  if (!args.label.empty()) cfg.set("run.label", args.label);
  return cfg;
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// scalar-free subcommands
// ---------------------------------------------------------------------------

int cmd_synth_data(const Args& args) {
  const RunConfig cfg = resolve_config(args);
  const auto spec = cfg.synth_spec();
  const std::size_t heldout = spec.heldout;
  const auto task = synth_generate(spec);

  ensure_dir(args.out_dir);
  std::vector<std::string> general_src, general_tgt;
  for (std::size_t d = 0; d < task.corpora.size(); ++d) {
    const auto& corpus = task.corpora[d];
    std::vector<std::string> src, tgt;
    for (const auto& [s, t] : corpus.pairs) {
      src.push_back(s);
      tgt.push_back(t);
    }
    write_lines(args.out_dir + "/" + corpus.domain_id + ".src", src);
    write_lines(args.out_dir + "/" + corpus.domain_id + ".tgt", tgt);
    if (d + heldout < task.corpora.size()) {
      general_src.insert(general_src.end(), src.begin(), src.end());
      general_tgt.insert(general_tgt.end(), tgt.begin(), tgt.end());
    }
    std::vector<std::string> cipher_lines;
    for (const auto& [s, t] : task.ciphers[d]) cipher_lines.push_back(s + "\t" + t);
    write_lines(args.out_dir + "/cipher." + corpus.domain_id + ".tsv", cipher_lines);
  }
  write_lines(args.out_dir + "/general.src", general_src);
  write_lines(args.out_dir + "/general.tgt", general_tgt);
  write_text(args.out_dir + "/synth.config.txt", cfg.echo());

  std::cout << "wrote " << task.corpora.size() << " domains (" << heldout
            << " held out) to " << args.out_dir << "\n";
  return 0;
}

int cmd_bpe_learn(const Args& args) {
  const RunConfig cfg = resolve_config(args);
  std::vector<std::string> lines;
  for (const auto& input : args.inputs) {
    auto l = read_lines(input);
    lines.insert(lines.end(), l.begin(), l.end());
  }
  const std::size_t ops = args.bpe_ops != 0 ? args.bpe_ops : cfg.get_u64("data.bpe_ops");
  const auto model = bpe_learn(lines, ops);
  save_bpe(model, args.output);
  std::cout << "learned " << model.merges.size() << " merges\n";
  return 0;
}

int cmd_bpe_apply(const Args& args) {
  const auto model = load_bpe(args.bpe_model);
  std::vector<std::string> out;
  for (const auto& line : read_lines(args.inputs.at(0))) {
    const auto toks = bpe_encode(model, line);
    std::string joined;
    for (const auto& t : toks) {
      if (!joined.empty()) joined += ' ';
      joined += t;
    }
    out.push_back(joined);
  }
  write_lines(args.output, out);
  return 0;
}

int cmd_build_vocab(const Args& args) {
  const RunConfig cfg = resolve_config(args);
  std::vector<std::vector<std::string>> encoded;
  for (const auto& input : args.inputs)
    for (const auto& line : read_lines(input)) encoded.push_back(split_ws(line));
  const std::size_t min_freq =
      args.min_freq != 0 ? args.min_freq : cfg.get_u64("data.min_freq");
  const auto vocab = build_vocab(encoded, min_freq);
  save_vocab(vocab, args.output);
  std::cout << "vocab size " << vocab.size() << "\n";
  return 0;
}

int cmd_evaluate(const Args& args) {
  const auto hyps = read_lines(args.hyp_file);
  const auto refs = read_lines(args.ref_file);
  const auto report = bleu4(hyps, refs);
  std::cout << report.summary() << "\n";
  if (!args.output.empty()) {
    json record{{"label", args.label},
                {"domain", args.domain},
                {"bleu", report.score},
                {"bp", report.brevity_penalty},
                {"p1", report.precisions[0]},
                {"p2", report.precisions[1]},
                {"p3", report.precisions[2]},
                {"p4", report.precisions[3]},
                {"hyp_tokens", report.hyp_tokens},
                {"ref_tokens", report.ref_tokens}};
    std::ofstream out(args.output, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot write eval record: " + args.output);
    out << record.dump() << "\n";
  }
  return 0;
}

int cmd_report(const Args& args) {
  std::vector<fs::path> runs;
  if (fs::exists(args.report_dir))
    for (const auto& entry : fs::directory_iterator(args.report_dir))
      if (entry.is_directory() && fs::exists(entry.path() / "config.txt"))
        runs.push_back(entry.path());
  if (runs.empty()) throw DataError("report: no runs found in " + args.report_dir);
  std::sort(runs.begin(), runs.end());

  struct Run {
    std::string label;
    std::map<std::string, double> bleu_by_domain;
  };
  std::vector<Run> table;
  std::set<std::string> domains;
  for (const auto& dir : runs) {
    Run run;
    run.label = dir.filename().string();
    for (const auto& line : read_lines((dir / "config.txt").string()))
      if (line.rfind("run.label=", 0) == 0 && line.size() > 10) run.label = line.substr(10);
    const auto eval_path = dir / "eval.json";
    if (fs::exists(eval_path))
      for (const auto& line : read_lines(eval_path.string())) {
        if (line.empty()) continue;
        const auto rec = json::parse(line);
        const std::string dom = rec.value("domain", "");
        run.bleu_by_domain[dom] = rec.value("bleu", 0.0);
        domains.insert(dom);
      }
    // loss-curve series for plotting
    const auto log_path = dir / "train.log.jsonl";
    if (fs::exists(log_path)) {
      std::string csv = "step,epoch,phase,loss\n";
      for (const auto& line : read_lines(log_path.string())) {
        if (line.empty()) continue;
        const auto rec = json::parse(line);
        if (!rec.contains("loss")) continue;
        csv += std::to_string(rec.value("step", -1)) + "," +
               std::to_string(rec.value("epoch", -1)) + "," +
               rec.value("phase", std::string()) + "," +
               std::to_string(rec.value("loss", 0.0)) + "\n";
      }
      write_text((dir / "loss_curve.csv").string(), csv);
    }
    table.push_back(std::move(run));
  }

  // canonical system order, extras afterwards
  const std::vector<std::string> canon{"baseline", "baseline+finetune", "metamt",
                                       "-enc-proj", "-dec-proj"};
  std::stable_sort(table.begin(), table.end(), [&canon](const Run& a, const Run& b) {
    auto rank = [&canon](const std::string& label) {
      for (std::size_t i = 0; i < canon.size(); ++i)
        if (label == canon[i]) return i;
      return canon.size();
    };
    return rank(a.label) < rank(b.label);
  });

  std::string out;
  out += "system";
  for (const auto& d : domains) out += "\t" + d;
  out += "\n";
  for (const auto& run : table) {
    out += run.label;
    for (const auto& d : domains) {
      auto it = run.bleu_by_domain.find(d);
      char cell[32];
      if (it == run.bleu_by_domain.end())
        std::snprintf(cell, sizeof(cell), "\t-");
      else
        std::snprintf(cell, sizeof(cell), "\t%.2f", it->second);
      out += cell;
    }
    out += "\n";
  }
  std::cout << out;
  if (!args.output.empty()) write_text(args.output, out);
  return 0;
}

// ---------------------------------------------------------------------------
// model-bearing subcommands (templated on the scalar type)
// ---------------------------------------------------------------------------

struct SideAssets {
  BpeModel bpe;
  Vocab vocab;
  std::shared_ptr<EmbeddingTable> table;  // pretrained or fallback-generated
};

SideAssets load_side(const std::string& bpe_path, const std::string& vocab_path,
                     const std::string& embeddings_path, const std::string& side,
                     const RunConfig& cfg) {
  SideAssets assets;
  assets.bpe = load_bpe(bpe_path);
  assets.vocab = load_vocab(vocab_path);
  if (!embeddings_path.empty()) {
    assets.table = std::make_shared<EmbeddingTable>(load_embeddings(embeddings_path));
  } else {
    auto table = std::make_shared<EmbeddingTable>();
    table->dim = cfg.get_u64("transmission.d");
    const std::uint64_t seed = cfg.get_u64("model.seed");
    for (const auto& token : assets.vocab.id_to_token)
      table->vectors[token] =
          synthetic_pretrained_vector<double>(seed, side, token, table->dim);
    assets.table = std::move(table);
  }
  return assets;
}

// Counts over the training splits, optionally merged with an external
// frequency file ("token count" per line).
std::vector<std::pair<std::string, long long>> token_frequencies(
    const std::vector<DomainDataset>& datasets, bool source_side, const Vocab& vocab,
    const std::string& freq_file) {
  std::map<std::string, long long> counts;
  for (const auto& data : datasets)
    for (const auto& [src, tgt] : data.train)
      for (int id : source_side ? src : tgt)
        if (id >= 4) ++counts[vocab.token(id)];
  if (!freq_file.empty()) {
    std::size_t lineno = 0;
    for (const auto& line : read_lines(freq_file)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string token;
      long long count = 0;
      if (!(ls >> token >> count) || count < 0)
        throw FormatError("frequency file: malformed line " + std::to_string(lineno) +
                          " in " + freq_file);
      counts[token] += count;
    }
  }
  return {counts.begin(), counts.end()};
}

struct Pipeline {
  SideAssets src, tgt;
  std::vector<DomainDataset> datasets;
  std::vector<TextDataset> texts;
  RunConfig cfg;
  std::string src_freq, tgt_freq;
};

Pipeline build_pipeline(const Args& args, const RunConfig& cfg,
                        const std::vector<std::string>& domains) {
  Pipeline pipe{load_side(args.src_bpe, args.src_vocab, args.src_embeddings, "src", cfg),
                load_side(args.tgt_bpe, args.tgt_vocab, args.tgt_embeddings, "tgt", cfg),
                {},
                {},
                cfg,
                args.src_freq,
                args.tgt_freq};
  const double tr = cfg.get_double("data.train_ratio");
  const double dr = cfg.get_double("data.dev_ratio");
  const double te = cfg.get_double("data.test_ratio");
  const std::uint64_t seed = cfg.get_u64("train.seed");
  for (const auto& dom : domains) {
    const auto loaded = load_parallel(args.data_dir + "/" + dom + ".src",
                                      args.data_dir + "/" + dom + ".tgt", dom);
    if (loaded.dropped > 0)
      std::cerr << "load report: domain " << dom << ": dropped " << loaded.dropped
                << " blank-sided pairs\n";
    auto text = split_dataset(loaded.corpus, tr, dr, te, seed);
    pipe.datasets.push_back(
        encode_dataset(text, pipe.src.bpe, pipe.tgt.bpe, pipe.src.vocab, pipe.tgt.vocab));
    pipe.texts.push_back(std::move(text));
  }
  return pipe;
}

template <class S>
TransformerModel<S> build_model(const Pipeline& pipe) {
  const auto& cfg = pipe.cfg;
  auto mc = cfg.model_config(pipe.src.vocab.size(), pipe.tgt.vocab.size());
  BaseSpace<S> src_base, tgt_base;
  const bool normalize = cfg.get_bool("transmission.normalize_rows");
  const std::size_t n_base = cfg.get_u64("transmission.n_base");
  if (mc.enc_proj)
    src_base = select_base_words<S>(
        *pipe.src.table,
        token_frequencies(pipe.datasets, true, pipe.src.vocab, pipe.src_freq), n_base,
        normalize);
  if (mc.dec_proj)
    tgt_base = select_base_words<S>(
        *pipe.tgt.table,
        token_frequencies(pipe.datasets, false, pipe.tgt.vocab, pipe.tgt_freq), n_base,
        normalize);
  return TransformerModel<S>(mc, std::move(src_base), std::move(tgt_base),
                             pipe.src.vocab.id_to_token, pipe.tgt.vocab.id_to_token,
                             pipe.src.table, pipe.tgt.table);
}

template <class S>
int cmd_train_meta(const Args& args) {
  RunConfig cfg = resolve_config(args);
  if (args.domains.size() < 2)
    throw ConfigError("train-meta requires at least 2 domains");
  ensure_dir(args.out_dir);
  const std::string ckpt_path = args.out_dir + "/checkpoint.bin";

  std::size_t start_epoch = 0;
  std::unique_ptr<TransformerModel<S>> model;
  if (args.resume && fs::exists(ckpt_path)) {
    auto loaded = load_checkpoint<S>(ckpt_path);
    cfg = RunConfig::from_echo(loaded.run_config);
    model = std::make_unique<TransformerModel<S>>(std::move(loaded.model));
    start_epoch = loaded.epoch + 1;
  }

  auto pipe = build_pipeline(args, cfg, args.domains);
  if (!model) {
    model = std::make_unique<TransformerModel<S>>(build_model<S>(pipe));
    const auto policy = parse_init_policy(cfg.raw("transmission.init_policy"));
    for (const auto& dom : args.domains) model->register_domain(dom, policy);
  }

  auto tc = cfg.train_config();
  TrainLog log;
  log.open(args.out_dir + "/train.log.jsonl");
  write_text(args.out_dir + "/config.txt", cfg.echo());

  const std::string echo = cfg.echo();
  run_meta_training(*model, pipe.datasets, tc, &log,
                    [&](std::size_t epoch) {
                      save_checkpoint(*model, static_cast<Adam<S>*>(nullptr), tc.seed, epoch,
                                      0, echo, ckpt_path);
                    },
                    start_epoch);
  std::cout << "meta training complete: " << ckpt_path << "\n";
  return 0;
}

template <class S>
int cmd_finetune(const Args& args) {
  RunConfig cfg = resolve_config(args);
  ensure_dir(args.out_dir);

  std::unique_ptr<TransformerModel<S>> model;
  if (!args.init_checkpoint.empty()) {
    auto loaded = load_checkpoint<S>(args.init_checkpoint);
    model = std::make_unique<TransformerModel<S>>(std::move(loaded.model));
  }

  auto pipe = build_pipeline(args, cfg, {args.domain});
  if (!model) model = std::make_unique<TransformerModel<S>>(build_model<S>(pipe));
  if (!model->has_domain(args.domain))
    model->register_domain(args.domain, parse_init_policy(cfg.raw("transmission.init_policy")));

  auto tc = cfg.train_config();
  TrainLog log;
  log.open(args.out_dir + "/train.log.jsonl");
  write_text(args.out_dir + "/config.txt", cfg.echo());

  auto tuned = fine_tune(*model, pipe.datasets.front(), tc, &log);
  save_checkpoint(tuned, static_cast<Adam<S>*>(nullptr), tc.seed, 0, tc.finetune_steps,
                  cfg.echo(), args.out_dir + "/checkpoint.bin");

  // export the domain's test split so translate/evaluate can consume it
  std::vector<std::string> test_src, test_ref;
  for (const auto& [s, t] : pipe.texts.front().test) {
    test_src.push_back(s);
    test_ref.push_back(t);
  }
  write_lines(args.out_dir + "/test.src", test_src);
  write_lines(args.out_dir + "/test.ref", test_ref);
  std::cout << "fine-tune complete: " << args.out_dir << "/checkpoint.bin\n";
  return 0;
}

template <class S>
int cmd_translate(const Args& args) {
  const RunConfig flag_cfg = resolve_config(args);
  auto loaded = load_checkpoint<S>(args.init_checkpoint);
  const auto src_bpe = load_bpe(args.src_bpe);
  const auto src_vocab = load_vocab(args.src_vocab);
  const auto tgt_vocab = load_vocab(args.tgt_vocab);
  const auto lines = read_lines(args.inputs.at(0));
  const auto hyps = translate_corpus(loaded.model, lines, args.domain,
                                     flag_cfg.get_u64("decode.beam"),
                                     flag_cfg.get_u64("decode.max_len"), src_bpe, src_vocab,
                                     tgt_vocab, flag_cfg.get_bool("decode.length_norm"));
  if (args.output.empty())
    for (const auto& h : hyps) std::cout << h << "\n";
  else
    write_lines(args.output, hyps);
  return 0;
}

template <class S>
int cmd_inspect(const Args& args) {
  auto loaded = load_checkpoint<S>(args.init_checkpoint);
  std::size_t total = 0;
  for (const auto& [p, var] : loaded.model.store()) total += var->v.size();
  std::cout << "version: 1\n";
  std::cout << "parameters: " << loaded.model.store().size() << " tensors, " << total
            << " elements\n";
  std::cout << "domains:";
  for (const auto& d : loaded.model.registered_domains()) std::cout << " " << d;
  std::cout << "\nseed: " << loaded.seed << "  epoch: " << loaded.epoch
            << "  step: " << loaded.step << "\n";
  std::cout << "optimizer-state: " << (loaded.has_adam ? "yes" : "no") << "\n";
  std::cout << "--- config ---\n" << loaded.run_config;
  return 0;
}

template <class S>
int dispatch(const Args& args) {
  if (args.command == "synth-data") return cmd_synth_data(args);
  if (args.command == "bpe-learn") return cmd_bpe_learn(args);
  if (args.command == "bpe-apply") return cmd_bpe_apply(args);
  if (args.command == "build-vocab") return cmd_build_vocab(args);
  if (args.command == "train-meta") return cmd_train_meta<S>(args);
  if (args.command == "finetune") return cmd_finetune<S>(args);
  if (args.command == "translate") return cmd_translate<S>(args);
  if (args.command == "evaluate") return cmd_evaluate(args);
  if (args.command == "inspect-checkpoint") return cmd_inspect<S>(args);
  if (args.command == "report") return cmd_report(args);
  throw ConfigError("unknown subcommand: " + args.command);
}

}  // namespace

int main(int argc, char** argv) {
  Args args;
  CLI::App app{"MetaMT translation workbench"};
  app.require_subcommand(1);

  auto add_config = [&args](CLI::App* cmd) {
    cmd->add_option("--config", args.config_file, "key=value config file");
    cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
  };
  auto add_side_assets = [&args](CLI::App* cmd) {
    cmd->add_option("--src-bpe", args.src_bpe, "source BPE model")->required();
    cmd->add_option("--tgt-bpe", args.tgt_bpe, "target BPE model")->required();
    cmd->add_option("--src-vocab", args.src_vocab, "source vocab file")->required();
    cmd->add_option("--tgt-vocab", args.tgt_vocab, "target vocab file")->required();
    cmd->add_option("--src-embeddings", args.src_embeddings, "pretrained source embeddings");
    cmd->add_option("--tgt-embeddings", args.tgt_embeddings, "pretrained target embeddings");
    cmd->add_option("--src-freq", args.src_freq, "external source frequency file");
    cmd->add_option("--tgt-freq", args.tgt_freq, "external target frequency file");
  };

  auto* synth = app.add_subcommand("synth-data", "generate synthetic multi-domain corpora");
  add_config(synth);
  synth->add_option("--out", args.out_dir, "output directory")->required();

  auto* learn = app.add_subcommand("bpe-learn", "learn a BPE merge table");
  add_config(learn);
  learn->add_option("--input", args.inputs, "training text files")->required();
  learn->add_option("--ops", args.bpe_ops, "number of merge operations");
  learn->add_option("--out", args.output, "output model file")->required();

  auto* apply = app.add_subcommand("bpe-apply", "apply a BPE model to text");
  apply->add_option("--model", args.bpe_model, "BPE model file")->required();
  apply->add_option("--input", args.inputs, "input text file")->required()->expected(1);
  apply->add_option("--out", args.output, "output file")->required();

  auto* vocab = app.add_subcommand("build-vocab", "build a vocab from encoded text");
  add_config(vocab);
  vocab->add_option("--input", args.inputs, "encoded text files")->required();
  vocab->add_option("--min-freq", args.min_freq, "minimum subword frequency");
  vocab->add_option("--out", args.output, "output vocab file")->required();

  auto* train = app.add_subcommand("train-meta", "alternating meta training over domains");
  add_config(train);
  add_side_assets(train);
  train->add_option("--data-dir", args.data_dir, "corpus directory")->required();
  train->add_option("--domains", args.domains, "training domain ids")->required();
  train->add_option("--out", args.out_dir, "run directory")->required();
  train->add_flag("--resume", args.resume, "resume from the run checkpoint");

  auto* tune = app.add_subcommand("finetune", "train all parameters on one domain");
  add_config(tune);
  add_side_assets(tune);
  tune->add_option("--data-dir", args.data_dir, "corpus directory")->required();
  tune->add_option("--domain", args.domain, "domain id")->required();
  tune->add_option("--init", args.init_checkpoint, "starting checkpoint (fresh init if absent)");
  tune->add_option("--out", args.out_dir, "run directory")->required();

  auto* translate = app.add_subcommand("translate", "beam-search translate a corpus");
  add_config(translate);
  translate->add_option("--init", args.init_checkpoint, "model checkpoint")->required();
  translate->add_option("--src-bpe", args.src_bpe, "source BPE model")->required();
  translate->add_option("--src-vocab", args.src_vocab, "source vocab")->required();
  translate->add_option("--tgt-vocab", args.tgt_vocab, "target vocab")->required();
  translate->add_option("--input", args.inputs, "source text file")->required()->expected(1);
  translate->add_option("--domain", args.domain, "domain id")->required();
  translate->add_option("--out", args.output, "hypothesis file (stdout if absent)");

  auto* evaluate = app.add_subcommand("evaluate", "corpus BLEU-4 against a single reference");
  evaluate->add_option("--hyp", args.hyp_file, "hypothesis file")->required();
  evaluate->add_option("--ref", args.ref_file, "reference file")->required();
  evaluate->add_option("--out", args.output, "append a JSON eval record here");
  evaluate->add_option("--domain", args.domain, "domain tag for the record");
  evaluate->add_option("--label", args.label, "system label for the record");

  auto* inspect = app.add_subcommand("inspect-checkpoint", "print checkpoint metadata");
  inspect->add_option("--init", args.init_checkpoint, "checkpoint file")->required();

  auto* report = app.add_subcommand("report", "aggregate runs into a comparison table");
  report->add_option("--dir", args.report_dir, "directory of run subdirectories")->required();
  report->add_option("--out", args.output, "write the table here too");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }
  args.command = app.get_subcommands().front()->get_name();

  const char* fp64 = std::getenv("METAMT_FP64");
  try {
    if (fp64 && std::string(fp64) == "1") return dispatch<double>(args);
    return dispatch<float>(args);
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
  } catch (const FormatError& e) {
    std::cerr << "error: format: " << e.what() << "\n";
  } catch (const DataError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
  } catch (const CheckpointVersionError& e) {
    std::cerr << "error: checkpoint-version: " << e.what() << "\n";
  } catch (const CheckpointChecksumError& e) {
    std::cerr << "error: checkpoint-checksum: " << e.what() << "\n";
  } catch (const CheckpointPathError& e) {
    std::cerr << "error: checkpoint-paths: " << e.what() << "\n";
  } catch (const CheckpointError& e) {
    std::cerr << "error: checkpoint: " << e.what() << "\n";
  } catch (const IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
  } catch (const NumericError& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
  }
  return 1;
}
