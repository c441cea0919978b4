#include "drugprot/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "drugprot/pipeline.hpp"
#include "drugprot/synthetic.hpp"

namespace drugprot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_value(const std::string& raw, bool as_string) {
  if (as_string) return raw;
  try {
    return json::parse(raw);
  } catch (const json::exception&) {
    return raw;
  }
}

json::json_pointer dotted_pointer(const std::string& key) {
  std::string ptr;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad key '" + key + "'");
    ptr += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(ptr);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// A flag bound to a config key; the value overrides whatever the file says.
struct Binding {
  std::string key;
  bool as_string = true;
  std::optional<std::string> value;
};

// Options shared by every subcommand, plus its key bindings.
struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::unique_ptr<Binding>> bindings;
  std::vector<std::string> member_paths;

  void bind(const std::string& flag, const std::string& key, const std::string& help,
            bool as_string = true) {
    auto b = std::make_unique<Binding>();
    b->key = key;
    b->as_string = as_string;
    app->add_option(flag, b->value, help);
    bindings.push_back(std::move(b));
  }

  // Config file, then environment, then flags, then --set.
  json effective_config() const {
    json cfg = config_path.empty() ? json::object() : read_json_file(config_path);
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
      cfg["output_dir"] = env;
    }
    for (const auto& b : bindings) {
      if (b->value) cfg[dotted_pointer(b->key)] = parse_value(*b->value, b->as_string);
    }
    if (!member_paths.empty()) cfg["members"] = member_paths;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got " + s);
      cfg[dotted_pointer(s.substr(0, eq))] = parse_value(s.substr(eq + 1), false);
    }
    return cfg;
  }
};

void bind_corpus(Command& c, const std::string& prefix) {
  c.bind("--abstracts", prefix + ".abstracts", "abstracts TSV");
  c.bind("--entities", prefix + ".entities", "entities TSV");
  c.bind("--relations", prefix + ".relations", "relations TSV");
}

fs::path output_dir(const json& cfg) {
  if (!cfg.contains("output_dir") || !cfg["output_dir"].is_string() ||
      cfg["output_dir"].get<std::string>().empty()) {
    throw ConfigError(std::string("output_dir is required (flag --out-dir or env ") + kOutputDirEnv +
                      ")");
  }
  return cfg["output_dir"].get<std::string>();
}

fs::path required_path(const json& cfg, const std::string& key) {
  const auto ptr = dotted_pointer(key);
  if (!cfg.contains(ptr) || !cfg[ptr].is_string()) throw ConfigError(key + " is required");
  fs::path p = cfg[ptr].get<std::string>();
  if (!fs::exists(p)) throw ConfigError(key + ": no such file " + p.string());
  return p;
}

template <typename T>
T get_or(const json& cfg, const std::string& key, T fallback) {
  const auto ptr = dotted_pointer(key);
  if (!cfg.contains(ptr)) return fallback;
  try {
    return cfg[ptr].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

json sub(const json& cfg, const std::string& key) {
  return cfg.contains(key) ? cfg[key] : json::object();
}

Vocabulary vocab_from(const json& cfg) {
  const fs::path path = required_path(cfg, "vocab.path");
  Vocabulary v = load_vocab(path);
  v.lowercase = get_or(cfg, "vocab.lowercase", true);
  return v;
}

void prepare_output(const fs::path& out, const json& cfg) {
  fs::create_directories(out);
  write_json(out / "effective_config.json", cfg);
}

int cmd_synth(const json& cfg) {
  const fs::path out = output_dir(cfg);
  SyntheticOptions opts;
  opts.documents = get_or(cfg, "documents", opts.documents);
  opts.seed = get_or(cfg, "seed", opts.seed);
  opts.first_pmid = get_or(cfg, "first_pmid", opts.first_pmid);
  const auto n_test = get_or<std::size_t>(cfg, "test_documents", 0);
  if (n_test >= opts.documents) throw ConfigError("test_documents must be below documents");

  prepare_output(out, cfg);
  const CorpusBundle all = generate_synthetic_corpus(opts);
  std::vector<std::string> train_ids, test_ids;
  for (std::size_t i = 0; i < all.documents.size(); ++i) {
    (i + n_test < all.documents.size() ? train_ids : test_ids).push_back(all.documents[i].pmid);
  }
  auto emit = [](const CorpusBundle& b, const fs::path& dir) {
    fs::create_directories(dir);
    write_corpus(b, dir / "abstracts.tsv", dir / "entities.tsv", dir / "relations.tsv");
  };
  emit(all.subset(train_ids), out);
  if (n_test > 0) emit(all.subset(test_ids), out / "test");
  write_json(out / "report.json", {{"documents", train_ids.size()},
                                   {"test_documents", test_ids.size()},
                                   {"relations", all.relations.size()}});
  return 0;
}

int cmd_preprocess(const json& cfg) {
  const auto corpus = CorpusPaths::from_json(sub(cfg, "corpus"), "corpus", false);
  const SchemeKind scheme = parse_scheme(get_or<std::string>(cfg, "scheme", "ANONYMIZE"));
  const fs::path out = output_dir(cfg);
  const CorpusBundle bundle = corpus.load();

  prepare_output(out, cfg);
  InstanceStats stats;
  const auto instances = generate_instances(bundle, scheme, &stats);
  std::ofstream os(out / "instances.jsonl");
  for (const auto& inst : instances) {
    os << json{{"pmid", inst.pmid},
               {"sentence", inst.sentence_idx},
               {"arg1", inst.chem.eid},
               {"arg2", inst.gene.eid},
               {"label", std::string(relation_name(inst.label))},
               {"scheme", std::string(scheme_name(inst.scheme))},
               {"text", inst.tagged_text}}
              .dump()
       << '\n';
  }
  write_json(out / "report.json", {{"instances", instances.size()},
                                   {"positives", stats.positives},
                                   {"negatives", stats.negatives},
                                   {"cross_sentence_dropped", stats.cross_sentence_dropped},
                                   {"overlapping_pairs_skipped", stats.overlapping_pairs_skipped},
                                   {"multi_label_pairs", stats.multi_label_pairs}});
  return 0;
}

int cmd_build_vocab(const json& cfg) {
  const auto corpus = CorpusPaths::from_json(sub(cfg, "corpus"), "corpus", false);
  const auto size = get_or<std::size_t>(cfg, "size", 600);
  const bool lowercase = get_or(cfg, "lowercase", true);
  const fs::path out = output_dir(cfg);
  const CorpusBundle bundle = corpus.load();

  const Vocabulary vocab = build_vocab(vocab_training_texts(bundle), size, lowercase);
  prepare_output(out, cfg);
  vocab.save(out / "vocab.txt");
  write_json(out / "report.json", {{"vocab_size", vocab.size()}, {"lowercase", lowercase}});
  return 0;
}

int cmd_train(const json& cfg) {
  const auto corpus = CorpusPaths::from_json(sub(cfg, "corpus"), "corpus", true);
  std::optional<CorpusPaths> dev;
  if (cfg.contains("dev")) dev = CorpusPaths::from_json(cfg["dev"], "dev", true);
  const Vocabulary vocab = vocab_from(cfg);
  const auto max_len = get_or<std::size_t>(cfg, "max_len", kDefaultMaxLen);
  if (max_len < 8) throw ConfigError("max_len must be at least 8");
  EncoderConfig encoder = EncoderConfig::from_json(sub(cfg, "encoder"));
  encoder.vocab_size = static_cast<int>(vocab.size());
  encoder.max_len = static_cast<int>(max_len);
  encoder.validate();
  const MemberSpec spec = MemberSpec::from_json(sub(cfg, "member"));
  const TrainHyper hyper = TrainHyper::from_json(sub(cfg, "train"));
  const fs::path out = output_dir(cfg);

  const EncodedSplit train = encode_split(corpus.load(), vocab, max_len);
  std::optional<EncodedSplit> dev_split;
  if (dev) dev_split = encode_split(dev->load(), vocab, max_len);
  prepare_output(out, cfg);
  const auto report = train_member(spec, encoder, hyper, train,
                                   dev_split ? &*dev_split : nullptr, out / "model.dpt");
  json j = report.to_json(false);
  j["checkpoint"] = "model.dpt";
  j["member"] = spec.to_json();
  write_json(out / "report.json", j);
  return 0;
}

int cmd_stack_train(const json& cfg) {
  const auto corpus = CorpusPaths::from_json(sub(cfg, "corpus"), "corpus", true);
  const Vocabulary vocab = vocab_from(cfg);
  const auto max_len = get_or<std::size_t>(cfg, "max_len", kDefaultMaxLen);
  const StackerConfig sc = StackerConfig::from_json(sub(cfg, "stacker"));
  std::vector<fs::path> members;
  for (const auto& m : sub(cfg, "members")) {
    if (!m.is_string()) throw ConfigError("members must be checkpoint paths");
    fs::path p = m.get<std::string>();
    if (!fs::exists(p)) throw ConfigError("member checkpoint not found: " + p.string());
    members.push_back(fs::absolute(p));
  }
  if (members.size() != kGroupSize) throw ConfigError("stack-train needs exactly 5 members");
  const fs::path out = output_dir(cfg);

  const EnsembleGroup group = load_group(members);
  const CandidateSet cands = build_candidates(corpus.load(), vocab, max_len);
  StackerReport sr;
  const StackerParams stacker = train_stacker(group, cands, sc, &sr);
  prepare_output(out, cfg);
  save_stacker(out / "stacker.dpt", stacker);

  EnsembleManifest manifest;
  manifest.kind = PipelineKind::RUN1_STACK;
  manifest.vocab = fs::absolute(required_path(cfg, "vocab.path"));
  manifest.lowercase = vocab.lowercase;
  manifest.max_len = max_len;
  manifest.groups.push_back({members, fs::absolute(out / "stacker.dpt")});
  write_json(out / "manifest.json", manifest.to_json());
  write_json(out / "report.json", {{"best_epoch", sr.best_epoch},
                                   {"epoch_loss", sr.epoch_loss},
                                   {"members", stacker.member_ids},
                                   {"instances", cands.size()}});
  return 0;
}

int cmd_fuse(const json& cfg) {
  const fs::path manifest_path = required_path(cfg, "manifest");
  const auto corpus = CorpusPaths::from_json(sub(cfg, "corpus"), "corpus", false);
  const EnsembleManifest manifest =
      EnsembleManifest::from_json(read_json_file(manifest_path), manifest_path.parent_path());
  const fs::path out = output_dir(cfg);

  Vocabulary vocab = load_vocab(manifest.vocab);
  vocab.lowercase = manifest.lowercase;
  const CorpusBundle bundle = corpus.load();
  const CandidateSet cands = build_candidates(bundle, vocab, manifest.max_len);
  const auto records = fuse(manifest, cands);
  prepare_output(out, cfg);
  write_predictions(out / "predictions.tsv", records);
  json report = {{"pipeline", std::string(pipeline_name(manifest.kind))},
                 {"candidates", cands.unique().size()},
                 {"predictions", records.size()}};
  if (corpus.relations) {
    const auto metrics = micro_metrics(gold_records(bundle), records);
    write_json(out / "metrics.json", metrics.to_json());
    report["f1"] = metrics.overall.f1;
  }
  write_json(out / "report.json", report);
  return 0;
}

int cmd_evaluate(const json& cfg) {
  const fs::path gold_path = required_path(cfg, "gold");
  const fs::path pred_path = required_path(cfg, "pred");
  std::optional<fs::path> out;
  if (cfg.contains("output_dir")) out = output_dir(cfg);

  const auto metrics = micro_metrics(read_predictions(gold_path), read_predictions(pred_path));
  std::printf("P=%.3g R=%.3g F1=%.3g\n", metrics.overall.precision, metrics.overall.recall,
              metrics.overall.f1);
  std::fputs(metrics.to_table().c_str(), stdout);
  if (out) {
    prepare_output(*out, cfg);
    write_json(*out / "metrics.json", metrics.to_json());
  } else {
    std::puts(metrics.to_json().dump().c_str());
  }
  return 0;
}

int cmd_pipeline(const json& cfg) {
  const PipelineConfig pc = PipelineConfig::from_json(cfg);
  prepare_output(pc.output_dir, cfg);
  const auto result = run_pipeline(pc);
  if (result.metrics) {
    std::printf("P=%.3g R=%.3g F1=%.3g\n", result.metrics->overall.precision,
                result.metrics->overall.recall, result.metrics->overall.f1);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"DrugProt chemical-protein relation extraction"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "progress messages on stderr");
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& help,
                 int (*run)(const json&)) -> std::pair<Command*, int (*)(const json&)> {
    auto c = std::make_unique<Command>();
    c->app = app.add_subcommand(name, help);
    c->app->add_option("-c,--config", c->config_path, "JSON config file");
    c->app->add_option("--set", c->sets, "override a config key: dotted.key=value");
    c->bind("-o,--out-dir", "output_dir", "output directory");
    commands.push_back(std::move(c));
    return {commands.back().get(), run};
  };

  std::vector<std::pair<Command*, int (*)(const json&)>> table;
  {
    auto e = add("synth", "write a synthetic corpus", cmd_synth);
    e.first->bind("--documents", "documents", "number of abstracts", false);
    e.first->bind("--seed", "seed", "generator seed", false);
    e.first->bind("--test-documents", "test_documents", "abstracts held out under test/", false);
    table.push_back(e);
  }
  {
    auto e = add("preprocess", "corpus to tagged sentence instances", cmd_preprocess);
    bind_corpus(*e.first, "corpus");
    e.first->bind("--scheme", "scheme", "ANONYMIZE or MARKERS");
    table.push_back(e);
  }
  {
    auto e = add("build-vocab", "train a subword vocabulary", cmd_build_vocab);
    bind_corpus(*e.first, "corpus");
    e.first->bind("--size", "size", "target vocabulary size", false);
    table.push_back(e);
  }
  {
    auto e = add("train", "train one model", cmd_train);
    bind_corpus(*e.first, "corpus");
    e.first->bind("--vocab", "vocab.path", "vocabulary file");
    e.first->bind("--head", "member.head_kind", "CLS, LSTM or ATTN");
    e.first->bind("--scheme", "member.scheme", "ANONYMIZE or MARKERS");
    e.first->bind("--seed", "member.seed", "model seed", false);
    e.first->bind("--epochs", "train.epochs", "epochs (1..10)", false);
    e.first->bind("--lr", "train.lr", "learning rate", false);
    table.push_back(e);
  }
  {
    auto e = add("stack-train", "train an MLP stacker over five frozen members", cmd_stack_train);
    bind_corpus(*e.first, "corpus");
    e.first->bind("--vocab", "vocab.path", "vocabulary file");
    e.first->app->add_option("--member", e.first->member_paths, "member checkpoint (in order)");
    table.push_back(e);
  }
  {
    auto e = add("fuse", "predict with a manifest (vote, stack or single)", cmd_fuse);
    bind_corpus(*e.first, "corpus");
    e.first->bind("--manifest", "manifest", "ensemble manifest");
    table.push_back(e);
  }
  {
    auto e = add("evaluate", "micro P/R/F1 of predictions against gold", cmd_evaluate);
    e.first->bind("--gold", "gold", "gold relations TSV");
    e.first->bind("--pred", "pred", "predicted relations TSV");
    table.push_back(e);
  }
  {
    auto e = add("pipeline", "run a whole RUN kind from one config", cmd_pipeline);
    e.first->bind("--kind", "pipeline", "RUN1_STACK, RUN3_STACK_VOTE, RUN4_VOTE or RUN5_SINGLE");
    table.push_back(e);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ConfigError("").exit_code();
  }
  set_log_level(quiet ? LogLevel::QUIET : verbose ? LogLevel::INFO : LogLevel::WARN);

  try {
    for (const auto& [cmd, run] : table) {
      if (cmd->app->parsed()) return run(cmd->effective_config());
    }
    return ConfigError("").exit_code();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ConfigError("").exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return DataError("").exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("drugprot");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace drugprot
