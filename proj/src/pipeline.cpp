#include "drugprot/pipeline.hpp"

#include <fstream>

namespace drugprot {

namespace fs = std::filesystem;

namespace {

fs::path existing_path(const nlohmann::json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ConfigError(what + "." + key + " must be a path string");
  }
  fs::path p = j.at(key).get<std::string>();
  if (!fs::exists(p)) throw ConfigError(what + "." + key + ": no such file " + p.string());
  return p;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

double test_f1(const fs::path& checkpoint, const CandidateSet& test,
               const std::vector<PredictionRecord>& gold) {
  const EnsembleMember m = load_member(checkpoint);
  const auto pred = predict_records(m.params, test.encoded(m.desc.scheme));
  return micro_metrics(gold, pred).overall.f1;
}

}  // namespace

CorpusPaths CorpusPaths::from_json(const nlohmann::json& j, const std::string& what,
                                   bool require_relations) {
  if (!j.is_object()) throw ConfigError(what + " must be an object of corpus paths");
  CorpusPaths p;
  p.abstracts = existing_path(j, "abstracts", what);
  p.entities = existing_path(j, "entities", what);
  if (j.contains("relations") && !j.at("relations").is_null()) {
    p.relations = existing_path(j, "relations", what);
  } else if (require_relations) {
    throw ConfigError(what + ".relations is required");
  }
  return p;
}

nlohmann::json CorpusPaths::to_json() const {
  nlohmann::json j = {{"abstracts", abstracts.string()}, {"entities", entities.string()}};
  if (relations) j["relations"] = relations->string();
  return j;
}

CorpusBundle CorpusPaths::load() const { return load_corpus(abstracts, entities, relations); }

std::vector<std::string> vocab_training_texts(const CorpusBundle& bundle) {
  std::vector<std::string> texts;
  for (auto scheme : {SchemeKind::ANONYMIZE, SchemeKind::MARKERS}) {
    for (auto& inst : generate_instances(bundle, scheme)) texts.push_back(std::move(inst.tagged_text));
  }
  return texts;
}

EncodedSplit encode_split(const CorpusBundle& bundle, const Vocabulary& vocab, std::size_t max_len) {
  EncodedSplit s;
  for (auto scheme : {SchemeKind::ANONYMIZE, SchemeKind::MARKERS}) {
    s.by_scheme[static_cast<std::size_t>(scheme)] =
        encode_instances(generate_instances(bundle, scheme), vocab, max_len);
  }
  s.gold = gold_records(bundle);
  return s;
}

MemberSpec MemberSpec::from_json(const nlohmann::json& j) {
  MemberSpec m;
  try {
    m.head_kind = parse_head(j.value("head_kind", std::string("CLS")));
    m.scheme = parse_scheme(j.value("scheme", std::string("ANONYMIZE")));
    m.class_weighted = j.value("class_weighted", false);
    m.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad member spec: ") + e.what());
  }
  return m;
}

nlohmann::json MemberSpec::to_json() const {
  return {{"head_kind", std::string(head_name(head_kind))},
          {"scheme", std::string(scheme_name(scheme))},
          {"class_weighted", class_weighted},
          {"seed", seed}};
}

TrainReport train_member(const MemberSpec& spec, const EncoderConfig& encoder,
                         const TrainHyper& hyper, const EncodedSplit& train,
                         const EncodedSplit* dev, const fs::path& checkpoint) {
  TrainJob job;
  job.config = encoder;
  job.config.head_kind = spec.head_kind;
  job.config.seed = spec.seed;
  job.hyper = hyper;
  job.hyper.seed = spec.seed;
  job.hyper.class_weighted = spec.class_weighted;
  job.train = &train.encoded(spec.scheme);
  if (dev != nullptr) {
    job.dev = &dev->encoded(spec.scheme);
    job.dev_gold = dev->gold;
  }
  job.checkpoint = checkpoint;
  job.meta = {{"scheme", std::string(scheme_name(spec.scheme))},
              {"class_weighted", spec.class_weighted}};
  return train_model(job);
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig c;
  try {
    c.kind = parse_pipeline(j.at("pipeline").get<std::string>());
    c.output_dir = j.at("output_dir").get<std::string>();
    c.corpus = CorpusPaths::from_json(j.at("corpus"), "corpus", true);
    if (j.contains("test") && !j.at("test").is_null()) {
      c.test = CorpusPaths::from_json(j.at("test"), "test", false);
    }
    const auto vocab = j.value("vocab", nlohmann::json::object());
    if (vocab.contains("path")) {
      c.vocab_path = existing_path(vocab, "path", "vocab");
    }
    c.vocab_size = vocab.value("size", c.vocab_size);
    c.lowercase = vocab.value("lowercase", c.lowercase);
    c.max_len = j.value("max_len", c.max_len);
    c.encoder = EncoderConfig::from_json(j.value("encoder", nlohmann::json::object()));
    c.encoder.max_len = static_cast<int>(c.max_len);
    c.train = TrainHyper::from_json(j.value("train", nlohmann::json::object()));
    for (const auto& m : j.at("members")) c.members.push_back(MemberSpec::from_json(m));
    c.stacker = StackerConfig::from_json(j.value("stacker", nlohmann::json::object()));
    c.partition_seed = j.value("partition", nlohmann::json::object()).value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad pipeline config: ") + e.what());
  }
  if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  const bool stacked =
      c.kind == PipelineKind::RUN1_STACK || c.kind == PipelineKind::RUN3_STACK_VOTE;
  if (stacked && c.members.size() != kGroupSize) {
    throw ConfigError("stacked pipelines need exactly 5 members");
  }
  if (c.members.empty()) throw ConfigError("at least one member spec is required");
  if (c.max_len < 8) throw ConfigError("max_len must be at least 8");
  EncoderConfig probe = c.encoder;
  probe.vocab_size = 1;
  probe.validate();
  return c;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const CorpusBundle pool = cfg.corpus.load();
  std::optional<CorpusBundle> test_bundle;
  if (cfg.test) test_bundle = cfg.test->load();

  Vocabulary vocab;
  if (cfg.vocab_path) {
    vocab = load_vocab(*cfg.vocab_path);
  } else {
    log_info("building vocabulary");
    vocab = build_vocab(vocab_training_texts(pool), cfg.vocab_size, cfg.lowercase);
  }
  vocab.lowercase = cfg.lowercase;

  const fs::path& out = cfg.output_dir;
  fs::create_directories(out);
  vocab.save(out / "vocab.txt");

  EncoderConfig encoder = cfg.encoder;
  encoder.vocab_size = static_cast<int>(vocab.size());
  encoder.max_len = static_cast<int>(cfg.max_len);

  std::vector<std::string> pmids;
  for (const auto& d : pool.documents) pmids.push_back(d.pmid);

  PipelineResult result;
  EnsembleManifest& manifest = result.manifest;
  manifest.kind = cfg.kind;
  manifest.vocab = "vocab.txt";
  manifest.lowercase = cfg.lowercase;
  manifest.max_len = cfg.max_len;
  nlohmann::json& report = result.report;
  report = {{"pipeline", std::string(pipeline_name(cfg.kind))},
            {"vocab_size", vocab.size()},
            {"documents", pool.documents.size()},
            {"models", nlohmann::json::array()},
            {"stackers", nlohmann::json::array()}};

  auto record_model = [&](const std::string& rel, const MemberSpec& spec, const TrainReport& tr,
                          int iteration) {
    auto train = tr.to_json(false);
    train.erase("checkpoint");
    nlohmann::json entry = {{"checkpoint", rel}, {"iteration", iteration},
                            {"member", spec.to_json()}, {"train", std::move(train)}};
    report["models"].push_back(std::move(entry));
  };

  switch (cfg.kind) {
    case PipelineKind::RUN1_STACK:
    case PipelineKind::RUN3_STACK_VOTE: {
      auto plans = make_partitions(pmids, PartitionKind::SPLIT_70_20_10, cfg.partition_seed);
      if (cfg.kind == PipelineKind::RUN1_STACK) plans.resize(1);
      for (const auto& plan : plans) {
        const int it = plan.iteration;
        log_info("iteration " + std::to_string(it));
        const EncodedSplit train = encode_split(pool.subset(plan.train_docs), vocab, cfg.max_len);
        const EncodedSplit dev = encode_split(pool.subset(plan.dev_docs), vocab, cfg.max_len);
        EnsembleManifest::Group group;
        for (std::size_t m = 0; m < cfg.members.size(); ++m) {
          MemberSpec spec = cfg.members[m];
          spec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(it));
          const std::string rel =
              "models/iter" + std::to_string(it) + "/member" + std::to_string(m + 1) + ".dpt";
          const auto tr = train_member(spec, encoder, cfg.train, train, &dev, out / rel);
          record_model(rel, spec, tr, it);
          group.members.push_back(rel);
        }
        std::vector<fs::path> abs;
        for (const auto& p : group.members) abs.push_back(out / p);
        const EnsembleGroup loaded = load_group(abs, it);
        const CandidateSet ens = build_candidates(pool.subset(plan.ensemble_docs), vocab, cfg.max_len);
        StackerConfig sc = cfg.stacker;
        sc.seed = derive_seed(sc.seed, static_cast<std::uint64_t>(it));
        StackerReport sr;
        const StackerParams stacker = train_stacker(loaded, ens, sc, &sr);
        group.stacker = "stackers/iter" + std::to_string(it) + ".dpt";
        save_stacker(out / group.stacker, stacker);
        report["stackers"].push_back({{"checkpoint", group.stacker.generic_string()},
                                      {"iteration", it},
                                      {"best_epoch", sr.best_epoch},
                                      {"epoch_loss", sr.epoch_loss}});
        manifest.groups.push_back(std::move(group));
      }
      break;
    }
    case PipelineKind::RUN4_VOTE: {
      for (const auto& plan : make_partitions(pmids, PartitionKind::FOLD_80_20, cfg.partition_seed)) {
        const int it = plan.iteration;
        log_info("iteration " + std::to_string(it));
        const EncodedSplit train = encode_split(pool.subset(plan.train_docs), vocab, cfg.max_len);
        const EncodedSplit dev = encode_split(pool.subset(plan.dev_docs), vocab, cfg.max_len);
        MemberSpec spec = cfg.members.front();
        spec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(it));
        const std::string rel = "models/model" + std::to_string(it) + ".dpt";
        const auto tr = train_member(spec, encoder, cfg.train, train, &dev, out / rel);
        record_model(rel, spec, tr, it);
        manifest.models.push_back(rel);
      }
      break;
    }
    case PipelineKind::RUN5_SINGLE: {
      const EncodedSplit train = encode_split(pool, vocab, cfg.max_len);
      const MemberSpec& spec = cfg.members.front();
      const std::string rel = "models/model.dpt";
      const auto tr = train_member(spec, encoder, cfg.train, train, nullptr, out / rel);
      record_model(rel, spec, tr, 1);
      manifest.models.push_back(rel);
      break;
    }
  }
  manifest.validate();
  write_json(out / "manifest.json", manifest.to_json());

  if (test_bundle) {
    const CandidateSet test = build_candidates(*test_bundle, vocab, cfg.max_len);
    EnsembleManifest resolved = EnsembleManifest::from_json(manifest.to_json(), out);
    result.predictions = fuse(resolved, test);
    write_predictions(out / "predictions.tsv", result.predictions);
    if (cfg.test->relations) {
      const auto gold = gold_records(*test_bundle);
      result.metrics = micro_metrics(gold, result.predictions);
      write_json(out / "metrics.json", result.metrics->to_json());
      write_text(out / "metrics.txt", result.metrics->to_table());
      nlohmann::json members = nlohmann::json::array();
      for (const auto& m : report["models"]) {
        const std::string rel = m.at("checkpoint");
        const double f1 = test_f1(out / rel, test, gold);
        result.member_f1.emplace_back(rel, f1);
        members.push_back({{"checkpoint", rel}, {"f1", f1}});
      }
      write_json(out / "member_metrics.json", members);
      report["test_f1"] = result.metrics->overall.f1;
    }
  }
  write_json(out / "report.json", report);
  return result;
}

}  // namespace drugprot
