#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drugprot/ensemble.hpp"

namespace drugprot {

/// The three DrugProt TSV files. `relations` may be absent for unlabeled text.
struct CorpusPaths {
  std::filesystem::path abstracts;
  std::filesystem::path entities;
  std::optional<std::filesystem::path> relations;

  /// Reads {"abstracts", "entities", "relations"}; throws ConfigError when a
  /// key is missing or a referenced file does not exist.
  static CorpusPaths from_json(const nlohmann::json& j, const std::string& what,
                               bool require_relations);
  nlohmann::json to_json() const;
  CorpusBundle load() const;
};

/// Tagged sentences of every candidate pair under both schemes, the text
/// a vocabulary is trained on.
std::vector<std::string> vocab_training_texts(const CorpusBundle& bundle);

/// One document subset encoded under both schemes, with its gold records.
struct EncodedSplit {
  std::array<EncodedSet, 2> by_scheme;
  std::vector<PredictionRecord> gold;

  const EncodedSet& encoded(SchemeKind s) const { return by_scheme[static_cast<std::size_t>(s)]; }
};

EncodedSplit encode_split(const CorpusBundle& bundle, const Vocabulary& vocab, std::size_t max_len);

/// Ensemble member recipe; diversity comes from these four knobs.
struct MemberSpec {
  HeadKind head_kind = HeadKind::CLS;
  SchemeKind scheme = SchemeKind::ANONYMIZE;
  bool class_weighted = false;
  std::uint64_t seed = 0;

  static MemberSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Trains one member and writes its checkpoint. `dev` may be null.
TrainReport train_member(const MemberSpec& spec, const EncoderConfig& encoder,
                         const TrainHyper& hyper, const EncodedSplit& train,
                         const EncodedSplit* dev, const std::filesystem::path& checkpoint);

struct PipelineConfig {
  PipelineKind kind = PipelineKind::RUN3_STACK_VOTE;
  std::filesystem::path output_dir;
  CorpusPaths corpus;
  std::optional<CorpusPaths> test;
  std::optional<std::filesystem::path> vocab_path;  // built from the corpus when absent
  std::size_t vocab_size = 600;
  bool lowercase = true;
  std::size_t max_len = kDefaultMaxLen;
  EncoderConfig encoder;
  TrainHyper train;
  std::vector<MemberSpec> members;
  StackerConfig stacker;
  std::uint64_t partition_seed = 0;

  /// Parses and validates; every error is a ConfigError.
  static PipelineConfig from_json(const nlohmann::json& j);
};

struct PipelineResult {
  EnsembleManifest manifest;
  std::vector<PredictionRecord> predictions;
  std::optional<MetricsReport> metrics;
  /// Test micro-F1 of every trained model, keyed by checkpoint path.
  std::vector<std::pair<std::string, double>> member_f1;
  nlohmann::json report;
};

/// Trains every artifact the pipeline kind needs under cfg.output_dir, writes
/// manifest.json, and fuses on the test corpus when one is configured
/// (predictions.tsv, metrics.json, metrics.txt, member_metrics.json).
PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace drugprot
