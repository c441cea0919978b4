#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "drugprot/corpus.hpp"
#include "drugprot/eval.hpp"
#include "drugprot/model.hpp"
#include "drugprot/tokenizer.hpp"

namespace drugprot {

enum class PartitionKind { SPLIT_70_20_10, FOLD_80_20, FULL_100 };

std::string_view partition_name(PartitionKind k);
PartitionKind parse_partition(std::string_view name);

struct PartitionPlan {
  PartitionKind kind = PartitionKind::SPLIT_70_20_10;
  int iteration = 1;
  std::vector<std::string> train_docs;
  std::vector<std::string> dev_docs;
  std::vector<std::string> ensemble_docs;
};

/// Document-level splits. SPLIT and FOLD kinds yield five plans, each drawn
/// from a fresh shuffle seeded by derive_seed(seed, iteration); FULL_100
/// yields one plan with every document in train.
std::vector<PartitionPlan> make_partitions(std::span<const std::string> pmids, PartitionKind kind,
                                           std::uint64_t seed);

/// w_c = N / (K n_c), then rescaled to mean 1. K = counts.size(). A class with
/// zero count receives the largest present weight.
std::vector<double> inverse_frequency_weights(std::span<const std::size_t> counts);

ClassWeights compute_class_weights(std::span<const SentenceInstance> instances);
ClassWeights compute_class_weights(std::span<const RelationType> labels);

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct OptimizerState {
  AdamWConfig hp;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

OptimizerState init_optimizer(std::span<Matrix* const> params, const AdamWConfig& hp);

/// One decoupled-weight-decay Adam update with bias correction:
///   p <- p - lr*wd*p - lr * mhat / (sqrt(vhat) + eps)
void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                OptimizerState& state);

OptimizerState init_optimizer(ModelParameters& params, const AdamWConfig& hp);
void adamw_step(ModelParameters& params, const ModelParameters& grads, OptimizerState& state);

/// Encoded instances ready for the model. Multi-label pairs appear once per
/// gold label; `unique` indexes the first occurrence of each pair.
struct EncodedSet {
  std::vector<std::string> pmid, chem, gene;
  std::vector<TokenSequence> seqs;
  std::vector<RelationType> labels;
  std::vector<std::size_t> unique;

  std::size_t size() const { return seqs.size(); }
};

EncodedSet encode_instances(std::span<const SentenceInstance> instances, const Vocabulary& vocab,
                            std::size_t max_len);

/// Argmax predictions for every unique pair, NONE rows omitted.
std::vector<PredictionRecord> predict_records(const ModelParameters& params, const EncodedSet& set);

struct TrainHyper {
  AdamWConfig adamw;
  int epochs = 10;
  int batch_size = 16;
  std::uint64_t seed = 0;
  bool class_weighted = false;

  nlohmann::json to_json() const;
  static TrainHyper from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> dev_f1;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  std::string checkpoint;

  /// Wall times are omitted when `include_timing` is false, which makes the
  /// report reproducible bit for bit.
  nlohmann::json to_json(bool include_timing = true) const;
};

struct TrainJob {
  EncoderConfig config;
  TrainHyper hyper;
  const EncodedSet* train = nullptr;
  const EncodedSet* dev = nullptr;  // null or empty: keep the last epoch
  std::span<const PredictionRecord> dev_gold;
  std::filesystem::path checkpoint;
  nlohmann::json meta = nlohmann::json::object();
};

/// Trains for at most hyper.epochs epochs, keeps the parameters of the epoch
/// with the best dev micro-F1 and writes them to job.checkpoint.
TrainReport train_model(const TrainJob& job);

}  // namespace drugprot
