#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "drugprot/corpus.hpp"
#include "drugprot/eval.hpp"
#include "drugprot/model.hpp"
#include "drugprot/tokenizer.hpp"
#include "drugprot/train.hpp"

namespace drugprot {

inline constexpr std::size_t kGroupSize = 5;
inline constexpr Eigen::Index kStackerHidden = 512;

/// Unique plurality label; NONE when the top count is shared. Throws on
/// an empty list.
RelationType majority_vote(std::span<const RelationType> labels);

struct MemberDescriptor {
  std::filesystem::path checkpoint;
  HeadKind head_kind = HeadKind::CLS;
  SchemeKind scheme = SchemeKind::ANONYMIZE;
  bool class_weighted = false;
};

struct EnsembleMember {
  MemberDescriptor desc;
  ModelParameters params;
  std::string id;  // FNV-1a checksum of the checkpoint bytes
};

/// Loads a member; head kind, scheme and weighting flag come from the
/// checkpoint header.
EnsembleMember load_member(const std::filesystem::path& checkpoint);

/// A fixed-order group of members. Order is significant: the stacker input
/// concatenates member features in exactly this order.
struct EnsembleGroup {
  std::vector<EnsembleMember> members;
  int iteration = 1;

  /// Exactly five members sharing vocabulary size and class count.
  void validate() const;
  std::vector<std::string> member_ids() const;
};

EnsembleGroup load_group(std::span<const std::filesystem::path> checkpoints, int iteration = 1);

/// Candidate pairs encoded under both tagging schemes, aligned by index.
/// Multi-label pairs repeat once per gold label (see EncodedSet::unique).
struct CandidateSet {
  std::array<EncodedSet, 2> by_scheme;

  const EncodedSet& encoded(SchemeKind s) const { return by_scheme[static_cast<std::size_t>(s)]; }
  const EncodedSet& keys() const { return by_scheme[0]; }
  std::size_t size() const { return keys().size(); }
  const std::vector<std::size_t>& unique() const { return keys().unique; }
};

CandidateSet build_candidates(const CorpusBundle& bundle, const Vocabulary& vocab,
                              std::size_t max_len);

/// Final-layer [CLS] activations of every member, concatenated in group order.
RowVector extract_cls_features(const EnsembleGroup& group, const CandidateSet& cands,
                               std::size_t index);

/// One feature row per candidate (all rows, including label repeats).
Matrix extract_feature_matrix(const EnsembleGroup& group, const CandidateSet& cands);

struct StackerParams {
  Matrix w1, b1;  // in × 512, 1 × 512
  Matrix w2, b2;  // 512 × 14, 1 × 14
  std::vector<std::string> member_ids;
  std::vector<int> member_dims;

  Eigen::Index input_dim() const { return w1.rows(); }
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;
};

StackerParams init_stacker(Eigen::Index input_dim, std::uint64_t seed);

/// Mean cross-entropy of the stacker over rows of `x` and its gradients.
struct StackerGradients {
  double loss = 0.0;
  StackerParams grads;
};
StackerGradients stacker_gradients(const StackerParams& s, const Matrix& x,
                                   std::span<const RelationType> y);
double stacker_loss(const StackerParams& s, const Matrix& x, std::span<const RelationType> y);

struct StackerConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static StackerConfig from_json(const nlohmann::json& j);
};

struct StackerReport {
  std::vector<double> epoch_loss;
  int best_epoch = 0;
};

/// Trains on fixed features; keeps the epoch with the lowest training loss.
StackerParams train_stacker(const Matrix& features, std::span<const RelationType> labels,
                            const StackerConfig& cfg, StackerReport* report = nullptr);

/// Extracts features from the frozen group on `ensemble_split` and trains.
StackerParams train_stacker(const EnsembleGroup& group, const CandidateSet& ensemble_split,
                            const StackerConfig& cfg, StackerReport* report = nullptr);

struct StackerOutput {
  RelationType label = RelationType::NONE;
  RowVector probs;
};

StackerOutput stacker_predict(const StackerParams& s, const RowVector& features);

void save_stacker(const std::filesystem::path& path, const StackerParams& s);
StackerParams load_stacker(const std::filesystem::path& path);

enum class PipelineKind { RUN1_STACK, RUN3_STACK_VOTE, RUN4_VOTE, RUN5_SINGLE };

std::string_view pipeline_name(PipelineKind k);
PipelineKind parse_pipeline(std::string_view name);

/// Per-candidate labels (indexed like cands.unique).
std::vector<RelationType> single_labels(const EnsembleMember& m, const CandidateSet& cands);
std::vector<RelationType> vote_labels(std::span<const EnsembleMember> members,
                                      const CandidateSet& cands);
std::vector<RelationType> stack_labels(const EnsembleGroup& group, const StackerParams& s,
                                       const CandidateSet& cands);

/// Non-NONE labels as submission records.
std::vector<PredictionRecord> to_records(const CandidateSet& cands,
                                         std::span<const RelationType> unique_labels);

/// Ensemble manifest: pipeline kind, vocabulary, and the ordered artifacts.
///   RUN1_STACK / RUN3_STACK_VOTE: "groups": [{"members": [...5], "stacker": path}]
///   RUN4_VOTE / RUN5_SINGLE:      "models": [...]
struct EnsembleManifest {
  PipelineKind kind = PipelineKind::RUN5_SINGLE;
  std::filesystem::path vocab;
  bool lowercase = true;
  std::size_t max_len = kDefaultMaxLen;
  struct Group {
    std::vector<std::filesystem::path> members;
    std::filesystem::path stacker;
  };
  std::vector<Group> groups;
  std::vector<std::filesystem::path> models;

  /// Artifact counts match the pipeline kind.
  void validate() const;
  nlohmann::json to_json() const;
  static EnsembleManifest from_json(const nlohmann::json& j, const std::filesystem::path& base);
};

/// Applies the fusion described by `manifest` to `cands`.
std::vector<PredictionRecord> fuse(const EnsembleManifest& manifest, const CandidateSet& cands);

}  // namespace drugprot
