#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "drugprot/common.hpp"
#include "drugprot/tokenizer.hpp"

namespace drugprot {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class HeadKind { CLS, LSTM, ATTN };

std::string_view head_name(HeadKind k);
HeadKind parse_head(std::string_view name);

struct EncoderConfig {
  int layers = 2;
  int heads = 4;
  int hidden = 64;
  int ffn = 256;
  int max_len = static_cast<int>(kDefaultMaxLen);
  int vocab_size = 0;
  HeadKind head_kind = HeadKind::CLS;
  int n_classes = kNumClasses;
  std::uint64_t seed = 0;

  int head_dim() const { return hidden / heads; }
  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  bool operator==(const EncoderConfig&) const = default;
};

struct LayerParams {
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln1_g, ln1_b;
  Matrix w1, b1, w2, b2;
  Matrix ln2_g, ln2_b;
};

/// All trainable tensors. Biases and layer-norm vectors are 1×n rows.
/// The same type doubles as a gradient accumulator.
struct ModelParameters {
  EncoderConfig config;
  Matrix tok_emb;  // V × d
  Matrix pos_emb;  // max_len × d
  Matrix emb_ln_g, emb_ln_b;
  std::vector<LayerParams> layers;
  Matrix lstm_wx, lstm_wh, lstm_b;  // d × 4d, d × 4d, 1 × 4d; gate order i, f, g, o
  Matrix attn_w, attn_v;            // d × d, d × 1
  Matrix cls_w, cls_b;              // d × 14, 1 × 14

  /// Zero tensors with the shapes implied by `cfg`.
  static ModelParameters zeros(const EncoderConfig& cfg);

  /// Every tensor used by the configured head, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;

  std::size_t parameter_count() const;
};

ModelParameters init_params(const EncoderConfig& cfg);

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

struct LayerCache {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> attn;  // per head, L × L
  Matrix context;
  LayerNormCache ln1;
  Matrix e1;
  Matrix f1;  // pre-activation
  Matrix g;   // GELU(f1)
  LayerNormCache ln2;
};

struct LstmCache {
  std::vector<RowVector> gates;  // activated i, f, g, o (1 × 4d)
  std::vector<RowVector> c;      // c[t + 1] after step t; c[0] = 0
  std::vector<RowVector> h;      // likewise
};

struct AttnPoolCache {
  Matrix u;                // tanh(H W), L × d
  Eigen::VectorXd alpha;   // softmax weights over positions
};

/// Activations of one forward pass. Only the n_real unpadded positions are
/// materialised; padded positions are excluded from every attention and
/// pooling step, which is equivalent to an additive -inf mask.
struct ForwardTrace {
  std::vector<TokenId> ids;  // real positions only
  LayerNormCache emb_ln;
  std::vector<LayerCache> layers;
  Matrix hidden;  // final hidden states, n_real × d
  RowVector cls_feature;

  LstmCache lstm;
  AttnPoolCache attn_pool;
  RowVector pooled;  // classifier input
};

struct LogitVector {
  RowVector scores;
  RowVector probs;
  int argmax() const;
};

struct ClassWeights {
  std::array<double, kNumClasses> w{};
  static ClassWeights uniform();
  /// All weights positive and averaging to one.
  void validate() const;
};

ForwardTrace encoder_forward(const ModelParameters& params, const TokenSequence& seq);

/// Runs the configured head over `trace` and caches what backward needs.
LogitVector head_forward(const ModelParameters& params, ForwardTrace& trace);

/// -w[label] * log(max(p[label], 1e-12)).
double class_weighted_ce(const LogitVector& logits, RelationType label, const ClassWeights& w);

struct LabeledSequence {
  const TokenSequence* seq;
  RelationType label;
};

struct GradientResult {
  ModelParameters grads;
  double loss = 0.0;  // mean weighted cross-entropy over the batch
};

/// Exact reverse-mode gradients of the mean class-weighted cross-entropy.
/// Throws NumericError naming the first tensor with a non-finite entry.
GradientResult backward_gradients(const ModelParameters& params,
                                  std::span<const LabeledSequence> batch, const ClassWeights& w);

/// Loss only (no gradients); used by finite-difference checks.
double batch_loss(const ModelParameters& params, std::span<const LabeledSequence> batch,
                  const ClassWeights& w);

struct Prediction {
  RelationType label = RelationType::NONE;
  LogitVector logits;
  RowVector cls_feature;
};

Prediction predict(const ModelParameters& params, const TokenSequence& seq);

/// Writes parameters as a tensor file whose header holds the config and `meta`.
void save_model(const std::filesystem::path& path, const ModelParameters& params,
                const nlohmann::json& meta = nlohmann::json::object());

struct LoadedModel {
  ModelParameters params;
  nlohmann::json meta;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace drugprot
