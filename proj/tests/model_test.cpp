#include <doctest.h>

#include <cmath>

#include "drugprot/model.hpp"
#include "drugprot/tensor_file.hpp"
#include "drugprot/train.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace drugprot;
using testing::TempDir;

namespace {

RowVector sigmoid(const RowVector& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

bool same(const ModelParameters& a, const ModelParameters& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (*ta[i].second != *tb[i].second) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("initialization") {
  const auto cfg = testing::tiny_config(HeadKind::CLS, 3);
  const auto a = init_params(cfg);
  const auto b = init_params(cfg);
  CHECK(same(a, b));
  CHECK(cfg.head_dim() == 4);
  CHECK(a.emb_ln_g.isOnes());
  CHECK(a.layers[0].ln1_g.isOnes());
  CHECK(a.layers[0].ln2_g.isOnes());
  auto other = cfg;
  other.seed = 4;
  CHECK_FALSE(same(a, init_params(other)));
  CHECK(a.cls_w.cols() == kNumClasses);
}

TEST_CASE("invalid encoder configs are rejected") {
  auto cfg = testing::tiny_config(HeadKind::CLS, 1);
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = testing::tiny_config(HeadKind::CLS, 1);
  cfg.vocab_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_head("GRU"), ConfigError);
}

TEST_CASE("padding content never changes the output") {
  for (auto head : {HeadKind::CLS, HeadKind::LSTM, HeadKind::ATTN}) {
    auto p = testing::tiny_problem(head, 5);
    const auto& seq = p.seqs[0];
    REQUIRE(seq.n_real < 16);
    TokenSequence noisy = seq;
    Rng rng(1);
    for (std::size_t i = seq.n_real; i < noisy.ids.size(); ++i) {
      noisy.ids[i] = 4 + static_cast<int>(rng.below(16));
    }
    const auto a = predict(p.params, seq);
    const auto b = predict(p.params, noisy);
    CHECK(a.cls_feature == b.cls_feature);
    CHECK(a.logits.scores == b.logits.scores);
  }
}

TEST_CASE("forward pass basics") {
  auto p = testing::tiny_problem(HeadKind::CLS, 6);
  TokenSequence one;
  one.ids.assign(16, 0);
  one.attention_mask.assign(16, 0);
  one.ids[0] = 2;
  one.attention_mask[0] = 1;
  one.n_real = 1;
  const auto t = encoder_forward(p.params, one);
  CHECK(t.cls_feature.allFinite());
  CHECK(t.cls_feature.norm() > 0.0);
  CHECK(t.cls_feature.size() == 8);

  const auto trace = encoder_forward(p.params, p.seqs[1]);
  for (const auto& layer : trace.layers) {
    for (const auto& a : layer.attn) {
      CHECK(a.rows() == static_cast<Eigen::Index>(p.seqs[1].n_real));
      for (Eigen::Index r = 0; r < a.rows(); ++r) CHECK(std::abs(a.row(r).sum() - 1.0) < 1e-9);
    }
  }
  const auto pred = predict(p.params, p.seqs[1]);
  CHECK(pred.logits.scores.size() == kNumClasses);
  CHECK(std::abs(pred.logits.probs.sum() - 1.0) < 1e-9);
  const auto again = predict(p.params, p.seqs[1]);
  CHECK(again.logits.scores == pred.logits.scores);
}

TEST_CASE("attention pooling of identical states returns that state") {
  auto p = testing::tiny_problem(HeadKind::ATTN, 7);
  auto trace = encoder_forward(p.params, p.seqs[0]);
  RowVector h(8);
  for (int i = 0; i < 8; ++i) h(i) = 0.1 * i - 0.3;
  trace.hidden = h.replicate(trace.hidden.rows(), 1);
  head_forward(p.params, trace);
  CHECK((trace.pooled - h).norm() < 1e-12);
}

TEST_CASE("LSTM head on one position is a single cell step") {
  auto p = testing::tiny_problem(HeadKind::LSTM, 8);
  TokenSequence one;
  one.ids.assign(16, 0);
  one.attention_mask.assign(16, 0);
  one.ids[0] = 2;
  one.attention_mask[0] = 1;
  one.n_real = 1;
  auto trace = encoder_forward(p.params, one);
  const auto logits = head_forward(p.params, trace);
  const RowVector x = trace.hidden.row(0);
  const RowVector z = x * p.params.lstm_wx + p.params.lstm_b;
  const RowVector i = sigmoid(z.segment(0, 8));
  const RowVector g = z.segment(16, 8).array().tanh().matrix();
  const RowVector o = sigmoid(z.segment(24, 8));
  const RowVector c = i.cwiseProduct(g);
  const RowVector hh = o.cwiseProduct(RowVector(c.array().tanh().matrix()));
  CHECK((trace.pooled - hh).norm() < 1e-12);
  const RowVector scores = hh * p.params.cls_w + p.params.cls_b;
  CHECK((logits.scores - scores).norm() < 1e-12);
}

TEST_CASE("class-weighted cross-entropy") {
  LogitVector uniform;
  uniform.scores = RowVector::Zero(kNumClasses);
  uniform.probs = RowVector::Constant(kNumClasses, 1.0 / kNumClasses);
  ClassWeights w = ClassWeights::uniform();
  w.w[9] = 2.5;
  CHECK(class_weighted_ce(uniform, RelationType::INHIBITOR, w) ==
        doctest::Approx(2.5 * std::log(14.0)).epsilon(1e-12));

  auto p = testing::tiny_problem(HeadKind::CLS, 9);
  const auto pred = predict(p.params, p.seqs[0]);
  const double plain = class_weighted_ce(pred.logits, RelationType::ACTIVATOR,
                                         ClassWeights::uniform());
  CHECK(plain == doctest::Approx(-std::log(pred.logits.probs(1))).epsilon(1e-12));
  ClassWeights twice = ClassWeights::uniform();
  twice.w[1] = 2.0;
  CHECK(class_weighted_ce(pred.logits, RelationType::ACTIVATOR, twice) ==
        doctest::Approx(2.0 * plain).epsilon(1e-12));
}

TEST_CASE("gradients match finite differences for every head") {
  for (auto head : {HeadKind::CLS, HeadKind::LSTM, HeadKind::ATTN}) {
    CAPTURE(head_name(head));
    const auto p = testing::tiny_problem(head, 11);
    const auto r = testing::check_gradients(p.params, p.batch, p.weights);
    CAPTURE(r.worst);
    CHECK(r.max_rel < 1e-4);
    CHECK(r.checked == p.params.parameter_count());
  }
}

TEST_CASE("gradient vanishes without learning signal and on unused positions") {
  auto p = testing::tiny_problem(HeadKind::CLS, 12);
  p.params.cls_w.setZero();
  p.params.cls_b.setZero();
  p.params.cls_b(0, 3) = 1e3;
  std::vector<LabeledSequence> batch = {{&p.seqs[0], RelationType::AGONIST_ACTIVATOR}};
  const auto g = backward_gradients(p.params, batch, ClassWeights::uniform());
  double norm = 0.0;
  for (const auto& [name, t] : g.grads.tensors()) norm += t->squaredNorm();
  CHECK(std::sqrt(norm) < 1e-12);

  auto q = testing::tiny_problem(HeadKind::ATTN, 13);
  std::size_t longest = 0;
  for (const auto& s : q.seqs) longest = std::max(longest, s.n_real);
  REQUIRE(longest < 16);
  const auto gq = backward_gradients(q.params, q.batch, q.weights);
  CHECK(gq.grads.pos_emb.bottomRows(16 - static_cast<Eigen::Index>(longest)).isZero(0.0));
}

TEST_CASE("argmax is unchanged by a constant shift of the logits") {
  auto p = testing::tiny_problem(HeadKind::CLS, 14);
  const auto before = predict(p.params, p.seqs[2]);
  p.params.cls_b.array() += 7.5;
  const auto after = predict(p.params, p.seqs[2]);
  CHECK(before.label == after.label);
  CHECK((before.logits.probs - after.logits.probs).norm() < 1e-12);
}

TEST_CASE("a one-layer model overfits eight instances") {
  auto p = testing::tiny_problem(HeadKind::CLS, 15, 8);
  OptimizerState opt = init_optimizer(p.params, AdamWConfig{1e-2, 0.9, 0.999, 1e-8, 0.0});
  double loss = 1e9;
  int steps = 0;
  for (; steps < 500 && loss >= 0.01; ++steps) {
    auto g = backward_gradients(p.params, p.batch, ClassWeights::uniform());
    loss = g.loss;
    adamw_step(p.params, g.grads, opt);
  }
  CAPTURE(steps);
  CHECK(loss < 0.01);
}

TEST_CASE("checkpoints round-trip byte for byte") {
  TempDir dir;
  for (auto head : {HeadKind::CLS, HeadKind::LSTM, HeadKind::ATTN}) {
    const auto p = testing::tiny_problem(head, 16);
    save_model(dir / "a.dpt", p.params, {{"scheme", "MARKERS"}});
    const auto loaded = load_model(dir / "a.dpt");
    CHECK(loaded.params.config == p.params.config);
    CHECK(loaded.meta.at("scheme") == "MARKERS");
    save_model(dir / "b.dpt", loaded.params, loaded.meta);
    CHECK(testing::read_file(dir / "a.dpt") == testing::read_file(dir / "b.dpt"));
    const auto ta = p.params.tensors();
    const auto tb = loaded.params.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) {
      CHECK(*tb[i].second == ta[i].second->cast<float>().cast<double>());
    }
  }
}

TEST_CASE("tensor file layout and corruption") {
  TensorFile f;
  f.header = {{"k", 1}};
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  f.tensors.emplace_back("x", m);
  const auto bytes = encode_tensor_file(f);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "DPTENSOR");
  CHECK(bytes[8] == 1);
  const auto back = decode_tensor_file(bytes, "mem");
  CHECK(back.get("x") == m);
  CHECK(back.header == f.header);
  // last float is 6.0f = 0x40c00000 little-endian
  CHECK(static_cast<unsigned char>(bytes.back()) == 0x40);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 0xc0);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_tensor_file(bad, "mem"), DataError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_tensor_file(truncated, "mem"), DataError);
  CHECK_THROWS_AS(back.get("y"), DataError);
  f.tensors[0].second(0, 0) = std::nan("");
  CHECK_THROWS_AS(encode_tensor_file(f), NumericError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.dpt"), MissingArtifact);
}
