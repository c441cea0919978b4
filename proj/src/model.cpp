#include "drugprot/model.hpp"

#include <cmath>
#include <numbers>

#include "drugprot/tensor_file.hpp"

namespace drugprot {

namespace {

constexpr double kLayerNormEps = 1e-12;
constexpr double kLogClamp = 1e-12;

using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

RowVector softmax(const RowVector& v) {
  RowVector out = (v.array() - v.maxCoeff()).exp();
  return out / out.sum();
}

Matrix layer_norm(const Matrix& x, const Matrix& g, const Matrix& b, LayerNormCache& cache) {
  const auto n = static_cast<double>(x.cols());
  cache.xhat.resize(x.rows(), x.cols());
  cache.inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / n;
    const RowVector centred = x.row(r).array() - mean;
    const double var = centred.squaredNorm() / n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(r) = inv;
    cache.xhat.row(r) = centred * inv;
  }
  Matrix y = cache.xhat.array().rowwise() * g.row(0).array();
  y.rowwise() += b.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& g, const LayerNormCache& cache,
                           Matrix& dg, Matrix& db) {
  const auto n = static_cast<double>(dy.cols());
  dg.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * g.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double sum = dxhat.row(r).sum();
    const double dot = dxhat.row(r).dot(cache.xhat.row(r));
    dx.row(r) = (cache.inv_std(r) / n) *
                (n * dxhat.row(r).array() - sum - cache.xhat.row(r).array() * dot).matrix();
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void add_bias(Matrix& m, const Matrix& b) { m.rowwise() += b.row(0); }

void fill_uniform(Matrix& m, Rng& rng, double bound) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

Matrix zero_matrix(Eigen::Index r, Eigen::Index c) { return Matrix::Zero(r, c); }

Matrix layer_forward(const LayerParams& p, const Matrix& x, int heads, LayerCache& cache) {
  const Eigen::Index len = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.input = x;
  cache.q = x * p.wq;
  add_bias(cache.q, p.bq);
  cache.k = x * p.wk;
  add_bias(cache.k, p.bk);
  cache.v = x * p.wv;
  add_bias(cache.v, p.bv);

  cache.attn.resize(static_cast<std::size_t>(heads));
  cache.context.resize(len, d);
  for (int h = 0; h < heads; ++h) {
    Matrix& a = cache.attn[static_cast<std::size_t>(h)];
    a = (cache.q.middleCols(h * dh, dh) * cache.k.middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(a);
    cache.context.middleCols(h * dh, dh) = a * cache.v.middleCols(h * dh, dh);
  }
  Matrix attn_out = cache.context * p.wo;
  add_bias(attn_out, p.bo);

  cache.e1 = layer_norm(x + attn_out, p.ln1_g, p.ln1_b, cache.ln1);
  cache.f1 = cache.e1 * p.w1;
  add_bias(cache.f1, p.b1);
  cache.g = cache.f1.unaryExpr([](double v) { return gelu(v); });
  Matrix f2 = cache.g * p.w2;
  add_bias(f2, p.b2);
  return layer_norm(cache.e1 + f2, p.ln2_g, p.ln2_b, cache.ln2);
}

Matrix layer_backward(const LayerParams& p, const LayerCache& cache, const Matrix& dout, int heads,
                      LayerParams& gp) {
  const Eigen::Index d = dout.cols();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix dr2 = layer_norm_backward(dout, p.ln2_g, cache.ln2, gp.ln2_g, gp.ln2_b);
  gp.w2 += cache.g.transpose() * dr2;
  gp.b2.row(0) += dr2.colwise().sum();
  const Matrix dg = dr2 * p.w2.transpose();
  const Matrix df1 = dg.array() * cache.f1.unaryExpr([](double v) { return gelu_grad(v); }).array();
  gp.w1 += cache.e1.transpose() * df1;
  gp.b1.row(0) += df1.colwise().sum();
  const Matrix de1 = dr2 + df1 * p.w1.transpose();

  const Matrix dr1 = layer_norm_backward(de1, p.ln1_g, cache.ln1, gp.ln1_g, gp.ln1_b);
  gp.wo += cache.context.transpose() * dr1;
  gp.bo.row(0) += dr1.colwise().sum();
  const Matrix dctx = dr1 * p.wo.transpose();

  Matrix dq(dout.rows(), d), dk(dout.rows(), d), dv(dout.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Matrix& a = cache.attn[static_cast<std::size_t>(h)];
    const auto dctx_h = dctx.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh) = a.transpose() * dctx_h;
    const Matrix da = dctx_h * cache.v.middleCols(h * dh, dh).transpose();
    const Eigen::VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
    const Matrix ds = (a.array() * (da.colwise() - row_dot).array()).matrix() * scale;
    dq.middleCols(h * dh, dh) = ds * cache.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) = ds.transpose() * cache.q.middleCols(h * dh, dh);
  }
  gp.wq += cache.input.transpose() * dq;
  gp.bq.row(0) += dq.colwise().sum();
  gp.wk += cache.input.transpose() * dk;
  gp.bk.row(0) += dk.colwise().sum();
  gp.wv += cache.input.transpose() * dv;
  gp.bv.row(0) += dv.colwise().sum();

  return dr1 + dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
}

void check_sequence(const EncoderConfig& cfg, const TokenSequence& seq) {
  if (seq.ids.size() != static_cast<std::size_t>(cfg.max_len) ||
      seq.attention_mask.size() != seq.ids.size()) {
    throw DataError("token sequence length " + std::to_string(seq.ids.size()) +
                    " does not match max_len " + std::to_string(cfg.max_len));
  }
  if (seq.n_real < 1 || seq.n_real > seq.ids.size()) {
    throw DataError("token sequence has no real positions");
  }
  for (std::size_t i = 0; i < seq.n_real; ++i) {
    if (seq.ids[i] < 0 || seq.ids[i] >= cfg.vocab_size) {
      throw DataError("token id " + std::to_string(seq.ids[i]) + " outside vocabulary");
    }
  }
}

/// Backpropagates from d(classifier input) through the head into dH.
Matrix head_backward(const ModelParameters& p, const ForwardTrace& t, const RowVector& dpooled,
                     ModelParameters& g) {
  const Eigen::Index len = t.hidden.rows();
  const Eigen::Index d = t.hidden.cols();
  Matrix dh = Matrix::Zero(len, d);
  switch (p.config.head_kind) {
    case HeadKind::CLS:
      dh.row(0) = dpooled;
      break;
    case HeadKind::ATTN: {
      const auto& c = t.attn_pool;
      dh = c.alpha * dpooled;  // outer product: row i += alpha_i * dpooled
      const Eigen::VectorXd dalpha = t.hidden * dpooled.transpose();
      const double avg = c.alpha.dot(dalpha);
      const Eigen::VectorXd ds = c.alpha.array() * (dalpha.array() - avg);
      g.attn_v += c.u.transpose() * ds;
      const Matrix du = ds * p.attn_v.transpose();
      const Matrix dpre = du.array() * (1.0 - c.u.array().square());
      g.attn_w += t.hidden.transpose() * dpre;
      dh += dpre * p.attn_w.transpose();
      break;
    }
    case HeadKind::LSTM: {
      const auto& c = t.lstm;
      RowVector dh_next = dpooled;
      RowVector dc_next = RowVector::Zero(d);
      for (Eigen::Index step = len - 1; step >= 0; --step) {
        const auto s = static_cast<std::size_t>(step);
        const RowVector& gates = c.gates[s];
        const auto i = gates.segment(0, d).array();
        const auto f = gates.segment(d, d).array();
        const auto gg = gates.segment(2 * d, d).array();
        const auto o = gates.segment(3 * d, d).array();
        const RowArray tanh_c = c.c[s + 1].array().tanh();
        const RowArray dcell = dc_next.array() + dh_next.array() * o * (1.0 - tanh_c.square());
        RowVector dz(4 * d);
        dz.segment(0, d) = (dcell * gg * i * (1.0 - i)).matrix();
        dz.segment(d, d) = (dcell * c.c[s].array() * f * (1.0 - f)).matrix();
        dz.segment(2 * d, d) = (dcell * i * (1.0 - gg.square())).matrix();
        dz.segment(3 * d, d) = (dh_next.array() * tanh_c * o * (1.0 - o)).matrix();
        g.lstm_wx += t.hidden.row(step).transpose() * dz;
        g.lstm_wh += c.h[s].transpose() * dz;
        g.lstm_b.row(0) += dz;
        dh.row(step) += dz * p.lstm_wx.transpose();
        dh_next = dz * p.lstm_wh.transpose();
        dc_next = (dcell * f).matrix();
      }
      break;
    }
  }
  return dh;
}

void encoder_backward(const ModelParameters& p, const ForwardTrace& t, Matrix dh,
                      ModelParameters& g) {
  const int heads = p.config.heads;
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    dh = layer_backward(p.layers[l], t.layers[l], dh, heads, g.layers[l]);
  }
  const Matrix dx0 = layer_norm_backward(dh, p.emb_ln_g, t.emb_ln, g.emb_ln_g, g.emb_ln_b);
  for (Eigen::Index pos = 0; pos < dx0.rows(); ++pos) {
    g.tok_emb.row(t.ids[static_cast<std::size_t>(pos)]) += dx0.row(pos);
    g.pos_emb.row(pos) += dx0.row(pos);
  }
}

}  // namespace

std::string_view head_name(HeadKind k) {
  switch (k) {
    case HeadKind::CLS:
      return "CLS";
    case HeadKind::LSTM:
      return "LSTM";
    case HeadKind::ATTN:
      return "ATTN";
  }
  return "?";
}

HeadKind parse_head(std::string_view name) {
  if (name == "CLS") return HeadKind::CLS;
  if (name == "LSTM") return HeadKind::LSTM;
  if (name == "ATTN") return HeadKind::ATTN;
  throw ConfigError("unknown head kind '" + std::string(name) + "'");
}

void EncoderConfig::validate() const {
  if (layers < 1 || heads < 1 || hidden < 1 || ffn < 1 || max_len < 8 || vocab_size < 1) {
    throw ConfigError("encoder config has non-positive sizes (or max_len < 8)");
  }
  if (hidden % heads != 0) throw ConfigError("hidden size must be divisible by head count");
  if (n_classes != kNumClasses) throw ConfigError("n_classes must be 14");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"layers", layers},     {"heads", heads},
          {"hidden", hidden},     {"ffn", ffn},
          {"max_len", max_len},   {"vocab_size", vocab_size},
          {"head_kind", std::string(head_name(head_kind))},
          {"n_classes", n_classes}, {"seed", seed}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.hidden = j.value("hidden", c.hidden);
    c.ffn = j.value("ffn", 4 * c.hidden);
    c.max_len = j.value("max_len", c.max_len);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.head_kind = parse_head(j.value("head_kind", std::string("CLS")));
    c.n_classes = j.value("n_classes", c.n_classes);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad encoder config: ") + e.what());
  }
  return c;
}

ModelParameters ModelParameters::zeros(const EncoderConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = cfg.hidden;
  const Eigen::Index f = cfg.ffn;
  ModelParameters p;
  p.config = cfg;
  p.tok_emb = zero_matrix(cfg.vocab_size, d);
  p.pos_emb = zero_matrix(cfg.max_len, d);
  p.emb_ln_g = zero_matrix(1, d);
  p.emb_ln_b = zero_matrix(1, d);
  p.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& l : p.layers) {
    for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo}) *m = zero_matrix(d, d);
    for (Matrix* m : {&l.bq, &l.bk, &l.bv, &l.bo, &l.ln1_g, &l.ln1_b, &l.ln2_g, &l.ln2_b, &l.b2}) {
      *m = zero_matrix(1, d);
    }
    l.w1 = zero_matrix(d, f);
    l.b1 = zero_matrix(1, f);
    l.w2 = zero_matrix(f, d);
  }
  if (cfg.head_kind == HeadKind::LSTM) {
    p.lstm_wx = zero_matrix(d, 4 * d);
    p.lstm_wh = zero_matrix(d, 4 * d);
    p.lstm_b = zero_matrix(1, 4 * d);
  } else if (cfg.head_kind == HeadKind::ATTN) {
    p.attn_w = zero_matrix(d, d);
    p.attn_v = zero_matrix(d, 1);
  }
  p.cls_w = zero_matrix(d, cfg.n_classes);
  p.cls_b = zero_matrix(1, cfg.n_classes);
  return p;
}

std::vector<std::pair<std::string, Matrix*>> ModelParameters::tensors() {
  std::vector<std::pair<std::string, Matrix*>> out = {
      {"embeddings.token", &tok_emb},
      {"embeddings.position", &pos_emb},
      {"embeddings.ln.gamma", &emb_ln_g},
      {"embeddings.ln.beta", &emb_ln_b},
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string pre = "layer" + std::to_string(i) + ".";
    auto& l = layers[i];
    out.insert(out.end(), {{pre + "attn.wq", &l.wq},       {pre + "attn.bq", &l.bq},
                           {pre + "attn.wk", &l.wk},       {pre + "attn.bk", &l.bk},
                           {pre + "attn.wv", &l.wv},       {pre + "attn.bv", &l.bv},
                           {pre + "attn.wo", &l.wo},       {pre + "attn.bo", &l.bo},
                           {pre + "ln1.gamma", &l.ln1_g},  {pre + "ln1.beta", &l.ln1_b},
                           {pre + "ffn.w1", &l.w1},        {pre + "ffn.b1", &l.b1},
                           {pre + "ffn.w2", &l.w2},        {pre + "ffn.b2", &l.b2},
                           {pre + "ln2.gamma", &l.ln2_g},  {pre + "ln2.beta", &l.ln2_b}});
  }
  if (config.head_kind == HeadKind::LSTM) {
    out.insert(out.end(),
               {{"head.lstm.wx", &lstm_wx}, {"head.lstm.wh", &lstm_wh}, {"head.lstm.b", &lstm_b}});
  } else if (config.head_kind == HeadKind::ATTN) {
    out.insert(out.end(), {{"head.attn.w", &attn_w}, {"head.attn.v", &attn_v}});
  }
  out.insert(out.end(), {{"classifier.w", &cls_w}, {"classifier.b", &cls_b}});
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParameters::tensors() const {
  auto mut = const_cast<ModelParameters*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

ModelParameters init_params(const EncoderConfig& cfg) {
  ModelParameters p = ModelParameters::zeros(cfg);
  Rng rng(cfg.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  for (auto& [name, t] : p.tensors()) {
    const bool is_vector = name.ends_with(".gamma") || name.ends_with(".beta") ||
                           name.ends_with(".b") || name.ends_with(".bq") ||
                           name.ends_with(".bk") || name.ends_with(".bv") ||
                           name.ends_with(".bo") || name.ends_with(".b1") || name.ends_with(".b2");
    if (is_vector) {
      if (name.ends_with(".gamma")) t->setOnes();
      continue;
    }
    fill_uniform(*t, rng, bound);
  }
  return p;
}

int LogitVector::argmax() const {
  Eigen::Index idx = 0;
  scores.maxCoeff(&idx);
  return static_cast<int>(idx);
}

ClassWeights ClassWeights::uniform() {
  ClassWeights w;
  w.w.fill(1.0);
  return w;
}

void ClassWeights::validate() const {
  double sum = 0.0;
  for (double x : w) {
    if (!(x > 0.0) || !std::isfinite(x)) throw NumericError("class weights must be positive");
    sum += x;
  }
  if (std::abs(sum / kNumClasses - 1.0) > 1e-9) throw NumericError("class weights must average 1");
}

ForwardTrace encoder_forward(const ModelParameters& params, const TokenSequence& seq) {
  const auto& cfg = params.config;
  check_sequence(cfg, seq);
  const auto len = static_cast<Eigen::Index>(seq.n_real);

  ForwardTrace t;
  t.ids.assign(seq.ids.begin(), seq.ids.begin() + len);
  Matrix x(len, cfg.hidden);
  for (Eigen::Index pos = 0; pos < len; ++pos) {
    x.row(pos) = params.tok_emb.row(t.ids[static_cast<std::size_t>(pos)]) + params.pos_emb.row(pos);
  }
  x = layer_norm(x, params.emb_ln_g, params.emb_ln_b, t.emb_ln);
  t.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    x = layer_forward(params.layers[l], x, cfg.heads, t.layers[l]);
  }
  t.hidden = std::move(x);
  t.cls_feature = t.hidden.row(0);
  return t;
}

LogitVector head_forward(const ModelParameters& params, ForwardTrace& t) {
  const Eigen::Index len = t.hidden.rows();
  const Eigen::Index d = t.hidden.cols();
  switch (params.config.head_kind) {
    case HeadKind::CLS:
      t.pooled = t.cls_feature;
      break;
    case HeadKind::ATTN: {
      auto& c = t.attn_pool;
      c.u = (t.hidden * params.attn_w).array().tanh();
      Eigen::VectorXd s = c.u * params.attn_v;
      s = (s.array() - s.maxCoeff()).exp();
      c.alpha = s / s.sum();
      t.pooled = c.alpha.transpose() * t.hidden;
      break;
    }
    case HeadKind::LSTM: {
      auto& c = t.lstm;
      c.gates.assign(static_cast<std::size_t>(len), RowVector());
      c.c.assign(static_cast<std::size_t>(len) + 1, RowVector::Zero(d));
      c.h.assign(static_cast<std::size_t>(len) + 1, RowVector::Zero(d));
      for (Eigen::Index step = 0; step < len; ++step) {
        const auto s = static_cast<std::size_t>(step);
        RowVector z = t.hidden.row(step) * params.lstm_wx + c.h[s] * params.lstm_wh;
        z += params.lstm_b.row(0);
        RowVector& gates = c.gates[s];
        gates.resize(4 * d);
        for (Eigen::Index k = 0; k < d; ++k) {
          gates(k) = sigmoid(z(k));
          gates(d + k) = sigmoid(z(d + k));
          gates(2 * d + k) = std::tanh(z(2 * d + k));
          gates(3 * d + k) = sigmoid(z(3 * d + k));
        }
        c.c[s + 1] = (gates.segment(d, d).array() * c.c[s].array() +
                      gates.segment(0, d).array() * gates.segment(2 * d, d).array())
                         .matrix();
        c.h[s + 1] = (gates.segment(3 * d, d).array() * c.c[s + 1].array().tanh()).matrix();
      }
      t.pooled = c.h.back();
      break;
    }
  }
  LogitVector out;
  out.scores = t.pooled * params.cls_w + params.cls_b.row(0);
  out.probs = softmax(out.scores);
  return out;
}

double class_weighted_ce(const LogitVector& logits, RelationType label, const ClassWeights& w) {
  const int y = to_index(label);
  return -w.w[static_cast<std::size_t>(y)] * std::log(std::max(logits.probs(y), kLogClamp));
}

GradientResult backward_gradients(const ModelParameters& params,
                                  std::span<const LabeledSequence> batch, const ClassWeights& w) {
  GradientResult out{ModelParameters::zeros(params.config), 0.0};
  if (batch.empty()) return out;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    ForwardTrace t = encoder_forward(params, *item.seq);
    const LogitVector logits = head_forward(params, t);
    out.loss += class_weighted_ce(logits, item.label, w) * inv_b;

    const int y = to_index(item.label);
    if (logits.probs(y) <= kLogClamp) continue;  // clamped: locally constant loss
    RowVector dscores = logits.probs;
    dscores(y) -= 1.0;
    dscores *= w.w[static_cast<std::size_t>(y)] * inv_b;

    out.grads.cls_w += t.pooled.transpose() * dscores;
    out.grads.cls_b.row(0) += dscores;
    const RowVector dpooled = dscores * params.cls_w.transpose();
    Matrix dh = head_backward(params, t, dpooled, out.grads);
    encoder_backward(params, t, std::move(dh), out.grads);
  }
  for (const auto& [name, g] : out.grads.tensors()) {
    if (!g->allFinite()) throw NumericError("non-finite gradient in tensor '" + name + "'");
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  return out;
}

double batch_loss(const ModelParameters& params, std::span<const LabeledSequence> batch,
                  const ClassWeights& w) {
  double loss = 0.0;
  for (const auto& item : batch) {
    ForwardTrace t = encoder_forward(params, *item.seq);
    loss += class_weighted_ce(head_forward(params, t), item.label, w);
  }
  return batch.empty() ? 0.0 : loss / static_cast<double>(batch.size());
}

Prediction predict(const ModelParameters& params, const TokenSequence& seq) {
  ForwardTrace t = encoder_forward(params, seq);
  Prediction p;
  p.logits = head_forward(params, t);
  p.label = relation_from_index(p.logits.argmax());
  p.cls_feature = t.cls_feature;
  return p;
}

void save_model(const std::filesystem::path& path, const ModelParameters& params,
                const nlohmann::json& meta) {
  TensorFile file;
  file.header = {{"format", "drugprot-encoder"}, {"config", params.config.to_json()}, {"meta", meta}};
  for (const auto& [name, t] : params.tensors()) file.tensors.emplace_back(name, *t);
  save_tensor_file(path, file);
}

LoadedModel load_model(const std::filesystem::path& path) {
  TensorFile file = load_tensor_file(path);
  if (file.header.value("format", std::string()) != "drugprot-encoder") {
    throw DataError(path.string() + ": not an encoder checkpoint");
  }
  LoadedModel out{ModelParameters::zeros(EncoderConfig::from_json(file.header.at("config"))),
                  file.header.value("meta", nlohmann::json::object())};
  auto slots = out.params.tensors();
  if (slots.size() != file.tensors.size()) {
    throw DataError(path.string() + ": tensor count does not match config");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& [name, value] = file.tensors[i];
    if (name != slots[i].first || value.rows() != slots[i].second->rows() ||
        value.cols() != slots[i].second->cols()) {
      throw DataError(path.string() + ": tensor '" + name + "' does not match config");
    }
    *slots[i].second = value;
  }
  return out;
}

}  // namespace drugprot
