#include "drugprot/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "drugprot/tensor_file.hpp"

namespace drugprot {

namespace {

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

struct StackerForward {
  Matrix z1;     // pre-activation
  Matrix a1;     // ReLU(z1)
  Matrix probs;  // softmax output
};

StackerForward stacker_forward(const StackerParams& s, const Matrix& x) {
  if (x.cols() != s.input_dim()) {
    throw DataError("stacker expects " + std::to_string(s.input_dim()) + " features, got " +
                    std::to_string(x.cols()));
  }
  StackerForward f;
  f.z1 = x * s.w1;
  f.z1.rowwise() += s.b1.row(0);
  f.a1 = f.z1.cwiseMax(0.0);
  f.probs = f.a1 * s.w2;
  f.probs.rowwise() += s.b2.row(0);
  softmax_rows(f.probs);
  return f;
}

RelationType argmax_label(const RowVector& v) {
  Eigen::Index idx = 0;
  v.maxCoeff(&idx);
  return relation_from_index(static_cast<int>(idx));
}

std::vector<std::string> path_strings(std::span<const std::filesystem::path> ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.generic_string());
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RelationType majority_vote(std::span<const RelationType> labels) {
  if (labels.empty()) throw DataError("majority_vote needs at least one label");
  std::array<std::size_t, kNumClasses> counts{};
  for (auto l : labels) ++counts[static_cast<std::size_t>(l)];
  const auto top = std::max_element(counts.begin(), counts.end());
  if (std::count(counts.begin(), counts.end(), *top) > 1) return RelationType::NONE;
  return static_cast<RelationType>(top - counts.begin());
}

EnsembleMember load_member(const std::filesystem::path& checkpoint) {
  EnsembleMember m;
  auto loaded = load_model(checkpoint);
  m.params = std::move(loaded.params);
  m.desc.checkpoint = checkpoint;
  m.desc.head_kind = m.params.config.head_kind;
  try {
    m.desc.scheme = parse_scheme(loaded.meta.value("scheme", std::string("ANONYMIZE")));
    m.desc.class_weighted = loaded.meta.value("class_weighted", false);
  } catch (const ConfigError& e) {
    throw DataError(checkpoint.string() + ": " + e.what());
  }
  m.id = file_checksum(checkpoint);
  return m;
}

void EnsembleGroup::validate() const {
  if (members.size() != kGroupSize) {
    throw ConfigError("an ensemble group needs exactly " + std::to_string(kGroupSize) +
                      " members, got " + std::to_string(members.size()));
  }
  for (const auto& m : members) {
    if (m.params.config.vocab_size != members.front().params.config.vocab_size ||
        m.params.config.n_classes != members.front().params.config.n_classes) {
      throw ConfigError("ensemble members disagree on vocabulary size or class count");
    }
  }
}

std::vector<std::string> EnsembleGroup::member_ids() const {
  std::vector<std::string> out;
  for (const auto& m : members) out.push_back(m.id);
  return out;
}

EnsembleGroup load_group(std::span<const std::filesystem::path> checkpoints, int iteration) {
  EnsembleGroup g;
  g.iteration = iteration;
  for (const auto& p : checkpoints) g.members.push_back(load_member(p));
  g.validate();
  return g;
}

CandidateSet build_candidates(const CorpusBundle& bundle, const Vocabulary& vocab,
                              std::size_t max_len) {
  CandidateSet c;
  const auto anon = generate_instances(bundle, SchemeKind::ANONYMIZE);
  const auto mark = generate_instances(bundle, SchemeKind::MARKERS);
  if (anon.size() != mark.size()) throw DataError("tagging schemes produced different instances");
  for (std::size_t i = 0; i < anon.size(); ++i) {
    if (anon[i].pmid != mark[i].pmid || anon[i].chem.eid != mark[i].chem.eid ||
        anon[i].gene.eid != mark[i].gene.eid || anon[i].label != mark[i].label) {
      throw DataError("tagging schemes produced misaligned instances");
    }
  }
  c.by_scheme[0] = encode_instances(anon, vocab, max_len);
  c.by_scheme[1] = encode_instances(mark, vocab, max_len);
  return c;
}

RowVector extract_cls_features(const EnsembleGroup& group, const CandidateSet& cands,
                               std::size_t index) {
  Eigen::Index total = 0;
  for (const auto& m : group.members) total += m.params.config.hidden;
  RowVector out(total);
  Eigen::Index at = 0;
  for (const auto& m : group.members) {
    const auto& seq = cands.encoded(m.desc.scheme).seqs.at(index);
    const ForwardTrace t = encoder_forward(m.params, seq);
    out.segment(at, t.cls_feature.size()) = t.cls_feature;
    at += t.cls_feature.size();
  }
  return out;
}

Matrix extract_feature_matrix(const EnsembleGroup& group, const CandidateSet& cands) {
  Eigen::Index total = 0;
  for (const auto& m : group.members) total += m.params.config.hidden;
  Matrix x(static_cast<Eigen::Index>(cands.size()), total);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = extract_cls_features(group, cands, i);
  }
  return x;
}

std::vector<std::pair<std::string, Matrix*>> StackerParams::tensors() {
  return {{"stacker.w1", &w1}, {"stacker.b1", &b1}, {"stacker.w2", &w2}, {"stacker.b2", &b2}};
}

std::vector<std::pair<std::string, const Matrix*>> StackerParams::tensors() const {
  return {{"stacker.w1", &w1}, {"stacker.b1", &b1}, {"stacker.w2", &w2}, {"stacker.b2", &b2}};
}

StackerParams init_stacker(Eigen::Index input_dim, std::uint64_t seed) {
  if (input_dim < 1) throw ConfigError("stacker input dimension must be positive");
  StackerParams s;
  Rng rng(seed);
  auto fill = [&](Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  };
  fill(s.w1, input_dim, kStackerHidden);
  s.b1 = Matrix::Zero(1, kStackerHidden);
  fill(s.w2, kStackerHidden, kNumClasses);
  s.b2 = Matrix::Zero(1, kNumClasses);
  return s;
}

StackerGradients stacker_gradients(const StackerParams& s, const Matrix& x,
                                   std::span<const RelationType> y) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw DataError("stacker batch and label counts differ (or are empty)");
  }
  const auto f = stacker_forward(s, x);
  const double inv_b = 1.0 / static_cast<double>(y.size());
  StackerGradients out;
  Matrix dz2 = f.probs;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const int c = to_index(y[i]);
    out.loss -= std::log(std::max(f.probs(r, c), 1e-12)) * inv_b;
    dz2(r, c) -= 1.0;
  }
  dz2 *= inv_b;
  out.grads.w2 = f.a1.transpose() * dz2;
  out.grads.b2 = dz2.colwise().sum();
  const Matrix dz1 = (dz2 * s.w2.transpose()).cwiseProduct((f.z1.array() > 0.0).cast<double>().matrix());
  out.grads.w1 = x.transpose() * dz1;
  out.grads.b1 = dz1.colwise().sum();
  return out;
}

double stacker_loss(const StackerParams& s, const Matrix& x, std::span<const RelationType> y) {
  const auto f = stacker_forward(s, x);
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    loss -= std::log(std::max(f.probs(static_cast<Eigen::Index>(i), to_index(y[i])), 1e-12));
  }
  return loss / static_cast<double>(y.size());
}

nlohmann::json StackerConfig::to_json() const {
  return {{"lr", lr}, {"weight_decay", weight_decay}, {"epochs", epochs}, {"batch", batch_size},
          {"seed", seed}};
}

StackerConfig StackerConfig::from_json(const nlohmann::json& j) {
  StackerConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch", c.batch_size);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad stacker config: ") + e.what());
  }
  if (c.epochs < 1 || c.epochs > 50) throw ConfigError("stacker epochs must be in 1..50");
  if (c.batch_size < 1 || !(c.lr > 0.0)) throw ConfigError("bad stacker batch size or lr");
  return c;
}

StackerParams train_stacker(const Matrix& features, std::span<const RelationType> labels,
                            const StackerConfig& cfg, StackerReport* report) {
  if (features.rows() == 0 || labels.empty()) throw DataError("empty ensemble split");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DataError("feature rows and labels differ in count");
  }
  StackerParams s = init_stacker(features.cols(), cfg.seed);
  std::vector<Matrix*> ptrs;
  for (auto& [name, t] : s.tensors()) ptrs.push_back(t);
  OptimizerState opt = init_optimizer(std::span<Matrix* const>(ptrs),
                                      AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  Rng rng(derive_seed(cfg.seed, 0x737461636bULL));

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  StackerReport local;
  StackerReport& rep = report != nullptr ? *report : local;
  rep = StackerReport{};
  StackerParams best = s;
  double best_loss = std::numeric_limits<double>::infinity();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      Matrix xb(static_cast<Eigen::Index>(end - b), features.cols());
      std::vector<RelationType> yb;
      for (std::size_t i = b; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - b)) = features.row(static_cast<Eigen::Index>(order[i]));
        yb.push_back(labels[order[i]]);
      }
      auto g = stacker_gradients(s, xb, yb);
      loss_sum += g.loss * static_cast<double>(yb.size());
      std::vector<const Matrix*> gptrs;
      for (const auto& [name, t] : std::as_const(g.grads).tensors()) gptrs.push_back(t);
      adamw_step(std::span<Matrix* const>(ptrs), std::span<const Matrix* const>(gptrs), opt);
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) throw NumericError("stacker loss diverged");
    rep.epoch_loss.push_back(epoch_loss);
    if (epoch_loss < best_loss) {
      best_loss = epoch_loss;
      best = s;
      rep.best_epoch = epoch;
    }
  }
  return best;
}

StackerParams train_stacker(const EnsembleGroup& group, const CandidateSet& ensemble_split,
                            const StackerConfig& cfg, StackerReport* report) {
  group.validate();
  const Matrix x = extract_feature_matrix(group, ensemble_split);
  StackerParams s = train_stacker(x, ensemble_split.keys().labels, cfg, report);
  s.member_ids = group.member_ids();
  for (const auto& m : group.members) s.member_dims.push_back(m.params.config.hidden);
  return s;
}

StackerOutput stacker_predict(const StackerParams& s, const RowVector& features) {
  const auto f = stacker_forward(s, features);
  StackerOutput out;
  out.probs = f.probs.row(0);
  out.label = argmax_label(out.probs);
  return out;
}

void save_stacker(const std::filesystem::path& path, const StackerParams& s) {
  TensorFile file;
  file.header = {{"format", "drugprot-stacker"},
                 {"input_dim", s.input_dim()},
                 {"hidden", kStackerHidden},
                 {"members", s.member_ids},
                 {"member_dims", s.member_dims}};
  for (const auto& [name, t] : s.tensors()) file.tensors.emplace_back(name, *t);
  save_tensor_file(path, file);
}

StackerParams load_stacker(const std::filesystem::path& path) {
  const TensorFile file = load_tensor_file(path);
  if (file.header.value("format", std::string()) != "drugprot-stacker") {
    throw DataError(path.string() + ": not a stacker checkpoint");
  }
  StackerParams s;
  s.w1 = file.get("stacker.w1");
  s.b1 = file.get("stacker.b1");
  s.w2 = file.get("stacker.w2");
  s.b2 = file.get("stacker.b2");
  s.member_ids = file.header.value("members", std::vector<std::string>{});
  s.member_dims = file.header.value("member_dims", std::vector<int>{});
  if (s.w1.cols() != kStackerHidden || s.b1.cols() != kStackerHidden ||
      s.w2.rows() != kStackerHidden || s.w2.cols() != kNumClasses || s.b2.cols() != kNumClasses) {
    throw DataError(path.string() + ": stacker tensor shapes are inconsistent");
  }
  const int dims = std::accumulate(s.member_dims.begin(), s.member_dims.end(), 0);
  if (dims != s.input_dim()) throw DataError(path.string() + ": member dims do not sum to input");
  return s;
}

std::string_view pipeline_name(PipelineKind k) {
  switch (k) {
    case PipelineKind::RUN1_STACK:
      return "RUN1_STACK";
    case PipelineKind::RUN3_STACK_VOTE:
      return "RUN3_STACK_VOTE";
    case PipelineKind::RUN4_VOTE:
      return "RUN4_VOTE";
    case PipelineKind::RUN5_SINGLE:
      return "RUN5_SINGLE";
  }
  return "?";
}

PipelineKind parse_pipeline(std::string_view name) {
  for (auto k : {PipelineKind::RUN1_STACK, PipelineKind::RUN3_STACK_VOTE, PipelineKind::RUN4_VOTE,
                 PipelineKind::RUN5_SINGLE}) {
    if (pipeline_name(k) == name) return k;
  }
  throw ConfigError("unknown pipeline kind '" + std::string(name) + "'");
}

std::vector<RelationType> single_labels(const EnsembleMember& m, const CandidateSet& cands) {
  const auto& set = cands.encoded(m.desc.scheme);
  std::vector<RelationType> out;
  out.reserve(set.unique.size());
  for (std::size_t i : set.unique) out.push_back(predict(m.params, set.seqs[i]).label);
  return out;
}

std::vector<RelationType> vote_labels(std::span<const EnsembleMember> members,
                                      const CandidateSet& cands) {
  if (members.empty()) throw ConfigError("voting needs at least one model");
  std::vector<std::vector<RelationType>> per_member;
  for (const auto& m : members) per_member.push_back(single_labels(m, cands));
  std::vector<RelationType> out(cands.unique().size());
  std::vector<RelationType> ballot(members.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t m = 0; m < members.size(); ++m) ballot[m] = per_member[m][i];
    out[i] = majority_vote(ballot);
  }
  return out;
}

std::vector<RelationType> stack_labels(const EnsembleGroup& group, const StackerParams& s,
                                       const CandidateSet& cands) {
  group.validate();
  if (group.member_ids() != s.member_ids) {
    throw ConfigError("ensemble members differ from (or are ordered unlike) the stacker's members");
  }
  std::vector<RelationType> out;
  out.reserve(cands.unique().size());
  for (std::size_t i : cands.unique()) {
    out.push_back(stacker_predict(s, extract_cls_features(group, cands, i)).label);
  }
  return out;
}

std::vector<PredictionRecord> to_records(const CandidateSet& cands,
                                         std::span<const RelationType> unique_labels) {
  const auto& keys = cands.keys();
  if (unique_labels.size() != keys.unique.size()) {
    throw DataError("label count does not match candidate count");
  }
  std::vector<PredictionRecord> out;
  for (std::size_t u = 0; u < unique_labels.size(); ++u) {
    if (unique_labels[u] == RelationType::NONE) continue;
    const std::size_t i = keys.unique[u];
    out.push_back({keys.pmid[i], unique_labels[u], keys.chem[i], keys.gene[i]});
  }
  return normalize_records(std::move(out));
}

void EnsembleManifest::validate() const {
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(std::string(pipeline_name(kind)) + " manifest: " + what);
  };
  switch (kind) {
    case PipelineKind::RUN1_STACK:
      need(groups.size() == 1 && models.empty(), "expects one group and no models");
      break;
    case PipelineKind::RUN3_STACK_VOTE:
      need(groups.size() == 5 && models.empty(), "expects five groups and no models");
      break;
    case PipelineKind::RUN4_VOTE:
      need(groups.empty() && models.size() == 5, "expects five models");
      break;
    case PipelineKind::RUN5_SINGLE:
      need(groups.empty() && models.size() == 1, "expects exactly one model");
      break;
  }
  for (const auto& g : groups) {
    need(g.members.size() == kGroupSize, "every group needs five members");
    need(!g.stacker.empty(), "every group needs a stacker");
  }
}

nlohmann::json EnsembleManifest::to_json() const {
  nlohmann::json j = {{"pipeline", std::string(pipeline_name(kind))},
                      {"vocab", vocab.generic_string()},
                      {"lowercase", lowercase},
                      {"max_len", max_len}};
  if (!groups.empty()) {
    j["groups"] = nlohmann::json::array();
    for (const auto& g : groups) {
      j["groups"].push_back({{"members", path_strings(g.members)},
                             {"stacker", g.stacker.generic_string()}});
    }
  }
  if (!models.empty()) j["models"] = path_strings(models);
  return j;
}

EnsembleManifest EnsembleManifest::from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base) {
  EnsembleManifest m;
  try {
    m.kind = parse_pipeline(j.at("pipeline").get<std::string>());
    m.vocab = resolve(base, j.at("vocab").get<std::string>());
    m.lowercase = j.value("lowercase", true);
    m.max_len = j.value("max_len", kDefaultMaxLen);
    for (const auto& g : j.value("groups", nlohmann::json::array())) {
      Group grp;
      for (const auto& p : g.at("members")) grp.members.push_back(resolve(base, p.get<std::string>()));
      grp.stacker = resolve(base, g.at("stacker").get<std::string>());
      m.groups.push_back(std::move(grp));
    }
    for (const auto& p : j.value("models", nlohmann::json::array())) {
      m.models.push_back(resolve(base, p.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad ensemble manifest: ") + e.what());
  }
  m.validate();
  return m;
}

std::vector<PredictionRecord> fuse(const EnsembleManifest& manifest, const CandidateSet& cands) {
  manifest.validate();
  std::vector<RelationType> labels;
  switch (manifest.kind) {
    case PipelineKind::RUN5_SINGLE:
      labels = single_labels(load_member(manifest.models.front()), cands);
      break;
    case PipelineKind::RUN4_VOTE: {
      std::vector<EnsembleMember> members;
      for (const auto& p : manifest.models) members.push_back(load_member(p));
      labels = vote_labels(members, cands);
      break;
    }
    case PipelineKind::RUN1_STACK:
    case PipelineKind::RUN3_STACK_VOTE: {
      std::vector<std::vector<RelationType>> per_group;
      for (std::size_t gi = 0; gi < manifest.groups.size(); ++gi) {
        const auto& g = manifest.groups[gi];
        const EnsembleGroup group = load_group(g.members, static_cast<int>(gi) + 1);
        per_group.push_back(stack_labels(group, load_stacker(g.stacker), cands));
      }
      if (per_group.size() == 1) {
        labels = std::move(per_group.front());
      } else {
        labels.resize(cands.unique().size());
        std::vector<RelationType> ballot(per_group.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
          for (std::size_t g = 0; g < per_group.size(); ++g) ballot[g] = per_group[g][i];
          labels[i] = majority_vote(ballot);
        }
      }
      break;
    }
  }
  return to_records(cands, labels);
}

}  // namespace drugprot
