#include "drugprot/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace drugprot {

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

void shuffle(std::vector<std::string>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

std::vector<std::string> sorted_slice(const std::vector<std::string>& v, std::size_t from,
                                      std::size_t to) {
  std::vector<std::string> out(v.begin() + static_cast<std::ptrdiff_t>(from),
                               v.begin() + static_cast<std::ptrdiff_t>(to));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
  return out;
}

std::size_t round_share(std::size_t n, double share) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * share));
}

std::vector<Matrix*> tensor_ptrs(ModelParameters& p) {
  std::vector<Matrix*> out;
  for (auto& [name, t] : p.tensors()) out.push_back(t);
  return out;
}

}  // namespace

std::string_view partition_name(PartitionKind k) {
  switch (k) {
    case PartitionKind::SPLIT_70_20_10:
      return "SPLIT_70_20_10";
    case PartitionKind::FOLD_80_20:
      return "FOLD_80_20";
    case PartitionKind::FULL_100:
      return "FULL_100";
  }
  return "?";
}

PartitionKind parse_partition(std::string_view name) {
  if (name == "SPLIT_70_20_10") return PartitionKind::SPLIT_70_20_10;
  if (name == "FOLD_80_20") return PartitionKind::FOLD_80_20;
  if (name == "FULL_100") return PartitionKind::FULL_100;
  throw ConfigError("unknown partition kind '" + std::string(name) + "'");
}

std::vector<PartitionPlan> make_partitions(std::span<const std::string> pmids, PartitionKind kind,
                                           std::uint64_t seed) {
  std::vector<std::string> base(pmids.begin(), pmids.end());
  std::sort(base.begin(), base.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
  if (std::adjacent_find(base.begin(), base.end()) != base.end()) {
    throw DataError("duplicate document ids passed to make_partitions");
  }
  if (base.size() < 10) {
    throw DataError("need at least 10 documents to partition, got " + std::to_string(base.size()));
  }
  const std::size_t n = base.size();

  std::vector<PartitionPlan> plans;
  if (kind == PartitionKind::FULL_100) {
    PartitionPlan p;
    p.kind = kind;
    p.iteration = 1;
    p.train_docs = base;
    plans.push_back(std::move(p));
    return plans;
  }

  for (int it = 1; it <= 5; ++it) {
    std::vector<std::string> docs = base;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(it)));
    shuffle(docs, rng);
    PartitionPlan p;
    p.kind = kind;
    p.iteration = it;
    if (kind == PartitionKind::SPLIT_70_20_10) {
      const std::size_t n_train = round_share(n, 0.7);
      const std::size_t n_dev = round_share(n, 0.2);
      p.train_docs = sorted_slice(docs, 0, n_train);
      p.dev_docs = sorted_slice(docs, n_train, n_train + n_dev);
      p.ensemble_docs = sorted_slice(docs, n_train + n_dev, n);
    } else {
      const std::size_t n_train = round_share(n, 0.8);
      p.train_docs = sorted_slice(docs, 0, n_train);
      p.dev_docs = sorted_slice(docs, n_train, n);
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

std::vector<double> inverse_frequency_weights(std::span<const std::size_t> counts) {
  const std::size_t k = counts.size();
  if (k == 0) throw ConfigError("no classes to weight");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (total == 0.0) throw DataError("cannot compute class weights from zero instances");

  std::vector<double> w(k, 0.0);
  double max_present = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    w[c] = total / (static_cast<double>(k) * static_cast<double>(counts[c]));
    max_present = std::max(max_present, w[c]);
  }
  std::string absent;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      absent += (absent.empty() ? "" : ", ") + std::to_string(c);
      w[c] = max_present;
    }
  }
  if (!absent.empty()) {
    log_warning("classes absent from training data (" + absent +
                "); using the largest present weight");
  }
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(k);
  for (auto& x : w) x /= mean;
  return w;
}

ClassWeights compute_class_weights(std::span<const RelationType> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (auto l : labels) ++counts[static_cast<std::size_t>(l)];
  const auto w = inverse_frequency_weights(counts);
  ClassWeights out;
  std::copy(w.begin(), w.end(), out.w.begin());
  return out;
}

ClassWeights compute_class_weights(std::span<const SentenceInstance> instances) {
  std::vector<RelationType> labels;
  labels.reserve(instances.size());
  for (const auto& i : instances) labels.push_back(i.label);
  return compute_class_weights(labels);
}

OptimizerState init_optimizer(std::span<Matrix* const> params, const AdamWConfig& hp) {
  OptimizerState s;
  s.hp = hp;
  for (const Matrix* p : params) {
    s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
    s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ConfigError("optimizer state does not match parameter list");
  }
  const auto& hp = state.hp;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = *grads[i];
    if (p.rows() != g.rows() || p.cols() != g.cols()) {
      throw ConfigError("gradient shape does not match parameter shape");
    }
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g.cwiseProduct(g);
    p *= (1.0 - hp.lr * hp.weight_decay);
    p.array() -= hp.lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + hp.eps);
    if (!p.allFinite()) throw NumericError("non-finite parameter after AdamW step");
  }
}

OptimizerState init_optimizer(ModelParameters& params, const AdamWConfig& hp) {
  const auto ptrs = tensor_ptrs(params);
  return init_optimizer(std::span<Matrix* const>(ptrs), hp);
}

void adamw_step(ModelParameters& params, const ModelParameters& grads, OptimizerState& state) {
  const auto ptrs = tensor_ptrs(params);
  std::vector<const Matrix*> gptrs;
  for (const auto& [name, t] : grads.tensors()) gptrs.push_back(t);
  adamw_step(std::span<Matrix* const>(ptrs), std::span<const Matrix* const>(gptrs), state);
}

EncodedSet encode_instances(std::span<const SentenceInstance> instances, const Vocabulary& vocab,
                            std::size_t max_len) {
  EncodedSet set;
  for (const auto& inst : instances) {
    const bool repeat = !set.pmid.empty() && set.pmid.back() == inst.pmid &&
                        set.chem.back() == inst.chem.eid && set.gene.back() == inst.gene.eid;
    if (!repeat) set.unique.push_back(set.seqs.size());
    set.pmid.push_back(inst.pmid);
    set.chem.push_back(inst.chem.eid);
    set.gene.push_back(inst.gene.eid);
    set.seqs.push_back(encode_instance(inst, vocab, max_len));
    set.labels.push_back(inst.label);
  }
  return set;
}

std::vector<PredictionRecord> predict_records(const ModelParameters& params, const EncodedSet& set) {
  std::vector<PredictionRecord> out;
  for (std::size_t i : set.unique) {
    const auto p = predict(params, set.seqs[i]);
    if (p.label != RelationType::NONE) out.push_back({set.pmid[i], p.label, set.chem[i], set.gene[i]});
  }
  return normalize_records(std::move(out));
}

nlohmann::json TrainHyper::to_json() const {
  return {{"lr", adamw.lr},
          {"beta1", adamw.beta1},
          {"beta2", adamw.beta2},
          {"eps", adamw.eps},
          {"weight_decay", adamw.weight_decay},
          {"epochs", epochs},
          {"batch", batch_size},
          {"seed", seed},
          {"class_weighted", class_weighted}};
}

TrainHyper TrainHyper::from_json(const nlohmann::json& j) {
  TrainHyper h;
  try {
    h.adamw.lr = j.value("lr", h.adamw.lr);
    h.adamw.beta1 = j.value("beta1", h.adamw.beta1);
    h.adamw.beta2 = j.value("beta2", h.adamw.beta2);
    h.adamw.eps = j.value("eps", h.adamw.eps);
    h.adamw.weight_decay = j.value("weight_decay", h.adamw.weight_decay);
    h.epochs = j.value("epochs", h.epochs);
    h.batch_size = j.value("batch", h.batch_size);
    h.seed = j.value("seed", h.seed);
    h.class_weighted = j.value("class_weighted", h.class_weighted);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad training hyperparameters: ") + e.what());
  }
  if (h.epochs < 1 || h.epochs > 10) throw ConfigError("epochs must be in 1..10");
  if (h.batch_size < 1) throw ConfigError("batch must be positive");
  if (!(h.adamw.lr > 0.0)) throw ConfigError("lr must be positive");
  return h;
}

nlohmann::json TrainReport::to_json(bool include_timing) const {
  nlohmann::json j;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : epochs) {
    nlohmann::json row = {{"epoch", e.epoch}, {"train_loss", e.train_loss}};
    row["dev_f1"] = e.dev_f1 ? nlohmann::json(*e.dev_f1) : nlohmann::json(nullptr);
    if (include_timing) row["seconds"] = e.seconds;
    j["epochs"].push_back(std::move(row));
  }
  j["best_epoch"] = best_epoch;
  j["checkpoint"] = checkpoint;
  return j;
}

TrainReport train_model(const TrainJob& job) {
  if (job.train == nullptr || job.train->size() == 0) throw DataError("empty training set");
  if (job.hyper.epochs < 1 || job.hyper.epochs > 10) throw ConfigError("epochs must be in 1..10");
  const auto& train = *job.train;
  const bool has_dev = job.dev != nullptr && job.dev->size() > 0;

  ModelParameters params = init_params(job.config);
  const ClassWeights weights =
      job.hyper.class_weighted ? compute_class_weights(train.labels) : ClassWeights::uniform();
  OptimizerState opt = init_optimizer(params, job.hyper.adamw);
  Rng rng(derive_seed(job.hyper.seed, 0x7261696eULL));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(job.hyper.batch_size);

  TrainReport report;
  ModelParameters best = params;
  double best_f1 = -1.0;
  std::vector<LabeledSequence> items;
  for (int epoch = 1; epoch <= job.hyper.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      items.clear();
      for (std::size_t i = b; i < std::min(order.size(), b + batch); ++i) {
        items.push_back({&train.seqs[order[i]], train.labels[order[i]]});
      }
      GradientResult g;
      try {
        g = backward_gradients(params, items, weights);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b / batch) + ": " + e.what());
      }
      loss_sum += g.loss * static_cast<double>(items.size());
      adamw_step(params, g.grads, opt);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    if (!std::isfinite(rec.train_loss)) {
      throw NumericError("training loss is not finite at epoch " + std::to_string(epoch));
    }
    if (has_dev) {
      const auto pred = predict_records(params, *job.dev);
      rec.dev_f1 = micro_metrics(job.dev_gold, pred).overall.f1;
      if (*rec.dev_f1 > best_f1) {
        best_f1 = *rec.dev_f1;
        best = params;
        report.best_epoch = epoch;
      }
    } else {
      best = params;
      report.best_epoch = epoch;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log_info("epoch " + std::to_string(epoch) + " loss " + std::to_string(rec.train_loss) +
             (rec.dev_f1 ? " dev_f1 " + std::to_string(*rec.dev_f1) : std::string()));
    report.epochs.push_back(rec);
  }

  nlohmann::json meta = job.meta;
  meta["hyper"] = job.hyper.to_json();
  meta["best_epoch"] = report.best_epoch;
  save_model(job.checkpoint, best, meta);
  report.checkpoint = job.checkpoint.string();
  return report;
}

}  // namespace drugprot
