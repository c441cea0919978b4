#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "drugprot/model.hpp"

namespace testing {

struct GradCheck {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// |a - b| / max(|a|, |b|, floor); the floor keeps entries whose true
// gradient is zero from dividing rounding noise by nothing.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central differences on every entry of every tensor.
inline GradCheck check_gradients(const drugprot::ModelParameters& params,
                                 std::span<const drugprot::LabeledSequence> batch,
                                 const drugprot::ClassWeights& w, double h = 1e-5) {
  using namespace drugprot;
  const auto analytic = backward_gradients(params, batch, w);
  ModelParameters probe = params;
  auto slots = probe.tensors();
  const auto grads = analytic.grads.tensors();
  GradCheck out;
  for (std::size_t t = 0; t < slots.size(); ++t) {
    Matrix& m = *slots[t].second;
    const Matrix& g = *grads[t].second;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + h;
      const double up = batch_loss(probe, batch, w);
      m.data()[i] = orig - h;
      const double down = batch_loss(probe, batch, w);
      m.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = rel_error(g.data()[i], numeric);
      ++out.checked;
      if (err > out.max_rel) {
        out.max_rel = err;
        out.worst = slots[t].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

// Tiny random problem: config d=8, heads=2, layers=1, max_len=16, V=20.
struct TinyProblem {
  drugprot::ModelParameters params;
  std::vector<drugprot::TokenSequence> seqs;
  std::vector<drugprot::LabeledSequence> batch;
  drugprot::ClassWeights weights;
};

inline drugprot::EncoderConfig tiny_config(drugprot::HeadKind head, std::uint64_t seed) {
  drugprot::EncoderConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.hidden = 8;
  cfg.ffn = 16;
  cfg.max_len = 16;
  cfg.vocab_size = 20;
  cfg.head_kind = head;
  cfg.seed = seed;
  return cfg;
}

inline drugprot::TokenSequence random_sequence(drugprot::Rng& rng, std::size_t max_len,
                                               int vocab, std::size_t n_real) {
  drugprot::TokenSequence s;
  s.ids.assign(max_len, 0);
  s.attention_mask.assign(max_len, 0);
  s.n_real = n_real;
  s.ids[0] = 2;
  for (std::size_t i = 1; i < n_real; ++i) s.ids[i] = 4 + static_cast<int>(rng.below(vocab - 4));
  for (std::size_t i = 0; i < n_real; ++i) s.attention_mask[i] = 1;
  return s;
}

inline TinyProblem tiny_problem(drugprot::HeadKind head, std::uint64_t seed,
                                std::size_t n_seqs = 4) {
  using namespace drugprot;
  TinyProblem p;
  p.params = init_params(tiny_config(head, seed));
  Rng rng(derive_seed(seed, 77));
  // Spread the layer-norm gains and biases so no gradient is trivially symmetric.
  for (auto& [name, t] : p.params.tensors()) {
    if (name.find("ln") != std::string::npos || name.find(".b") != std::string::npos) {
      for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] += rng.uniform(-0.3, 0.3);
    }
  }
  for (std::size_t i = 0; i < n_seqs; ++i) {
    p.seqs.push_back(random_sequence(rng, 16, 20, 3 + rng.below(14)));
  }
  for (std::size_t i = 0; i < n_seqs; ++i) {
    p.batch.push_back({&p.seqs[i], relation_from_index(static_cast<int>(rng.below(kNumClasses)))});
  }
  double sum = 0.0;
  for (auto& x : p.weights.w) sum += (x = rng.uniform(0.5, 2.0));
  for (auto& x : p.weights.w) x *= kNumClasses / sum;
  return p;
}

}  // namespace testing
