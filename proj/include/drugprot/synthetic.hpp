#pragma once

#include <cstdint>

#include "drugprot/corpus.hpp"

namespace drugprot {

struct SyntheticOptions {
  std::size_t documents = 2000;
  std::uint64_t seed = 20211101;
  std::uint64_t first_pmid = 30000001;
};

/// Generates abstracts whose relations follow fixed lexical templates, one
/// template per relation type (8 types), mixed with distractor sentences that
/// pair a chemical and a gene without a relation. Deterministic in `seed`.
CorpusBundle generate_synthetic_corpus(const SyntheticOptions& opts);

}  // namespace drugprot
