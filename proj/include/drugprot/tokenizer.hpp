#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "drugprot/corpus.hpp"

namespace drugprot {

inline constexpr std::array<std::string_view, 4> kSpecialTokens = {"[PAD]", "[UNK]", "[CLS]",
                                                                   "[SEP]"};
inline constexpr std::array<std::string_view, 8> kMarkerTokens = {
    "DRUG", "PROTEIN", "DRUG_O", "PROTEIN_O", "<DRUG-B>", "<DRUG-E>", "<PROTEIN-B>", "<PROTEIN-E>"};

using TokenId = std::int32_t;

/// WordPiece vocabulary. Token ids equal line indices of the vocab file.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Builds from an ordered token list; missing special/marker tokens are
  /// appended (with a warning when `warn_on_append`).
  explicit Vocabulary(std::vector<std::string> tokens, bool warn_on_append = true);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(std::string_view tok) const;
  /// Id of `tok`, or -1.
  TokenId find(std::string_view tok) const;

  TokenId pad() const { return special_[0]; }
  TokenId unk() const { return special_[1]; }
  TokenId cls() const { return special_[2]; }
  TokenId sep() const { return special_[3]; }
  TokenId marker(std::size_t i) const { return markers_.at(i); }
  bool is_marker(TokenId id) const;

  bool lowercase = true;

  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::array<TokenId, kSpecialTokens.size()> special_{};
  std::array<TokenId, kMarkerTokens.size()> markers_{};
};

Vocabulary load_vocab(const std::filesystem::path& path);

/// Simplified merge-frequency subword training: every seen character (in
/// word-initial and "##" continuation form), then the most frequent adjacent
/// symbol pair is merged repeatedly until `target_size` tokens exist. Ties
/// go to the pair seen first in corpus order.
Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t target_size,
                       bool lowercase = true);

/// Whitespace/punctuation pre-split with entity markers kept atomic.
std::vector<std::string> pre_tokenize(std::string_view text, bool lowercase);

std::vector<std::string> wordpiece_tokenize(std::string_view text, const Vocabulary& vocab);

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> attention_mask;
  std::size_t n_real = 0;
};

inline constexpr std::size_t kDefaultMaxLen = 128;

/// [CLS] tokens [SEP] padded to max_len. Over-long inputs keep a window
/// centred between the target entity markers.
TokenSequence encode_text(std::string_view tagged_text, SchemeKind scheme, const Vocabulary& vocab,
                          std::size_t max_len);

TokenSequence encode_instance(const SentenceInstance& inst, const Vocabulary& vocab,
                              std::size_t max_len = kDefaultMaxLen);

}  // namespace drugprot
