#include "drugprot/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>

#include "text_util.hpp"

namespace drugprot {

namespace {

constexpr std::size_t kMaxWordChars = 100;

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || c == '_' || u >= 0x80;
}

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) != 0;
}

/// Returns the marker starting at `pos`, if any. Bracketed markers match
/// anywhere; bare-word markers only as whole words.
std::optional<std::string_view> marker_at(std::string_view text, std::size_t pos) {
  std::optional<std::string_view> best;
  for (auto m : kMarkerTokens) {
    if (text.compare(pos, m.size(), m) != 0) continue;
    if (m.front() != '<') {
      if (pos > 0 && is_word_char(text[pos - 1])) continue;
      const std::size_t after = pos + m.size();
      if (after < text.size() && is_word_char(text[after])) continue;
    }
    if (!best || m.size() > best->size()) best = m;
  }
  return best;
}

std::string lower_ascii(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens, bool warn_on_append)
    : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "' at line " +
                      std::to_string(i + 1));
    }
  }
  auto ensure = [&](std::string_view tok) {
    auto it = index_.find(std::string(tok));
    if (it != index_.end()) return it->second;
    if (warn_on_append) log_warning("vocabulary lacks '" + std::string(tok) + "'; appended");
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.emplace_back(tok);
    index_.emplace(std::string(tok), id);
    return id;
  };
  for (std::size_t i = 0; i < kSpecialTokens.size(); ++i) special_[i] = ensure(kSpecialTokens[i]);
  for (std::size_t i = 0; i < kMarkerTokens.size(); ++i) markers_[i] = ensure(kMarkerTokens[i]);
}

bool Vocabulary::contains(std::string_view tok) const {
  return index_.find(std::string(tok)) != index_.end();
}

TokenId Vocabulary::find(std::string_view tok) const {
  auto it = index_.find(std::string(tok));
  return it == index_.end() ? -1 : it->second;
}

bool Vocabulary::is_marker(TokenId id) const {
  return std::find(markers_.begin(), markers_.end(), id) != markers_.end();
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty vocabulary token");
    }
    tokens.push_back(std::move(line));
  }
  if (tokens.empty()) throw DataError("empty vocabulary file " + path.string());
  try {
    return Vocabulary(std::move(tokens));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> pre_tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(lowercase ? lower_ascii(std::move(cur)) : std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    if (cur.empty() || !is_word_char(text[i])) {
      if (auto m = marker_at(text, i)) {
        flush();
        words.emplace_back(*m);
        i += m->size();
        continue;
      }
    }
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      flush();
      ++i;
    } else if (is_punct(c)) {
      flush();
      words.emplace_back(1, c);
      ++i;
    } else {
      const std::size_t n = std::min(utf8_len(static_cast<unsigned char>(c)), text.size() - i);
      cur.append(text.substr(i, n));
      i += n;
    }
  }
  flush();
  return words;
}

std::vector<std::string> wordpiece_tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (const auto& word : pre_tokenize(text, vocab.lowercase)) {
    if (std::find(kMarkerTokens.begin(), kMarkerTokens.end(), word) != kMarkerTokens.end()) {
      out.push_back(word);
      continue;
    }
    const auto chars = utf8_chars(word);
    if (chars.size() > kMaxWordChars) {
      out.emplace_back(kSpecialTokens[1]);
      continue;
    }
    // chars are views into `word`; offsets give byte boundaries.
    std::vector<std::size_t> bounds;
    for (auto ch : chars) bounds.push_back(static_cast<std::size_t>(ch.data() - word.data()));
    bounds.push_back(word.size());

    std::vector<std::string> pieces;
    bool bad = false;
    std::size_t s = 0;
    while (s + 1 < bounds.size()) {
      std::string found;
      std::size_t e = bounds.size() - 1;
      for (; e > s; --e) {
        std::string piece = word.substr(bounds[s], bounds[e] - bounds[s]);
        if (s > 0) piece = "##" + piece;
        if (vocab.contains(piece)) {
          found = std::move(piece);
          break;
        }
      }
      if (found.empty()) {
        bad = true;
        break;
      }
      pieces.push_back(std::move(found));
      s = e;
    }
    if (bad) {
      out.emplace_back(kSpecialTokens[1]);
    } else {
      for (auto& p : pieces) out.push_back(std::move(p));
    }
  }
  return out;
}

Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t target_size,
                       bool lowercase) {
  // Word frequencies in first-appearance order.
  std::vector<std::vector<std::string>> words;
  std::vector<std::size_t> freq;
  std::map<std::string, std::size_t> word_index;
  for (const auto& text : corpus) {
    for (auto& w : pre_tokenize(text, lowercase)) {
      if (std::find(kMarkerTokens.begin(), kMarkerTokens.end(), w) != kMarkerTokens.end()) continue;
      auto [it, inserted] = word_index.try_emplace(w, words.size());
      if (inserted) {
        std::vector<std::string> symbols;
        bool first = true;
        for (auto ch : utf8_chars(w)) {
          symbols.push_back(first ? std::string(ch) : "##" + std::string(ch));
          first = false;
        }
        words.push_back(std::move(symbols));
        freq.push_back(0);
      }
      ++freq[it->second];
    }
  }

  std::vector<std::string> tokens(kSpecialTokens.begin(), kSpecialTokens.end());
  tokens.insert(tokens.end(), kMarkerTokens.begin(), kMarkerTokens.end());
  std::map<std::string, bool> present;
  for (const auto& t : tokens) present[t] = true;
  for (const auto& w : words) {
    for (const auto& s : w) {
      if (!present[s]) {
        present[s] = true;
        tokens.push_back(s);
      }
    }
  }
  if (target_size < tokens.size()) {
    throw ConfigError("vocabulary target size " + std::to_string(target_size) +
                      " is below the " + std::to_string(tokens.size()) +
                      " required special, marker and character tokens");
  }

  while (tokens.size() < target_size) {
    struct PairStat {
      std::size_t count = 0;
      std::size_t first_seen = 0;
    };
    std::map<std::pair<std::string, std::string>, PairStat> stats;
    std::size_t order = 0;
    for (std::size_t wi = 0; wi < words.size(); ++wi) {
      const auto& w = words[wi];
      for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        auto [it, inserted] = stats.try_emplace({w[i], w[i + 1]}, PairStat{0, order});
        it->second.count += freq[wi];
        ++order;
      }
    }
    if (stats.empty()) break;
    auto best = stats.begin();
    for (auto it = stats.begin(); it != stats.end(); ++it) {
      if (it->second.count > best->second.count ||
          (it->second.count == best->second.count &&
           it->second.first_seen < best->second.first_seen)) {
        best = it;
      }
    }
    const auto [left, right] = best->first;
    const std::string merged = left + right.substr(2);
    for (auto& w : words) {
      std::vector<std::string> next;
      next.reserve(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (i + 1 < w.size() && w[i] == left && w[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(std::move(w[i]));
        }
      }
      w = std::move(next);
    }
    if (!present[merged]) {
      present[merged] = true;
      tokens.push_back(merged);
    }
  }

  Vocabulary vocab(std::move(tokens), false);
  vocab.lowercase = lowercase;
  return vocab;
}

TokenSequence encode_text(std::string_view tagged_text, SchemeKind scheme, const Vocabulary& vocab,
                          std::size_t max_len) {
  if (max_len < 8) throw ConfigError("max_len must be at least 8");
  std::vector<TokenId> body;
  for (const auto& t : wordpiece_tokenize(tagged_text, vocab)) {
    const TokenId id = vocab.find(t);
    body.push_back(id < 0 ? vocab.unk() : id);
  }

  const std::size_t window = max_len - 2;
  std::size_t begin = 0;
  std::size_t count = body.size();
  if (body.size() > window) {
    std::vector<TokenId> targets;
    if (scheme == SchemeKind::ANONYMIZE) {
      targets = {vocab.marker(0), vocab.marker(1)};
    } else {
      targets = {vocab.marker(4), vocab.marker(5), vocab.marker(6), vocab.marker(7)};
    }
    std::size_t lo = body.size();
    std::size_t hi = 0;
    for (auto target : targets) {
      auto it = std::find(body.begin(), body.end(), target);
      if (it == body.end()) continue;
      const auto pos = static_cast<std::size_t>(it - body.begin());
      lo = std::min(lo, pos);
      hi = std::max(hi, pos);
    }
    if (lo > hi) {
      lo = 0;
      hi = 0;
    }
    if (hi - lo + 1 > window) {
      throw DataError("entity markers span " + std::to_string(hi - lo + 1) +
                      " tokens, more than max_len-2 = " + std::to_string(window));
    }
    const std::size_t mid = (lo + hi) / 2;
    std::size_t b = mid > window / 2 ? mid - window / 2 : 0;
    b = std::min(b, lo);                       // keep the first marker
    if (b + window <= hi) b = hi + 1 - window;  // keep the last marker
    b = std::min(b, body.size() - window);
    begin = b;
    count = window;
  }

  TokenSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(vocab.cls());
  seq.ids.insert(seq.ids.end(), body.begin() + static_cast<std::ptrdiff_t>(begin),
                 body.begin() + static_cast<std::ptrdiff_t>(begin + count));
  seq.ids.push_back(vocab.sep());
  seq.n_real = seq.ids.size();
  seq.attention_mask.assign(seq.n_real, 1);
  seq.ids.resize(max_len, vocab.pad());
  seq.attention_mask.resize(max_len, 0);
  return seq;
}

TokenSequence encode_instance(const SentenceInstance& inst, const Vocabulary& vocab,
                              std::size_t max_len) {
  try {
    return encode_text(inst.tagged_text, inst.scheme, vocab, max_len);
  } catch (const DataError& e) {
    throw DataError("instance " + inst.pmid + ":" + inst.chem.eid + "/" + inst.gene.eid + ": " +
                    e.what());
  }
}

}  // namespace drugprot
