#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace drugprot {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return out;
}

/// Length in bytes of the UTF-8 sequence starting with `lead`; invalid lead
/// bytes count as a single byte.
inline std::size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

/// Splits text into code points (each returned as its byte string).
inline std::vector<std::string_view> utf8_chars(std::string_view s) {
  std::vector<std::string_view> out;
  for (std::size_t i = 0; i < s.size();) {
    const std::size_t n = std::min(utf8_len(static_cast<unsigned char>(s[i])), s.size() - i);
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

/// Maps between code-point offsets (file format) and byte offsets (in memory).
class Utf8Index {
 public:
  explicit Utf8Index(std::string_view text) {
    for (std::size_t i = 0; i < text.size();) {
      starts_.push_back(i);
      i += std::min(utf8_len(static_cast<unsigned char>(text[i])), text.size() - i);
    }
    starts_.push_back(text.size());
  }

  std::size_t char_count() const { return starts_.size() - 1; }
  std::size_t byte_offset(std::size_t char_offset) const { return starts_.at(char_offset); }
  std::size_t char_offset(std::size_t byte_offset) const {
    auto it = std::lower_bound(starts_.begin(), starts_.end(), byte_offset);
    return static_cast<std::size_t>(it - starts_.begin());
  }

 private:
  std::vector<std::size_t> starts_;
};

}  // namespace drugprot
