#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "drugprot/corpus.hpp"

namespace testing {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("drugprot_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline drugprot::CorpusBundle one_doc(const std::string& pmid, const std::string& title,
                                      const std::string& abstract) {
  drugprot::CorpusBundle b;
  drugprot::Document d{pmid, title, abstract, title + '\t' + abstract};
  b.documents.push_back(d);
  return b;
}

// Adds the nth occurrence of `surface` in the document as a mention.
inline drugprot::EntityMention add_mention(drugprot::CorpusBundle& b, const std::string& pmid,
                                           const std::string& eid, drugprot::EntityType type,
                                           const std::string& surface, int nth = 0) {
  const auto* doc = b.find_document(pmid);
  if (doc == nullptr) throw std::logic_error("no document " + pmid);
  std::size_t pos = doc->full_text.find(surface);
  for (int i = 0; i < nth && pos != std::string::npos; ++i) {
    pos = doc->full_text.find(surface, pos + 1);
  }
  if (pos == std::string::npos) throw std::logic_error("surface not found: " + surface);
  drugprot::EntityMention m{pmid, eid, type, pos, pos + surface.size(), surface};
  auto& list = b.mentions[pmid];
  list.push_back(m);
  std::sort(list.begin(), list.end(),
            [](const auto& x, const auto& y) { return x.start < y.start; });
  return m;
}

inline drugprot::Sentence whole_text_sentence(const drugprot::CorpusBundle& b,
                                              const std::string& pmid) {
  const auto* doc = b.find_document(pmid);
  return {pmid, 0, doc->full_text.size(), doc->full_text};
}

}  // namespace testing
