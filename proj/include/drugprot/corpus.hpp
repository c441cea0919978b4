#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drugprot/common.hpp"

namespace drugprot {

struct Document {
  std::string pmid;
  std::string title;
  std::string abstract;
  /// title + '\t' + abstract; all entity offsets index into this string.
  std::string full_text;
};

enum class EntityType { CHEMICAL, GENE };

struct EntityMention {
  std::string pmid;
  std::string eid;
  EntityType etype = EntityType::CHEMICAL;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;

  bool overlaps(const EntityMention& o) const { return start < o.end && o.start < end; }
};

struct RelationGold {
  std::string pmid;
  RelationType rtype = RelationType::NONE;
  std::string arg1;  // CHEMICAL eid
  std::string arg2;  // GENE eid
};

struct Sentence {
  std::string pmid;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;
};

enum class SchemeKind { ANONYMIZE, MARKERS };

std::string_view scheme_name(SchemeKind s);
SchemeKind parse_scheme(std::string_view name);

struct SentenceInstance {
  std::string pmid;
  std::size_t sentence_idx = 0;
  EntityMention chem;
  EntityMention gene;
  RelationType label = RelationType::NONE;
  std::string tagged_text;
  SchemeKind scheme = SchemeKind::ANONYMIZE;
};

/// A parsed corpus. Documents are kept sorted by pmid; mentions are grouped
/// per document and sorted by start offset.
class CorpusBundle {
 public:
  std::vector<Document> documents;
  std::map<std::string, std::vector<EntityMention>> mentions;
  std::vector<RelationGold> relations;

  const Document* find_document(const std::string& pmid) const;
  const EntityMention* find_mention(const std::string& pmid, const std::string& eid) const;

  /// Checks all cross-record invariants; throws DataError on the first violation.
  void validate() const;

  /// Restricts the bundle to the given documents.
  CorpusBundle subset(std::span<const std::string> pmids) const;
};

CorpusBundle load_corpus(const std::filesystem::path& abstracts_path,
                         const std::filesystem::path& entities_path,
                         const std::optional<std::filesystem::path>& relations_path);

/// Writes the three TSV files in the load_corpus format.
void write_corpus(const CorpusBundle& bundle, const std::filesystem::path& abstracts_path,
                  const std::filesystem::path& entities_path,
                  const std::filesystem::path& relations_path);

/// Rule-based splitter: a boundary follows '.', '!' or '?' when the next
/// non-space character is uppercase or a digit, unless the preceding word is
/// a known abbreviation or the terminal sits inside parentheses/brackets.
/// The title/abstract separator is always a boundary.
std::vector<Sentence> split_sentences(const Document& doc);

/// As above, then merges sentences so that no mention is bisected.
std::vector<Sentence> split_sentences(const Document& doc,
                                      std::span<const EntityMention> mentions);

std::string tag_scheme1(const Sentence& sentence, const EntityMention& chem,
                        const EntityMention& gene, std::span<const EntityMention> others);

std::string tag_scheme2(const Sentence& sentence, const EntityMention& chem,
                        const EntityMention& gene);

struct InstanceStats {
  std::size_t cross_sentence_dropped = 0;
  std::size_t overlapping_pairs_skipped = 0;
  std::size_t multi_label_pairs = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// One instance per co-sentential (chemical, gene) pair, ordered by
/// (pmid, sentence_idx, chem.eid, gene.eid). Pairs carrying several gold
/// labels produce one instance per label.
std::vector<SentenceInstance> generate_instances(const CorpusBundle& bundle, SchemeKind scheme,
                                                 InstanceStats* stats = nullptr);

}  // namespace drugprot
