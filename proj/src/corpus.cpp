#include "drugprot/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "text_util.hpp"

namespace drugprot {

namespace {

struct LineReader {
  std::ifstream in;
  std::filesystem::path path;
  std::size_t line_no = 0;

  explicit LineReader(const std::filesystem::path& p) : in(p), path(p) {
    if (!in) throw MissingArtifact("cannot open " + p.string());
  }

  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  }
};

std::size_t parse_offset(const LineReader& r, std::string_view field) {
  std::size_t value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) r.fail("bad offset '" + std::string(field) + "'");
  return value;
}

std::string_view strip_arg_prefix(const LineReader& r, std::string_view field,
                                  std::string_view prefix) {
  if (field.substr(0, prefix.size()) != prefix || field.size() == prefix.size()) {
    r.fail("expected '" + std::string(prefix) + "<eid>', got '" + std::string(field) + "'");
  }
  return field.substr(prefix.size());
}

const std::unordered_set<std::string_view>& abbreviations() {
  // Lowercased words that end in a period without ending a sentence.
  static const std::unordered_set<std::string_view> kAbbrev = {
      "approx.", "e.g.", "i.e.", "fig.", "figs.", "al.",  "vs.",  "cf.",  "ca.",
      "dr.",     "mr.",  "ms.",  "no.",  "nos.",  "ref.", "refs.", "resp.", "sp.",
      "spp.",    "eq.",  "viz.", "inc.", "ltd.",  "co.",  "st.",  "vol.", "min.",
  };
  return kAbbrev;
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool starts_sentence(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isupper(u) != 0 || std::isdigit(u) != 0;
}

bool preceded_by_abbreviation(std::string_view text, std::size_t period_pos, std::size_t seg_start) {
  std::size_t b = period_pos;
  while (b > seg_start && !is_space(text[b - 1])) --b;
  std::string word(text.substr(b, period_pos - b + 1));
  // Leading punctuation such as '(' or '"' does not belong to the word.
  while (!word.empty() && !std::isalnum(static_cast<unsigned char>(word.front()))) word.erase(0, 1);
  for (auto& ch : word) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return abbreviations().contains(word);
}

void split_segment(const Document& doc, std::size_t seg_start, std::size_t seg_end,
                   std::vector<Sentence>& out) {
  const std::string_view text = doc.full_text;
  auto emit = [&](std::size_t a, std::size_t b) {
    while (a < b && is_space(text[a])) ++a;
    while (b > a && is_space(text[b - 1])) --b;
    if (a < b) out.push_back({doc.pmid, a, b, std::string(text.substr(a, b - a))});
  };

  std::size_t sent_start = seg_start;
  int depth = 0;
  for (std::size_t i = seg_start; i < seg_end; ++i) {
    const char c = text[i];
    if (c == '(' || c == '[') {
      ++depth;
    } else if (c == ')' || c == ']') {
      depth = std::max(0, depth - 1);
    }
    if (!is_terminal(c) || depth > 0) continue;
    std::size_t j = i + 1;
    if (j >= seg_end || !is_space(text[j])) continue;
    while (j < seg_end && is_space(text[j])) ++j;
    if (j >= seg_end || !starts_sentence(text[j])) continue;
    if (c == '.' && preceded_by_abbreviation(text, i, seg_start)) continue;
    emit(sent_start, i + 1);
    sent_start = j;
    i = j - 1;
  }
  emit(sent_start, seg_end);
}

struct Replacement {
  std::size_t start;
  std::size_t end;
  std::string_view token;
};

void check_within(const Sentence& s, const EntityMention& m) {
  if (m.start < s.start || m.end > s.end) {
    throw DataError("mention " + m.pmid + ":" + m.eid + " lies outside sentence [" +
                    std::to_string(s.start) + "," + std::to_string(s.end) + ")");
  }
}

bool eid_less(const EntityMention* a, const EntityMention* b) {
  return natural_less(a->eid, b->eid);
}

}  // namespace

std::string_view scheme_name(SchemeKind s) {
  return s == SchemeKind::ANONYMIZE ? "ANONYMIZE" : "MARKERS";
}

SchemeKind parse_scheme(std::string_view name) {
  if (name == "ANONYMIZE" || name == "1") return SchemeKind::ANONYMIZE;
  if (name == "MARKERS" || name == "2") return SchemeKind::MARKERS;
  throw ConfigError("unknown tagging scheme '" + std::string(name) + "'");
}

const Document* CorpusBundle::find_document(const std::string& pmid) const {
  auto it = std::lower_bound(documents.begin(), documents.end(), pmid,
                             [](const Document& d, const std::string& p) {
                               return natural_less(d.pmid, p);
                             });
  if (it != documents.end() && it->pmid == pmid) return &*it;
  return nullptr;
}

const EntityMention* CorpusBundle::find_mention(const std::string& pmid,
                                                const std::string& eid) const {
  auto it = mentions.find(pmid);
  if (it == mentions.end()) return nullptr;
  for (const auto& m : it->second) {
    if (m.eid == eid) return &m;
  }
  return nullptr;
}

void CorpusBundle::validate() const {
  std::set<std::string> seen;
  for (const auto& d : documents) {
    if (d.pmid.empty()) throw DataError("document with empty pmid");
    if (!seen.insert(d.pmid).second) throw DataError("duplicate pmid " + d.pmid);
    if (d.full_text.size() != d.title.size() + 1 + d.abstract.size()) {
      throw DataError("document " + d.pmid + ": full_text is not title + separator + abstract");
    }
  }
  for (const auto& [pmid, ms] : mentions) {
    const Document* doc = find_document(pmid);
    if (doc == nullptr) throw DataError("mentions for unknown document " + pmid);
    for (const auto& m : ms) {
      if (!(m.start < m.end && m.end <= doc->full_text.size())) {
        throw DataError("mention " + pmid + ":" + m.eid + " has an invalid span");
      }
      if (doc->full_text.compare(m.start, m.end - m.start, m.surface) != 0) {
        throw DataError("mention " + pmid + ":" + m.eid + " span/text mismatch");
      }
    }
  }
  for (const auto& r : relations) {
    if (r.rtype == RelationType::NONE) throw DataError("gold relation with NONE type in " + r.pmid);
    const auto* a1 = find_mention(r.pmid, r.arg1);
    const auto* a2 = find_mention(r.pmid, r.arg2);
    if (a1 == nullptr || a2 == nullptr) {
      throw DataError("dangling relation argument in " + r.pmid + ": " + r.arg1 + "/" + r.arg2);
    }
    if (a1->etype != EntityType::CHEMICAL || a2->etype != EntityType::GENE) {
      throw DataError("relation in " + r.pmid + " must link CHEMICAL -> GENE: " + r.arg1 + "/" +
                      r.arg2);
    }
  }
}

CorpusBundle CorpusBundle::subset(std::span<const std::string> pmids) const {
  std::set<std::string> keep(pmids.begin(), pmids.end());
  CorpusBundle out;
  for (const auto& d : documents) {
    if (keep.contains(d.pmid)) out.documents.push_back(d);
  }
  for (const auto& [pmid, ms] : mentions) {
    if (keep.contains(pmid)) out.mentions.emplace(pmid, ms);
  }
  for (const auto& r : relations) {
    if (keep.contains(r.pmid)) out.relations.push_back(r);
  }
  return out;
}

CorpusBundle load_corpus(const std::filesystem::path& abstracts_path,
                         const std::filesystem::path& entities_path,
                         const std::optional<std::filesystem::path>& relations_path) {
  CorpusBundle bundle;
  std::string line;

  {
    LineReader r(abstracts_path);
    std::set<std::string> seen;
    while (r.next(line)) {
      auto f = split_tabs(line);
      if (f.size() != 3) r.fail("expected 3 tab-separated fields, got " + std::to_string(f.size()));
      if (f[0].empty()) r.fail("empty pmid");
      Document d;
      d.pmid = std::string(f[0]);
      d.title = std::string(f[1]);
      d.abstract = std::string(f[2]);
      d.full_text = d.title + '\t' + d.abstract;
      if (!seen.insert(d.pmid).second) r.fail("duplicate pmid " + d.pmid);
      bundle.documents.push_back(std::move(d));
    }
    std::sort(bundle.documents.begin(), bundle.documents.end(),
              [](const Document& a, const Document& b) { return natural_less(a.pmid, b.pmid); });
  }

  {
    LineReader r(entities_path);
    std::map<std::string, Utf8Index> indices;
    while (r.next(line)) {
      auto f = split_tabs(line);
      if (f.size() != 6) r.fail("expected 6 tab-separated fields, got " + std::to_string(f.size()));
      EntityMention m;
      m.pmid = std::string(f[0]);
      m.eid = std::string(f[1]);
      if (f[2] == "CHEMICAL") {
        m.etype = EntityType::CHEMICAL;
      } else if (f[2] == "GENE" || f[2] == "GENE-Y" || f[2] == "GENE-N") {
        m.etype = EntityType::GENE;
      } else {
        r.fail("unknown entity type '" + std::string(f[2]) + "'");
      }
      const Document* doc = bundle.find_document(m.pmid);
      if (doc == nullptr) r.fail("entity for unknown document " + m.pmid);
      auto [it, inserted] = indices.try_emplace(m.pmid, doc->full_text);
      const Utf8Index& idx = it->second;
      const std::size_t cstart = parse_offset(r, f[3]);
      const std::size_t cend = parse_offset(r, f[4]);
      if (!(cstart < cend && cend <= idx.char_count())) {
        r.fail("span [" + std::to_string(cstart) + "," + std::to_string(cend) +
               ") outside document " + m.pmid);
      }
      m.start = idx.byte_offset(cstart);
      m.end = idx.byte_offset(cend);
      m.surface = std::string(f[5]);
      if (doc->full_text.compare(m.start, m.end - m.start, m.surface) != 0) {
        r.fail("span/text mismatch for " + m.eid + ": text has '" +
               doc->full_text.substr(m.start, m.end - m.start) + "', row has '" + m.surface + "'");
      }
      auto& list = bundle.mentions[m.pmid];
      for (const auto& other : list) {
        if (other.eid == m.eid) r.fail("duplicate entity id " + m.eid + " in " + m.pmid);
      }
      list.push_back(std::move(m));
    }
    for (auto& [pmid, list] : bundle.mentions) {
      std::stable_sort(list.begin(), list.end(), [](const EntityMention& a, const EntityMention& b) {
        return std::tie(a.start, a.end) < std::tie(b.start, b.end);
      });
    }
  }

  if (relations_path) {
    LineReader r(*relations_path);
    while (r.next(line)) {
      auto f = split_tabs(line);
      if (f.size() != 4) r.fail("expected 4 tab-separated fields, got " + std::to_string(f.size()));
      RelationGold g;
      g.pmid = std::string(f[0]);
      auto rtype = parse_relation(f[1]);
      if (!rtype || *rtype == RelationType::NONE) {
        r.fail("unknown relation type '" + std::string(f[1]) + "'");
      }
      g.rtype = *rtype;
      g.arg1 = std::string(strip_arg_prefix(r, f[2], "Arg1:"));
      g.arg2 = std::string(strip_arg_prefix(r, f[3], "Arg2:"));
      const auto* a1 = bundle.find_mention(g.pmid, g.arg1);
      const auto* a2 = bundle.find_mention(g.pmid, g.arg2);
      if (a1 == nullptr || a2 == nullptr) {
        r.fail("dangling relation argument " + g.arg1 + "/" + g.arg2 + " in " + g.pmid);
      }
      if (a1->etype != EntityType::CHEMICAL || a2->etype != EntityType::GENE) {
        r.fail("relation must link a CHEMICAL (Arg1) to a GENE (Arg2)");
      }
      bundle.relations.push_back(std::move(g));
    }
  }
  return bundle;
}

void write_corpus(const CorpusBundle& bundle, const std::filesystem::path& abstracts_path,
                  const std::filesystem::path& entities_path,
                  const std::filesystem::path& relations_path) {
  std::ofstream abs(abstracts_path, std::ios::binary);
  std::ofstream ent(entities_path, std::ios::binary);
  std::ofstream rel(relations_path, std::ios::binary);
  if (!abs || !ent || !rel) throw DataError("cannot write corpus files");
  for (const auto& d : bundle.documents) {
    abs << d.pmid << '\t' << d.title << '\t' << d.abstract << '\n';
    auto it = bundle.mentions.find(d.pmid);
    if (it == bundle.mentions.end()) continue;
    const Utf8Index idx(d.full_text);
    for (const auto& m : it->second) {
      ent << m.pmid << '\t' << m.eid << '\t'
          << (m.etype == EntityType::CHEMICAL ? "CHEMICAL" : "GENE") << '\t'
          << idx.char_offset(m.start) << '\t' << idx.char_offset(m.end) << '\t' << m.surface
          << '\n';
    }
  }
  for (const auto& r : bundle.relations) {
    rel << r.pmid << '\t' << relation_name(r.rtype) << "\tArg1:" << r.arg1 << "\tArg2:" << r.arg2
        << '\n';
  }
}

std::vector<Sentence> split_sentences(const Document& doc) {
  std::vector<Sentence> out;
  const std::size_t title_end = doc.title.size();
  split_segment(doc, 0, title_end, out);
  split_segment(doc, std::min(title_end + 1, doc.full_text.size()), doc.full_text.size(), out);
  return out;
}

std::vector<Sentence> split_sentences(const Document& doc,
                                      std::span<const EntityMention> mentions) {
  auto sentences = split_sentences(doc);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& m : mentions) {
      std::size_t first = sentences.size();
      std::size_t last = 0;
      for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (sentences[i].start < m.end && m.start < sentences[i].end) {
          first = std::min(first, i);
          last = std::max(last, i);
        }
      }
      const bool partial =
          first < sentences.size() && first == last &&
          (m.start < sentences[first].start || m.end > sentences[first].end);
      if (first < sentences.size() && (first != last || partial)) {
        Sentence merged;
        merged.pmid = doc.pmid;
        merged.start = std::min(sentences[first].start, m.start);
        merged.end = std::max(sentences[last].end, m.end);
        merged.text = doc.full_text.substr(merged.start, merged.end - merged.start);
        sentences.erase(sentences.begin() + static_cast<std::ptrdiff_t>(first),
                        sentences.begin() + static_cast<std::ptrdiff_t>(last) + 1);
        sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(first), std::move(merged));
        changed = true;
        break;
      }
    }
  }
  return sentences;
}

std::string tag_scheme1(const Sentence& sentence, const EntityMention& chem,
                        const EntityMention& gene, std::span<const EntityMention> others) {
  check_within(sentence, chem);
  check_within(sentence, gene);
  if (chem.overlaps(gene)) {
    throw DataError("target spans overlap: " + chem.pmid + ":" + chem.eid + "/" + gene.eid);
  }

  std::vector<Replacement> reps = {{chem.start, chem.end, "DRUG"}, {gene.start, gene.end, "PROTEIN"}};

  // Longer mentions first among equal starts; a non-target mention that
  // overlaps a target or an already accepted mention stays as text.
  std::vector<const EntityMention*> cand;
  for (const auto& o : others) {
    if (o.pmid == chem.pmid && (o.eid == chem.eid || o.eid == gene.eid)) continue;
    if (o.start < sentence.start || o.end > sentence.end) continue;
    cand.push_back(&o);
  }
  std::sort(cand.begin(), cand.end(), [](const EntityMention* a, const EntityMention* b) {
    if (a->start != b->start) return a->start < b->start;
    if (a->end != b->end) return a->end > b->end;
    return natural_less(a->eid, b->eid);
  });
  for (const auto* o : cand) {
    const bool clash = std::any_of(reps.begin(), reps.end(), [&](const Replacement& r) {
      return o->start < r.end && r.start < o->end;
    });
    if (clash) continue;
    reps.push_back({o->start, o->end, o->etype == EntityType::CHEMICAL ? "DRUG_O" : "PROTEIN_O"});
  }

  std::sort(reps.begin(), reps.end(),
            [](const Replacement& a, const Replacement& b) { return a.start > b.start; });
  std::string out = sentence.text;
  for (const auto& r : reps) {
    out.replace(r.start - sentence.start, r.end - r.start, r.token);
  }
  return out;
}

std::string tag_scheme2(const Sentence& sentence, const EntityMention& chem,
                        const EntityMention& gene) {
  check_within(sentence, chem);
  check_within(sentence, gene);
  if (chem.overlaps(gene)) {
    throw DataError("target spans overlap: " + chem.pmid + ":" + chem.eid + "/" + gene.eid);
  }
  struct Insert {
    std::size_t pos;
    std::string_view text;
  };
  // At equal positions an end marker precedes the next begin marker.
  std::array<Insert, 4> ins = {{{chem.start, "<DRUG-B> "},
                                {chem.end, " <DRUG-E>"},
                                {gene.start, "<PROTEIN-B> "},
                                {gene.end, " <PROTEIN-E>"}}};
  std::stable_sort(ins.begin(), ins.end(), [](const Insert& a, const Insert& b) {
    if (a.pos != b.pos) return a.pos > b.pos;
    return a.text.front() != ' ' && b.text.front() == ' ';
  });
  std::string out = sentence.text;
  for (const auto& i : ins) out.insert(i.pos - sentence.start, i.text);
  return out;
}

std::vector<SentenceInstance> generate_instances(const CorpusBundle& bundle, SchemeKind scheme,
                                                 InstanceStats* stats) {
  InstanceStats local;
  InstanceStats& st = stats != nullptr ? *stats : local;
  st = InstanceStats{};

  using PairKey = std::tuple<std::string, std::string, std::string>;
  std::map<PairKey, std::set<RelationType>> gold;
  for (const auto& r : bundle.relations) gold[{r.pmid, r.arg1, r.arg2}].insert(r.rtype);

  std::vector<SentenceInstance> out;
  static const std::vector<EntityMention> kNoMentions;

  for (const auto& doc : bundle.documents) {
    auto mit = bundle.mentions.find(doc.pmid);
    const auto& ms = mit != bundle.mentions.end() ? mit->second : kNoMentions;
    const auto sentences = split_sentences(doc, ms);

    std::map<std::string, std::size_t> sentence_of;
    std::vector<std::vector<const EntityMention*>> in_sentence(sentences.size());
    for (const auto& m : ms) {
      for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (m.start >= sentences[i].start && m.end <= sentences[i].end) {
          sentence_of[m.eid] = i;
          in_sentence[i].push_back(&m);
          break;
        }
      }
    }

    for (const auto& [key, labels] : gold) {
      if (std::get<0>(key) != doc.pmid) continue;
      auto a = sentence_of.find(std::get<1>(key));
      auto b = sentence_of.find(std::get<2>(key));
      if (a == sentence_of.end() || b == sentence_of.end() || a->second != b->second) {
        st.cross_sentence_dropped += labels.size();
      }
    }

    for (std::size_t si = 0; si < sentences.size(); ++si) {
      std::vector<const EntityMention*> chems, genes;
      std::vector<EntityMention> local_mentions;
      for (const auto* m : in_sentence[si]) {
        (m->etype == EntityType::CHEMICAL ? chems : genes).push_back(m);
        local_mentions.push_back(*m);
      }
      std::sort(chems.begin(), chems.end(), eid_less);
      std::sort(genes.begin(), genes.end(), eid_less);

      for (const auto* c : chems) {
        for (const auto* g : genes) {
          auto git = gold.find({doc.pmid, c->eid, g->eid});
          if (c->overlaps(*g)) {
            ++st.overlapping_pairs_skipped;
            log_warning("skipping overlapping pair " + doc.pmid + ":" + c->eid + "/" + g->eid);
            continue;
          }
          std::vector<RelationType> labels;
          if (git != gold.end()) {
            labels.assign(git->second.begin(), git->second.end());
            if (labels.size() > 1) ++st.multi_label_pairs;
          } else {
            labels.push_back(RelationType::NONE);
          }
          const std::string tagged = scheme == SchemeKind::ANONYMIZE
                                         ? tag_scheme1(sentences[si], *c, *g, local_mentions)
                                         : tag_scheme2(sentences[si], *c, *g);
          for (auto label : labels) {
            SentenceInstance inst;
            inst.pmid = doc.pmid;
            inst.sentence_idx = si;
            inst.chem = *c;
            inst.gene = *g;
            inst.label = label;
            inst.tagged_text = tagged;
            inst.scheme = scheme;
            (label == RelationType::NONE ? st.negatives : st.positives) += 1;
            out.push_back(std::move(inst));
          }
        }
      }
    }
  }
  if (st.cross_sentence_dropped > 0) {
    log_warning("dropped " + std::to_string(st.cross_sentence_dropped) +
                " cross-sentence gold relation(s)");
  }
  if (st.multi_label_pairs > 0) {
    log_warning(std::to_string(st.multi_label_pairs) +
                " pair(s) carry several gold labels; one instance emitted per label");
  }
  return out;
}

}  // namespace drugprot
