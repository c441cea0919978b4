#include <doctest.h>

#include <algorithm>
#include <cctype>

#include "drugprot/corpus.hpp"
#include "drugprot/synthetic.hpp"
#include "support.hpp"

using namespace drugprot;
using testing::add_mention;
using testing::one_doc;
using testing::TempDir;
using testing::write_file;

namespace {

const std::string kTable2 = "human type 12 RDH reduces dihydrotestosterone to androstanediol";

EntityMention span_of(const std::string& text, const std::string& eid, EntityType type,
                      const std::string& surface) {
  const auto pos = text.find(surface);
  REQUIRE(pos != std::string::npos);
  return {"1", eid, type, pos, pos + surface.size(), surface};
}

Sentence sentence_of(const std::string& text) { return {"1", 0, text.size(), text}; }

std::string without_space(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  return s;
}

std::string strip_markers(std::string s) {
  for (const char* m : {"<DRUG-B>", "<DRUG-E>", "<PROTEIN-B>", "<PROTEIN-E>"}) {
    for (auto pos = s.find(m); pos != std::string::npos; pos = s.find(m)) {
      s.erase(pos, std::string(m).size());
    }
  }
  return without_space(s);
}

}  // namespace

TEST_CASE("abstracts row becomes a document with tab-joined text") {
  TempDir dir;
  write_file(dir / "a.tsv", "10064839\tTitle X\tBody Y\n");
  write_file(dir / "e.tsv", "");
  const auto b = load_corpus(dir / "a.tsv", dir / "e.tsv", std::nullopt);
  REQUIRE(b.documents.size() == 1);
  CHECK(b.documents[0].pmid == "10064839");
  CHECK(b.documents[0].full_text == "Title X\tBody Y");
}

TEST_CASE("entity whose surface disagrees with the text is rejected") {
  TempDir dir;
  write_file(dir / "a.tsv", "1\tAspirin blocks COX1\tBody.\n");
  write_file(dir / "e.tsv", "1\tT1\tCHEMICAL\t0\t7\tAspirine\n");
  CHECK_THROWS_AS(load_corpus(dir / "a.tsv", dir / "e.tsv", std::nullopt), DataError);
}

TEST_CASE("gene subtypes collapse, offsets count code points, CR is stripped") {
  TempDir dir;
  write_file(dir / "a.tsv", "7\tβ-blocker on ADRB1\tAlso ADRB2.\r\n");
  write_file(dir / "e.tsv",
             "7\tT1\tCHEMICAL\t0\t9\tβ-blocker\r\n7\tT2\tGENE-Y\t13\t18\tADRB1\n"
             "7\tT3\tGENE-N\t24\t29\tADRB2\n");
  write_file(dir / "r.tsv", "7\tINHIBITOR\tArg1:T1\tArg2:T2\n");
  const auto b = load_corpus(dir / "a.tsv", dir / "e.tsv", dir / "r.tsv");
  const auto& ms = b.mentions.at("7");
  REQUIRE(ms.size() == 3);
  CHECK(ms[0].surface == "β-blocker");
  CHECK(ms[0].end - ms[0].start == std::string("β-blocker").size());
  CHECK(ms[1].etype == EntityType::GENE);
  CHECK(ms[2].etype == EntityType::GENE);
  CHECK(b.documents[0].full_text.substr(ms[2].start, ms[2].end - ms[2].start) == "ADRB2");
  REQUIRE(b.relations.size() == 1);
  CHECK(b.relations[0].rtype == RelationType::INHIBITOR);
}

TEST_CASE("relation naming an unknown entity is a data error") {
  TempDir dir;
  write_file(dir / "a.tsv", "1\tT\tA.\n");
  write_file(dir / "e.tsv", "");
  write_file(dir / "r.tsv", "1\tINHIBITOR\tArg1:T1\tArg2:T2\n");
  CHECK_THROWS_AS(load_corpus(dir / "a.tsv", dir / "e.tsv", dir / "r.tsv"), DataError);
}

TEST_CASE("missing corpus file is a missing artifact") {
  TempDir dir;
  CHECK_THROWS_AS(load_corpus(dir / "nope.tsv", dir / "e.tsv", std::nullopt), MissingArtifact);
}

TEST_CASE("corpus survives a write/load round trip") {
  TempDir dir;
  SyntheticOptions opts;
  opts.documents = 40;
  const auto b = generate_synthetic_corpus(opts);
  write_corpus(b, dir / "a.tsv", dir / "e.tsv", dir / "r.tsv");
  const auto c = load_corpus(dir / "a.tsv", dir / "e.tsv", dir / "r.tsv");
  REQUIRE(c.documents.size() == b.documents.size());
  for (std::size_t i = 0; i < b.documents.size(); ++i) {
    CHECK(c.documents[i].full_text == b.documents[i].full_text);
  }
  CHECK(c.relations.size() == b.relations.size());
  CHECK(c.mentions.size() == b.mentions.size());
}

TEST_CASE("two terminal periods give two sentences") {
  auto b = one_doc("1", "Title", "A is here. B too.");
  const auto s = split_sentences(b.documents[0]);
  REQUIRE(s.size() == 3);
  CHECK(s[0].text == "Title");
  CHECK(s[1].text == "A is here.");
  CHECK(s[2].text == "B too.");
  const auto& ft = b.documents[0].full_text;
  for (const auto& x : s) CHECK(ft.substr(x.start, x.end - x.start) == x.text);
}

TEST_CASE("abbreviations and parentheses do not end a sentence") {
  auto b = one_doc("1", "T", "approx. 5 mg was given.");
  CHECK(split_sentences(b.documents[0]).size() == 2);  // title + one
  auto c = one_doc("1", "T", "Binding (see Fig. 2. Left panel) was weak. Next one.");
  const auto s = split_sentences(c.documents[0]);
  REQUIRE(s.size() == 3);
  CHECK(s[1].text == "Binding (see Fig. 2. Left panel) was weak.");
  auto d = one_doc("1", "T", "Levels were low. 5 mice died.");
  CHECK(split_sentences(d.documents[0]).size() == 3);
}

TEST_CASE("a mention crossing a naive boundary forces a merge") {
  auto b = one_doc("1", "T", "We used compound X. Y in vivo. Then stopped.");
  const auto m = add_mention(b, "1", "T1", EntityType::CHEMICAL, "X. Y");
  const auto plain = split_sentences(b.documents[0]);
  const auto merged = split_sentences(b.documents[0], b.mentions.at("1"));
  CHECK(merged.size() == plain.size() - 1);
  const bool inside = std::any_of(merged.begin(), merged.end(), [&](const Sentence& s) {
    return s.start <= m.start && m.end <= s.end;
  });
  CHECK(inside);
}

TEST_CASE("scheme 1 reproduces the anonymized example sentence") {
  const auto chem = span_of(kTable2, "T1", EntityType::CHEMICAL, "human type 12 RDH");
  const auto gene = span_of(kTable2, "T2", EntityType::GENE, "androstanediol");
  CHECK(tag_scheme1(sentence_of(kTable2), chem, gene, {}) ==
        "DRUG reduces dihydrotestosterone to PROTEIN");

  const auto other = span_of(kTable2, "T3", EntityType::CHEMICAL, "dihydrotestosterone");
  const std::vector<EntityMention> others = {chem, gene, other};
  CHECK(tag_scheme1(sentence_of(kTable2), chem, gene, others) == "DRUG reduces DRUG_O to PROTEIN");
}

TEST_CASE("scheme 1 leaves a non-target overlapping a target as text") {
  const std::string text = "rat COX2 inhibitor aspirin";
  const auto gene = span_of(text, "T1", EntityType::GENE, "rat COX2");
  const auto chem = span_of(text, "T2", EntityType::CHEMICAL, "aspirin");
  const auto nested = span_of(text, "T3", EntityType::GENE, "COX2");
  const std::vector<EntityMention> others = {nested};
  CHECK(tag_scheme1(sentence_of(text), chem, gene, others) == "PROTEIN inhibitor DRUG");
}

TEST_CASE("scheme 2 reproduces the marker example sentence") {
  const auto chem = span_of(kTable2, "T1", EntityType::CHEMICAL, "human type 12 RDH");
  const auto gene = span_of(kTable2, "T2", EntityType::GENE, "androstanediol");
  CHECK(tag_scheme2(sentence_of(kTable2), chem, gene) ==
        "<DRUG-B> human type 12 RDH <DRUG-E> reduces dihydrotestosterone to <PROTEIN-B> "
        "androstanediol <PROTEIN-E>");
}

TEST_CASE("scheme 2 handles leading and adjacent spans without losing text") {
  const std::string text = "AspirinCOX1 binding";
  const EntityMention chem{"1", "T1", EntityType::CHEMICAL, 0, 7, "Aspirin"};
  const EntityMention gene{"1", "T2", EntityType::GENE, 7, 11, "COX1"};
  const auto out = tag_scheme2(sentence_of(text), chem, gene);
  CHECK(out.rfind("<DRUG-B>", 0) == 0);
  CHECK(out == "<DRUG-B> Aspirin <DRUG-E><PROTEIN-B> COX1 <PROTEIN-E> binding");
}

TEST_CASE("two chemicals and three genes without gold give six negatives") {
  auto b = one_doc("1", "Study", "Aspirin and ibuprofen with COX1, COX2 and PTGS3.");
  add_mention(b, "1", "T1", EntityType::CHEMICAL, "Aspirin");
  add_mention(b, "1", "T2", EntityType::CHEMICAL, "ibuprofen");
  add_mention(b, "1", "T3", EntityType::GENE, "COX1");
  add_mention(b, "1", "T4", EntityType::GENE, "COX2");
  add_mention(b, "1", "T5", EntityType::GENE, "PTGS3");
  InstanceStats stats;
  const auto inst = generate_instances(b, SchemeKind::ANONYMIZE, &stats);
  CHECK(inst.size() == 6);
  CHECK(std::all_of(inst.begin(), inst.end(),
                    [](const auto& i) { return i.label == RelationType::NONE; }));
  CHECK(stats.negatives == 6);
}

TEST_CASE("example sentence with a gold pair gives one positive") {
  auto b = one_doc("1", "Enzymes", kTable2 + ".");
  add_mention(b, "1", "T1", EntityType::CHEMICAL, "human type 12 RDH");
  add_mention(b, "1", "T2", EntityType::CHEMICAL, "dihydrotestosterone");
  add_mention(b, "1", "T3", EntityType::GENE, "androstanediol");
  b.relations.push_back({"1", RelationType::PRODUCT_OF, "T1", "T3"});
  const auto inst = generate_instances(b, SchemeKind::ANONYMIZE);
  REQUIRE(inst.size() == 2);
  CHECK(inst[0].label == RelationType::PRODUCT_OF);
  CHECK(inst[0].tagged_text == "DRUG reduces DRUG_O to PROTEIN.");
  CHECK(inst[1].label == RelationType::NONE);
}

TEST_CASE("cross-sentence gold is dropped and counted") {
  auto b = one_doc("1", "T", "Aspirin was given. It lowered COX1 levels.");
  add_mention(b, "1", "T1", EntityType::CHEMICAL, "Aspirin");
  add_mention(b, "1", "T2", EntityType::GENE, "COX1");
  b.relations.push_back({"1", RelationType::INHIBITOR, "T1", "T2"});
  InstanceStats stats;
  const auto inst = generate_instances(b, SchemeKind::MARKERS, &stats);
  CHECK(inst.empty());
  CHECK(stats.cross_sentence_dropped == 1);
}

TEST_CASE("a pair with two gold labels yields one instance per label") {
  auto b = one_doc("1", "T", "Aspirin binds COX1.");
  add_mention(b, "1", "T1", EntityType::CHEMICAL, "Aspirin");
  add_mention(b, "1", "T2", EntityType::GENE, "COX1");
  b.relations.push_back({"1", RelationType::INHIBITOR, "T1", "T2"});
  b.relations.push_back({"1", RelationType::DIRECT_REGULATOR, "T1", "T2"});
  InstanceStats stats;
  const auto inst = generate_instances(b, SchemeKind::ANONYMIZE, &stats);
  REQUIRE(inst.size() == 2);
  CHECK(inst[0].label == RelationType::DIRECT_REGULATOR);
  CHECK(inst[1].label == RelationType::INHIBITOR);
  CHECK(stats.multi_label_pairs == 1);
}

TEST_CASE("corpus-wide properties on a synthetic corpus") {
  SyntheticOptions opts;
  opts.documents = 150;
  const auto b = generate_synthetic_corpus(opts);
  REQUIRE_NOTHROW(b.validate());

  // offset fidelity
  for (const auto& d : b.documents) {
    const auto it = b.mentions.find(d.pmid);
    if (it == b.mentions.end()) continue;
    for (const auto& m : it->second) {
      CHECK(d.full_text.substr(m.start, m.end - m.start) == m.surface);
    }
  }

  InstanceStats stats;
  const auto anon = generate_instances(b, SchemeKind::ANONYMIZE, &stats);
  const auto mark = generate_instances(b, SchemeKind::MARKERS);
  CHECK(anon.size() == mark.size());
  CHECK(stats.positives <= b.relations.size());

  // count = sum over sentences of chemicals x genes
  std::size_t expected = 0;
  for (const auto& d : b.documents) {
    const auto& ms = b.mentions.at(d.pmid);
    for (const auto& s : split_sentences(d, ms)) {
      std::size_t nc = 0, ng = 0;
      for (const auto& m : ms) {
        if (m.start >= s.start && m.end <= s.end) (m.etype == EntityType::CHEMICAL ? nc : ng)++;
      }
      expected += nc * ng;
    }
  }
  CHECK(anon.size() == expected + stats.multi_label_pairs - stats.overlapping_pairs_skipped);

  // ordering and marker removal
  for (std::size_t i = 1; i < anon.size(); ++i) {
    const auto& a = anon[i - 1];
    const auto& c = anon[i];
    const bool ordered =
        natural_less(a.pmid, c.pmid) ||
        (a.pmid == c.pmid &&
         (a.sentence_idx < c.sentence_idx ||
          (a.sentence_idx == c.sentence_idx &&
           (natural_less(a.chem.eid, c.chem.eid) ||
            (a.chem.eid == c.chem.eid && !natural_less(c.gene.eid, a.gene.eid))))));
    CHECK(ordered);
  }
  for (const auto& m : mark) {
    const auto* d = b.find_document(m.pmid);
    const auto sents = split_sentences(*d, b.mentions.at(m.pmid));
    const auto& original = sents.at(m.sentence_idx).text;
    CHECK(strip_markers(m.tagged_text) == without_space(original));
  }

  const auto again = generate_instances(b, SchemeKind::ANONYMIZE);
  REQUIRE(again.size() == anon.size());
  for (std::size_t i = 0; i < anon.size(); ++i) CHECK(again[i].tagged_text == anon[i].tagged_text);
}
