#include "drugprot/synthetic.hpp"

#include <array>
#include <string_view>

namespace drugprot {

namespace {

struct Template {
  RelationType rtype;
  std::string_view mid;     // between chemical and gene
  std::string_view suffix;  // after the gene
  unsigned weight;
};

// "{C}<mid>{G}<suffix>"
constexpr std::array<Template, 8> kTemplates = {{
    {RelationType::INHIBITOR, " inhibits ", " activity in vitro.", 6},
    {RelationType::ACTIVATOR, " activates ", " in treated cells.", 3},
    {RelationType::AGONIST, " acts as an agonist of ", ".", 2},
    {RelationType::ANTAGONIST, " is a selective antagonist of ", ".", 2},
    {RelationType::SUBSTRATE, " is metabolized by ", " in the liver.", 3},
    {RelationType::PRODUCT_OF, " is produced by ", " in neurons.", 2},
    {RelationType::DIRECT_REGULATOR, " binds directly to ", ".", 3},
    {RelationType::INDIRECT_UPREGULATOR, " increases the expression of ", ".", 3},
}};

// Sentence openers keep every sentence capitalised for the splitter.
constexpr std::array<std::string_view, 6> kOpeners = {
    "Notably, ", "In addition, ", "We found that ", "Here, ", "Moreover, ", "In this study, "};

constexpr std::array<std::string_view, 8> kFillers = {
    "Patients were enrolled in a randomized trial.",
    "Samples were collected at baseline and after treatment.",
    "The results are discussed in the context of previous work.",
    "Statistical significance was assessed with a two-sided test.",
    "Mice were housed under standard conditions.",
    "These findings warrant further investigation.",
    "Data are presented as mean values (n = 12).",
    "All experiments were performed in triplicate.",
};

constexpr std::array<std::string_view, 10> kChemPrefix = {
    "meta", "oxa", "flu", "tri", "bena", "pro", "cy", "dexa", "levo", "nor"};
constexpr std::array<std::string_view, 8> kChemMiddle = {"zol", "mip", "cor", "tan",
                                                         "vin", "lop", "ram", "dil"};
constexpr std::array<std::string_view, 8> kChemSuffix = {"amide", "ine",   "ol",  "ate",
                                                         "one",   "azole", "pril", "statin"};

class DocBuilder {
 public:
  DocBuilder(std::string pmid, CorpusBundle& bundle) : pmid_(std::move(pmid)), bundle_(bundle) {}

  void text(std::string_view s) { cur_ += s; }

  std::string entity(std::string_view surface, EntityType type) {
    EntityMention m;
    m.pmid = pmid_;
    m.eid = "T" + std::to_string(++next_id_);
    m.etype = type;
    m.start = offset_base_ + cur_.size();
    m.end = m.start + surface.size();
    m.surface = std::string(surface);
    cur_ += surface;
    mentions_.push_back(m);
    return m.eid;
  }

  void relate(RelationType r, const std::string& chem, const std::string& gene) {
    bundle_.relations.push_back({pmid_, r, chem, gene});
  }

  void end_title() {
    title_ = cur_;
    cur_.clear();
    offset_base_ = title_.size() + 1;
  }

  void finish() {
    Document d;
    d.pmid = pmid_;
    d.title = title_;
    d.abstract = cur_;
    d.full_text = d.title + '\t' + d.abstract;
    bundle_.documents.push_back(std::move(d));
    if (!mentions_.empty()) bundle_.mentions[pmid_] = std::move(mentions_);
  }

 private:
  std::string pmid_;
  CorpusBundle& bundle_;
  std::string title_;
  std::string cur_;
  std::size_t offset_base_ = 0;
  int next_id_ = 0;
  std::vector<EntityMention> mentions_;
};

std::string chemical_name(Rng& rng) {
  std::string s(kChemPrefix[rng.below(kChemPrefix.size())]);
  s += kChemMiddle[rng.below(kChemMiddle.size())];
  s += kChemSuffix[rng.below(kChemSuffix.size())];
  return s;
}

std::string gene_name(Rng& rng) {
  std::string s;
  const auto letters = 2 + rng.below(3);
  for (std::uint64_t i = 0; i < letters; ++i) s += static_cast<char>('A' + rng.below(26));
  s += std::to_string(1 + rng.below(19));
  return s;
}

const Template& pick_template(Rng& rng) {
  unsigned total = 0;
  for (const auto& t : kTemplates) total += t.weight;
  auto x = static_cast<unsigned>(rng.below(total));
  for (const auto& t : kTemplates) {
    if (x < t.weight) return t;
    x -= t.weight;
  }
  return kTemplates.front();
}

}  // namespace

CorpusBundle generate_synthetic_corpus(const SyntheticOptions& opts) {
  CorpusBundle bundle;
  Rng rng(opts.seed);
  for (std::size_t doc = 0; doc < opts.documents; ++doc) {
    DocBuilder b(std::to_string(opts.first_pmid + doc), bundle);

    b.text("Effects of ");
    b.entity(chemical_name(rng), EntityType::CHEMICAL);
    b.text(" on ");
    b.entity(gene_name(rng), EntityType::GENE);
    b.text(" signaling");
    b.end_title();

    const auto n_sentences = 2 + rng.below(3);
    for (std::uint64_t s = 0; s < n_sentences; ++s) {
      if (s > 0) b.text(" ");
      const double roll = rng.uniform();
      const std::string_view opener = kOpeners[rng.below(kOpeners.size())];
      if (roll < 0.45) {
        const auto& t = pick_template(rng);
        b.text(opener);
        const auto c = b.entity(chemical_name(rng), EntityType::CHEMICAL);
        b.text(t.mid);
        const auto g = b.entity(gene_name(rng), EntityType::GENE);
        b.text(t.suffix);
        b.relate(t.rtype, c, g);
      } else if (roll < 0.60) {
        // Positive pair plus a contrasted gene that forms a negative pair.
        const auto& t = pick_template(rng);
        b.text(opener);
        const auto c = b.entity(chemical_name(rng), EntityType::CHEMICAL);
        b.text(t.mid);
        const auto g = b.entity(gene_name(rng), EntityType::GENE);
        b.text(" but not ");
        b.entity(gene_name(rng), EntityType::GENE);
        b.text(t.suffix);
        b.relate(t.rtype, c, g);
      } else if (roll < 0.72) {
        b.text("No effect of ");
        b.entity(chemical_name(rng), EntityType::CHEMICAL);
        b.text(" on ");
        b.entity(gene_name(rng), EntityType::GENE);
        b.text(" was observed.");
      } else if (roll < 0.84) {
        b.entity(gene_name(rng), EntityType::GENE);
        b.text(" levels were unchanged after ");
        b.entity(chemical_name(rng), EntityType::CHEMICAL);
        b.text(" treatment.");
      } else {
        b.text(kFillers[rng.below(kFillers.size())]);
      }
    }
    b.finish();
  }
  return bundle;
}

}  // namespace drugprot
