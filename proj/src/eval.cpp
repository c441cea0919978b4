#include "drugprot/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "text_util.hpp"

namespace drugprot {

bool submission_less(const PredictionRecord& a, const PredictionRecord& b) {
  if (a.pmid != b.pmid) return natural_less(a.pmid, b.pmid);
  if (a.arg1 != b.arg1) return natural_less(a.arg1, b.arg1);
  if (a.arg2 != b.arg2) return natural_less(a.arg2, b.arg2);
  return a.rtype < b.rtype;
}

std::vector<PredictionRecord> normalize_records(std::vector<PredictionRecord> records) {
  std::sort(records.begin(), records.end(), submission_less);
  records.erase(std::unique(records.begin(), records.end()), records.end());
  return records;
}

std::string format_record(const PredictionRecord& r) {
  return r.pmid + '\t' + std::string(relation_name(r.rtype)) + "\tArg1:" + r.arg1 +
         "\tArg2:" + r.arg2;
}

void write_predictions(const std::filesystem::path& path, std::vector<PredictionRecord> records) {
  records = normalize_records(std::move(records));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    if (r.rtype == RelationType::NONE) throw DataError("NONE records cannot be written");
    out << format_record(r) << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open predictions " + path.string());
  std::vector<PredictionRecord> out;
  std::set<PredictionRecord> seen;
  std::size_t duplicates = 0;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 4) fail("expected 4 tab-separated fields");
    PredictionRecord r;
    r.pmid = std::string(f[0]);
    const auto rtype = parse_relation(f[1]);
    if (!rtype || *rtype == RelationType::NONE) fail("unknown relation '" + std::string(f[1]) + "'");
    r.rtype = *rtype;
    if (!f[2].starts_with("Arg1:") || !f[3].starts_with("Arg2:") || f[2].size() == 5 ||
        f[3].size() == 5) {
      fail("malformed argument fields");
    }
    r.arg1 = std::string(f[2].substr(5));
    r.arg2 = std::string(f[3].substr(5));
    if (r.pmid.empty()) fail("empty pmid");
    if (!seen.insert(r).second) {
      ++duplicates;
      continue;
    }
    out.push_back(std::move(r));
  }
  if (duplicates > 0) {
    log_warning(path.string() + ": dropped " + std::to_string(duplicates) + " duplicate row(s)");
  }
  return out;
}

std::vector<PredictionRecord> gold_records(const CorpusBundle& bundle) {
  std::vector<PredictionRecord> out;
  out.reserve(bundle.relations.size());
  for (const auto& r : bundle.relations) out.push_back({r.pmid, r.rtype, r.arg1, r.arg2});
  return normalize_records(std::move(out));
}

Prf prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf p;
  p.tp = tp;
  p.fp = fp;
  p.fn = fn;
  p.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  p.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  p.f1 = p.precision + p.recall > 0.0
             ? 2.0 * p.precision * p.recall / (p.precision + p.recall)
             : 0.0;
  return p;
}

MetricsReport micro_metrics(std::span<const PredictionRecord> gold,
                            std::span<const PredictionRecord> pred) {
  const std::set<PredictionRecord> g(gold.begin(), gold.end());
  const std::set<PredictionRecord> p(pred.begin(), pred.end());
  std::array<std::size_t, kNumClasses> tp{}, fp{}, fn{};
  for (const auto& r : p) {
    (g.contains(r) ? tp : fp)[static_cast<std::size_t>(r.rtype)] += 1;
  }
  for (const auto& r : g) {
    if (!p.contains(r)) fn[static_cast<std::size_t>(r.rtype)] += 1;
  }
  MetricsReport report;
  std::size_t ttp = 0, tfp = 0, tfn = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    report.per_type[c] = prf_from_counts(tp[c], fp[c], fn[c]);
    ttp += tp[c];
    tfp += fp[c];
    tfn += fn[c];
  }
  report.overall = prf_from_counts(ttp, tfp, tfn);
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  auto prf = [](const Prf& p) {
    return nlohmann::json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
                          {"tp", p.tp},               {"fp", p.fp},         {"fn", p.fn}};
  };
  nlohmann::json j;
  j["overall"] = prf(overall);
  j["per_type"] = nlohmann::json::object();
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    j["per_type"][std::string(relation_name(static_cast<RelationType>(c)))] = prf(per_type[c]);
  }
  return j;
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %8s %8s %8s %7s %7s %7s\n", "Relation", "P", "R", "F1",
                "TP", "FP", "FN");
  os << buf;
  auto row = [&](std::string_view name, const Prf& p) {
    std::snprintf(buf, sizeof buf, "%-24.*s %8.4f %8.4f %8.4f %7zu %7zu %7zu\n",
                  static_cast<int>(name.size()), name.data(), p.precision, p.recall, p.f1, p.tp,
                  p.fp, p.fn);
    os << buf;
  };
  row("Overall (micro)", overall);
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    row(relation_name(static_cast<RelationType>(c)), per_type[c]);
  }
  return os.str();
}

}  // namespace drugprot
