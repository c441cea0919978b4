// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>

#include <json.hpp>

#include "drugprot/cli.hpp"
#include "drugprot/corpus.hpp"
#include "drugprot/ensemble.hpp"
#include "drugprot/eval.hpp"
#include "drugprot/train.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace drugprot;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "-q");
  return run_cli(args);
}

json read_json(const fs::path& p) { return json::parse(testing::read_file(p)); }

json corpus_json(const fs::path& d) {
  return {{"abstracts", (d / "abstracts.tsv").string()},
          {"entities", (d / "entities.tsv").string()},
          {"relations", (d / "relations.tsv").string()}};
}

EntityMention span_of(const std::string& text, const std::string& eid, EntityType type,
                      const std::string& surface) {
  const auto pos = text.find(surface);
  return {"1", eid, type, pos, pos + surface.size(), surface};
}

Outcome tagging_fidelity() {
  const std::string text = "human type 12 RDH reduces dihydrotestosterone to androstanediol";
  const Sentence s{"1", 0, text.size(), text};
  const auto chem = span_of(text, "T1", EntityType::CHEMICAL, "human type 12 RDH");
  const auto gene = span_of(text, "T2", EntityType::GENE, "androstanediol");
  const auto s1 = tag_scheme1(s, chem, gene, {});
  const auto s2 = tag_scheme2(s, chem, gene);
  const bool ok1 = s1 == "DRUG reduces dihydrotestosterone to PROTEIN";
  const bool ok2 = s2 == "<DRUG-B> human type 12 RDH <DRUG-E> reduces dihydrotestosterone to "
                         "<PROTEIN-B> androstanediol <PROTEIN-E>";
  return {ok1 && ok2, "scheme 1 \"" + s1 + "\", scheme 2 \"" + s2 + "\""};
}

Outcome gradient_correctness() {
  double worst = 0.0;
  std::string where;
  for (auto head : {HeadKind::CLS, HeadKind::LSTM, HeadKind::ATTN}) {
    for (std::uint64_t seed : {101u, 202u, 303u}) {
      const auto p = testing::tiny_problem(head, seed);
      const auto r = testing::check_gradients(p.params, p.batch, p.weights);
      if (r.checked != p.params.parameter_count()) return {false, "not every parameter checked"};
      if (r.max_rel > worst) {
        worst = r.max_rel;
        where = std::string(head_name(head)) + " " + r.worst;
      }
    }
  }
  return {worst < 1e-4, fmt("max relative error %.3g over 3 heads x 3 batches", worst) + " at " +
                            where};
}

Outcome voting_oracle() {
  using R = RelationType;
  const R pool[] = {R::NONE, R::INHIBITOR, R::ACTIVATOR, R::SUBSTRATE};
  int agree = 0, ties = 0;
  for (int code = 0; code < 1024; ++code) {
    std::vector<R> ballot;
    for (int k = 0, c = code; k < 5; ++k, c /= 4) ballot.push_back(pool[c % 4]);
    const auto expect = testing::brute_force_vote(ballot);
    agree += majority_vote(ballot) == expect;
    std::map<R, int> n;
    for (auto l : ballot) n[l]++;
    int top = 0, holders = 0;
    for (auto [l, k] : n) top = std::max(top, k);
    for (auto [l, k] : n) holders += k == top;
    ties += holders > 1;
  }
  return {agree == 1024, fmt("%.0f/1024 tuples agree (%.0f ties)", agree, ties)};
}

Outcome class_weight_ratio() {
  const auto w = inverse_frequency_weights(testing::drugprot_train_counts(0));
  const double ratio = w[static_cast<std::size_t>(RelationType::AGONIST)] /
                       w[static_cast<std::size_t>(RelationType::INHIBITOR)];
  const double err = std::abs(ratio - 5277.0 / 652.0);
  return {err < 1e-9, fmt("w_AGONIST/w_INHIBITOR = %.12f, error %.2g", ratio, err)};
}

Outcome metrics_oracle() {
  using R = RelationType;
  auto rec = [](std::string p, R t, std::string a, std::string b) {
    return PredictionRecord{std::move(p), t, std::move(a), std::move(b)};
  };
  const std::vector<PredictionRecord> gold = {rec("1", R::INHIBITOR, "T1", "T2"),
                                              rec("1", R::ACTIVATOR, "T3", "T4"),
                                              rec("2", R::SUBSTRATE, "T1", "T5")};
  const std::vector<PredictionRecord> pred = {rec("1", R::INHIBITOR, "T1", "T2"),
                                              rec("1", R::AGONIST, "T3", "T4")};
  const auto m = micro_metrics(gold, pred);
  const auto& inh = m.per_type[static_cast<std::size_t>(R::INHIBITOR)];
  const auto& act = m.per_type[static_cast<std::size_t>(R::ACTIVATOR)];
  const auto& ago = m.per_type[static_cast<std::size_t>(R::AGONIST)];
  bool ok = m.overall.precision == 0.5 && m.overall.recall == 1.0 / 3.0 &&
            std::abs(m.overall.f1 - 0.4) < 1e-15 && inh.f1 == 1.0 && act.recall == 0.0 &&
            act.f1 == 0.0 && ago.precision == 0.0;

  std::mt19937_64 rng(2021);
  int iff = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PredictionRecord> g, p;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 8); ++i) {
      g.push_back(rec(std::to_string(rng() % 3), relation_from_index(1 + rng() % 13),
                      "T" + std::to_string(rng() % 3), "T" + std::to_string(3 + rng() % 3)));
    }
    p = trial % 2 == 0 ? g : std::vector<PredictionRecord>(g.begin(), g.end() - 1);
    if (trial % 3 == 0) std::shuffle(p.begin(), p.end(), rng);
    const std::set<PredictionRecord> gs(g.begin(), g.end()), ps(p.begin(), p.end());
    iff += (micro_metrics(g, p).overall.f1 == 1.0) == (gs == ps);
  }
  ok = ok && iff == 100;
  return {ok, fmt("P=%.4f R=%.4f F1=%.4f", m.overall.precision, m.overall.recall, m.overall.f1) +
                  fmt(", F1=1 iff equal on %.0f/100 pairs", iff)};
}

json pipeline_config(const fs::path& data, const std::string& kind, int epochs) {
  json members = json::array();
  const char* heads[] = {"CLS", "LSTM", "ATTN", "CLS", "ATTN"};
  const char* schemes[] = {"ANONYMIZE", "MARKERS", "ANONYMIZE", "MARKERS", "MARKERS"};
  for (int m = 0; m < 5; ++m) {
    members.push_back({{"head_kind", heads[m]},
                       {"scheme", schemes[m]},
                       {"class_weighted", m % 2 == 0},
                       {"seed", 11 + m}});
  }
  if (kind == "RUN5_SINGLE" || kind == "RUN4_VOTE") members = json::array({members[0]});
  return {{"pipeline", kind},
          {"corpus", corpus_json(data)},
          {"test", corpus_json(data / "test")},
          {"vocab", {{"size", 600}}},
          {"max_len", 64},
          {"encoder", {{"layers", 2}, {"heads", 4}, {"hidden", 64}}},
          {"train", {{"lr", 1e-3}, {"epochs", epochs}, {"batch", 16}}},
          {"stacker", {{"epochs", 30}}},
          {"members", members},
          {"partition", {{"seed", 7}}}};
}

struct RunScore {
  double f1 = 0.0;
  double best_member = 0.0;
};

RunScore run_kind(const fs::path& root, const fs::path& data, const std::string& kind, int epochs) {
  const auto out = root / kind;
  testing::write_file(root / (kind + ".json"), pipeline_config(data, kind, epochs).dump(2));
  if (cli({"pipeline", "-c", (root / (kind + ".json")).string(), "-o", out.string()}) != 0) {
    throw std::runtime_error(kind + " pipeline failed");
  }
  RunScore s;
  s.f1 = read_json(out / "metrics.json").at("overall").at("f1").get<double>();
  for (const auto& m : read_json(out / "member_metrics.json")) {
    s.best_member = std::max(s.best_member, m.at("f1").get<double>());
  }
  return s;
}

Outcome synthetic_end_to_end(const fs::path& root, MetricsReport* run3_metrics) {
  const auto data = root / "data";
  if (cli({"synth", "--documents", "2000", "--test-documents", "400", "-o", data.string()}) != 0) {
    return {false, "synthetic corpus generation failed"};
  }
  const auto single = run_kind(root, data, "RUN5_SINGLE", 3);
  const auto run3 = run_kind(root, data, "RUN3_STACK_VOTE", 2);
  const auto run4 = run_kind(root, data, "RUN4_VOTE", 2);
  const auto gold = read_predictions(data / "test" / "relations.tsv");
  const auto pred = read_predictions(root / "RUN3_STACK_VOTE" / "predictions.tsv");
  *run3_metrics = micro_metrics(gold, pred);
  const bool ok = single.f1 >= 0.95 && run3.f1 >= run3.best_member - 0.02 &&
                  run4.f1 >= run4.best_member - 0.02;
  return {ok, fmt("single F1 %.4f; ", single.f1) +
                  fmt("RUN3 F1 %.4f vs best member %.4f; ", run3.f1, run3.best_member) +
                  fmt("RUN4 F1 %.4f vs best member %.4f", run4.f1, run4.best_member)};
}

std::map<std::string, std::string> tree_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "effective_config.json") continue;
    out[fs::relative(e.path(), dir).generic_string()] = testing::read_file(e.path());
  }
  return out;
}

Outcome determinism(const fs::path& root) {
  const auto data = root / "small";
  if (cli({"synth", "--documents", "120", "--test-documents", "30", "--seed", "3", "-o",
           data.string()}) != 0) {
    return {false, "synthetic corpus generation failed"};
  }
  std::size_t files = 0;
  for (const std::string kind : {"RUN1_STACK", "RUN5_SINGLE"}) {
    auto cfg = pipeline_config(data, kind, 1);
    cfg["vocab"]["size"] = 300;
    cfg["max_len"] = 48;
    cfg["encoder"] = {{"layers", 1}, {"heads", 2}, {"hidden", 16}, {"ffn", 32}};
    cfg["stacker"]["epochs"] = 3;
    testing::write_file(root / "det.json", cfg.dump());
    std::map<std::string, std::string> first;
    for (const std::string rep : {"a", "b"}) {
      const auto out = root / ("det_" + kind + "_" + rep);
      if (cli({"pipeline", "-c", (root / "det.json").string(), "-o", out.string()}) != 0) {
        return {false, kind + " run failed"};
      }
      auto bytes = tree_bytes(out);
      if (rep == "a") {
        first = std::move(bytes);
        continue;
      }
      if (bytes != first) return {false, kind + " outputs differ between runs"};
      bool has_ckpt = false, has_pred = false;
      for (const auto& [name, b] : bytes) {
        has_ckpt |= name.ends_with(".dpt");
        has_pred |= name == "predictions.tsv";
      }
      if (!has_ckpt || !has_pred) return {false, kind + " produced no checkpoint or predictions"};
      files += bytes.size();
    }
  }
  return {true, fmt("%.0f files identical across repeated RUN1 and RUN5 runs", files)};
}

Outcome report_format(const MetricsReport& m) {
  const auto table = m.to_table();
  std::size_t rows = 0;
  bool ok = table.find("Overall") != std::string::npos;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    ok &= table.find(std::string(relation_name(static_cast<RelationType>(c)))) != std::string::npos;
  }
  for (char ch : table) rows += ch == '\n';
  ok &= rows == 15 && table.find(" P ") != std::string::npos;
  std::fputs(table.c_str(), stdout);
  return {ok, fmt("overall + %.0f relation rows rendered; headline test-set numbers are not "
                  "reproducible without pre-trained weights and the official test gold",
                  static_cast<double>(kNumClasses - 1))};
}

Outcome adamw_oracle() {
  const auto ref = testing::scalar_adamw_trace(0.5, 20, 0.1, 0.01);
  Matrix w(1, 1), g(1, 1);
  w(0, 0) = 0.5;
  std::vector<Matrix*> ps = {&w};
  std::vector<const Matrix*> gs = {&g};
  auto st = init_optimizer(std::span<Matrix* const>(ps), AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.01});
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    g(0, 0) = 2.0 * (w(0, 0) - 3.0);
    adamw_step(std::span<Matrix* const>(ps), std::span<const Matrix* const>(gs), st);
    worst = std::max(worst, std::abs(w(0, 0) - ref[static_cast<std::size_t>(i)]));
  }
  return {worst < 1e-12, fmt("max deviation %.3g over 20 steps, final w %.6f", worst, w(0, 0))};
}

}  // namespace

int main() {
  testing::TempDir root;
  MetricsReport run3_metrics;
  bool run3_ready = false;

  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0 means no runtime bound
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "tagging fidelity", 1.0, tagging_fidelity},
      {2, "gradient correctness", 120.0, gradient_correctness},
      {3, "voting oracle", 1.0, voting_oracle},
      {4, "class-weight ratios", 0.0, class_weight_ratio},
      {5, "metrics oracle", 0.0, metrics_oracle},
      {6, "synthetic end-to-end", 1800.0,
       [&] {
         auto o = synthetic_end_to_end(root.path(), &run3_metrics);
         run3_ready = true;
         return o;
       }},
      {7, "determinism", 0.0, [&] { return determinism(root.path()); }},
      {8, "report format", 0.0,
       [&]() -> Outcome {
         if (!run3_ready) return {false, "no RUN3 metrics available"};
         return report_format(run3_metrics);
       }},
      {9, "AdamW scalar oracle", 0.0, adamw_oracle},
  };

  std::vector<std::string> lines;
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0.0 && secs >= c.limit_s) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s limit]", c.limit_s);
    }
    failed += !o.pass;
    char head[120];
    std::snprintf(head, sizeof head, "%s criterion %d: %s (%.1f s): ", o.pass ? "PASS" : "FAIL",
                  c.id, c.name, secs);
    lines.push_back(head + o.detail);
    std::printf("%s\n", lines.back().c_str());
    std::fflush(stdout);
  }
  std::printf("\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  return failed == 0 ? 0 : 1;
}
