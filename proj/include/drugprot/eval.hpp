#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "drugprot/common.hpp"
#include "drugprot/corpus.hpp"

namespace drugprot {

struct PredictionRecord {
  std::string pmid;
  RelationType rtype = RelationType::INHIBITOR;
  std::string arg1;
  std::string arg2;

  auto operator<=>(const PredictionRecord&) const = default;
};

/// Submission order: (pmid, arg1, arg2, rtype), identifiers compared naturally.
bool submission_less(const PredictionRecord& a, const PredictionRecord& b);

/// Sorts into submission order and drops exact duplicates.
std::vector<PredictionRecord> normalize_records(std::vector<PredictionRecord> records);

std::string format_record(const PredictionRecord& r);

void write_predictions(const std::filesystem::path& path, std::vector<PredictionRecord> records);

/// Reads a relations-format TSV. Duplicate rows are dropped with a warning.
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

/// Gold relations of a corpus as records.
std::vector<PredictionRecord> gold_records(const CorpusBundle& bundle);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

Prf prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

struct MetricsReport {
  Prf overall;
  /// Indexed by relation type; entry 0 (NONE) stays empty.
  std::array<Prf, kNumClasses> per_type{};

  nlohmann::json to_json() const;
  /// Overall P/R/F1 followed by one row per relation type.
  std::string to_table() const;
};

/// Exact tuple matching on (pmid, rtype, arg1, arg2), both sides deduplicated.
MetricsReport micro_metrics(std::span<const PredictionRecord> gold,
                            std::span<const PredictionRecord> pred);

}  // namespace drugprot
