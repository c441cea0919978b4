#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace drugprot {

// Error categories map one-to-one onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class MissingArtifact : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

/// The 13 DrugProt relation labels plus the negative class. The integer
/// encoding is stable: NONE is 0, positives follow in corpus-table order.
enum class RelationType : std::uint8_t {
  NONE = 0,
  ACTIVATOR,
  AGONIST,
  AGONIST_ACTIVATOR,
  AGONIST_INHIBITOR,
  ANTAGONIST,
  DIRECT_REGULATOR,
  INDIRECT_DOWNREGULATOR,
  INDIRECT_UPREGULATOR,
  INHIBITOR,
  PART_OF,
  PRODUCT_OF,
  SUBSTRATE,
  SUBSTRATE_PRODUCT_OF,
};

inline constexpr int kNumClasses = 14;

std::string_view relation_name(RelationType r);
std::optional<RelationType> parse_relation(std::string_view name);

inline int to_index(RelationType r) { return static_cast<int>(r); }
RelationType relation_from_index(int idx);

/// Compares identifiers such as "T2" < "T10" or "9012" < "10064839" by
/// splitting into non-digit and digit runs.
bool natural_less(std::string_view a, std::string_view b);

/// Platform-independent seeded generator (splitmix64 seeding into
/// xoshiro256**). std distributions are implementation-defined, so the
/// sampling helpers live here too.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::array<std::uint64_t, 4> s_{};
};

enum class LogLevel { QUIET = 0, WARN = 1, INFO = 2 };
void set_log_level(LogLevel level);
void log_warning(std::string_view msg);
void log_info(std::string_view msg);

/// Derives an independent child seed; used for per-iteration reshuffles.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace drugprot
