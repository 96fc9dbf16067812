#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "invadelab/invasion.hpp"
#include "invadelab/observables.hpp"

namespace invadelab {

/// Rejected configuration; the message names the violated precondition.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a run stops on purpose after `checkpoint_stop_after` steps of a
/// trial (simulated interruption); rerunning resumes from the checkpoint.
class RunInterrupted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every estimator kind accepted by run().
const std::vector<std::string>& experiment_kinds();

struct ExperimentConfig {
  std::string kind;

  std::int64_t n = 16;
  std::int64_t m = 0;                 // crossing height; 0 means n
  std::vector<std::int64_t> ns;       // scale / horizon sweep; overrides n
  double p = 0.5;
  std::vector<double> ps;             // threshold sweep; overrides p
  double eps = 0.05;
  double x = 0.5;                     // identity test level
  double bin_width = 0.01;
  std::vector<double> bin_edges;      // overrides bin_width
  std::int64_t trials = 100;
  double horizon_factor = 16.0;
  std::int64_t truncation = 0;        // M; 0 picks the per-estimator default
  std::string event = "Dn";           // events: Dkm, Dn or Lk
  int k = 2;
  int dkm_m = 4;
  int ell = 5;
  std::string manifest;               // threshold manifest path
  std::int64_t manifest_trials = 2000;
  std::uint64_t manifest_seed = 1;
  std::uint64_t seed0 = 1;

  // Execution settings; excluded from the digest because they never change results.
  int workers = 1;
  std::string checkpoint_dir;
  std::int64_t checkpoint_every = std::int64_t{1} << 20;
  std::int64_t checkpoint_stop_after = 0;  // testing hook; 0 disables
  std::string out;
  std::string format = "csv";

  void validate() const;
  // ns if given; otherwise {n}, except profile-step which defaults to 10^4, 10^5, 10^6.
  std::vector<std::int64_t> scales() const;
  std::vector<double> thresholds() const { return ps.empty() ? std::vector<double>{p} : ps; }
  BinSpec bins() const;

  // Canonical serialization: sorted keys, result-affecting fields only.
  std::string canonical_json() const;
  // Full serialization including execution settings.
  std::string to_json() const;
  static ExperimentConfig from_json(std::string_view text);
  // 16 hex digits of FNV-1a over canonical_json().
  std::string digest() const;
};

/// One output row. Fields that do not apply are NaN (empty in CSV).
struct ResultRow {
  std::string estimand;
  double n = 0.0;
  double m = 0.0;
  double p = 0.0;
  double eps = 0.0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed0 = 0;
  std::string config_digest;
  std::string note;
  double wall_time = 0.0;

  ResultRow();
  // Equality of everything except wall_time.
  bool same_result(const ResultRow& o) const;
};

bool same_results(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b);

std::vector<ResultRow> run(const ExperimentConfig& config);

// Columns: estimand,n,m,p,eps,x_lo,x_hi,mean,se,ci_lo,ci_hi,trials,seed0,config_digest,note,wall_time
inline constexpr const char* kResultCsvHeader =
    "estimand,n,m,p,eps,x_lo,x_hi,mean,se,ci_lo,ci_hi,trials,seed0,config_digest,note,wall_time";

enum class OutputFormat { Csv, Json, Svg };
OutputFormat parse_format(std::string_view name);

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_csv(std::istream& in);
void write_json(std::ostream& out, const std::vector<ResultRow>& rows);
// Mean vs parameter with +-2 SE bars, one series per estimand.
void write_svg(std::ostream& out, const std::vector<ResultRow>& rows);
void emit(std::ostream& out, const std::vector<ResultRow>& rows, OutputFormat format);
void emit(const std::filesystem::path& path, const std::vector<ResultRow>& rows, OutputFormat format);

struct CheckpointOptions {
  std::filesystem::path path;                      // empty disables checkpointing
  std::int64_t every = std::int64_t{1} << 20;
  std::int64_t stop_after = 0;                     // stop (nullopt) once this many steps are done
};

/// profile_run with periodic checkpoints. Returns nullopt when stopped by
/// stop_after; calling again with the same path resumes bit-identically and
/// removes the checkpoint on completion.
std::optional<std::vector<BinnedProfile>> profile_run_resumable(const WeightField& field,
                                                                std::span<const std::int64_t> horizons,
                                                                const BinSpec& bins, const CheckpointOptions& ckpt);

/// Steps(n) invasion with periodic checkpoints of engine state plus the trace
/// so far. Same stop / resume contract as profile_run_resumable.
std::optional<InvasionTrace> invade_resumable(const WeightField& field, std::int64_t steps,
                                              const CheckpointOptions& ckpt);

}  // namespace invadelab
