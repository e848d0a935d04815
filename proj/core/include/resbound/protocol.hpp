#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "resbound/baselines.hpp"
#include "resbound/corpus.hpp"
#include "resbound/degrade.hpp"
#include "resbound/metrics.hpp"
#include "resbound/model.hpp"

namespace resbound {

// Everything the evaluation subcommands need beyond the checkpoint itself.
struct EvalConfig {
  DegradeConfig degrade;
  BaselineParams baselines;
  MetricThresholds thresholds;
  double eps_mc = 0.005;  // stability dead band on target gain
  int n_seeds = 10;       // degradation draws per case in the stability run

  void validate() const;  // throws DataError
  std::string to_json_text() const;
  static EvalConfig from_json_text(std::string_view text);
};

// Restoration methods compared everywhere, in fixed report order.
inline constexpr std::array<std::string_view, 4> kMatrixMethods = {
    "degraded", "gaussian", "nlm", "bounded"};

struct MethodAggregate {
  std::string method;
  double mean_target_gain = 0.0;
  double std_target_gain = 0.0;
  double mean_psnr_db = 0.0;
  double std_psnr_db = 0.0;
  double iatrogenic_rate = 0.0;
  double mean_footprint_max = 0.0;
  double mean_footprint_fraction = 0.0;
};

struct PairedRow {
  std::string case_id;
  double delta_target_gain = 0.0;
  double delta_psnr_db = 0.0;
};

// a vs b on identical per-case degradations; wins are strict, ties separate.
struct PairedReport {
  std::string method_a;
  std::string method_b;
  std::vector<PairedRow> rows;
  uint64_t wins = 0;
  uint64_t ties = 0;
  double win_rate_target_gain = 0.0;
  double delta_target_gain = 0.0;  // mean of per-case differences
  double delta_psnr_db = 0.0;
};

struct MatrixReport {
  int case_count = 0;
  std::vector<CaseMetrics> rows;  // case-major, methods in kMatrixMethods order
  std::vector<MethodAggregate> aggregates;
  PairedReport bounded_vs_gaussian;
};

enum class StabilityClass {
  StablyPositive = 0,
  NoiseSensitive = 1,
  Neutral = 2,
  StablyNegative = 3,
};
inline constexpr int kStabilityClassCount = 4;
const char* stability_class_name(StabilityClass c);

// All gains above the band, all below, all inside, else mixed.
StabilityClass classify_case(const std::vector<double>& gains, double eps_mc);

struct StabilityCaseRow {
  std::string case_id;
  std::vector<double> gains;  // one bounded-model target gain per seed index
  StabilityClass cls = StabilityClass::Neutral;
};

struct StabilityReport {
  int n_seeds = 0;
  std::vector<StabilityCaseRow> rows;
  std::array<uint64_t, kStabilityClassCount> class_counts{};
  uint64_t positive_runs = 0;
  uint64_t total_runs = 0;
  double run_positive_rate = 0.0;
};

struct OverlapCaseRow {
  std::string case_id;
  uint64_t evaluated_pixels = 0;
  uint64_t edit_count = 0;
  std::array<uint64_t, kRegionCount> region_counts{};
  std::array<double, kRegionCount> region_share{};
  double edit_fraction = 0.0;
};

struct OverlapRegionStat {
  std::string region;
  double mean_share = 0.0;
  double max_share = 0.0;
};

struct OverlapReport {
  std::vector<OverlapCaseRow> rows;
  std::array<OverlapRegionStat, kRegionCount> regions{};
};

struct ExternalCaseRow {
  std::string case_id;
  std::string method;
  double psnr_db = 0.0;
  double delta_psnr_db = 0.0;      // vs the supplied degraded volume
  double max_modification = 0.0;   // vs the supplied degraded volume
};

struct ExternalMethodStat {
  std::string method;
  double mean_psnr_db = 0.0;
  double mean_delta_psnr_db = 0.0;
  uint64_t wins = 0;
  uint64_t ties = 0;
  double win_rate = 0.0;
  double max_modification = 0.0;  // max across cases
};

struct ExternalReport {
  int case_count = 0;
  std::vector<ExternalCaseRow> rows;
  std::vector<ExternalMethodStat> methods;
};

// The model slot in the comparisons; must be pure and thread-safe. Production
// wraps the checkpoint; tests can swap in an identity or oracle restorer.
using CaseRestorer =
    std::function<Volume(const Volume& degraded, const PhantomCaseFiles& files)>;

// Per case: one seeded recipe, four methods, metrics against the clean
// volume; the bounded-vs-gaussian pairing rides along. Refuses corpora that
// share case ids with the training manifest.
MatrixReport run_recovery_matrix(const std::string& corpus_dir,
                                 const Checkpoint& ckpt, const EvalConfig& cfg,
                                 uint64_t seed);
MatrixReport run_recovery_matrix_with(
    const std::string& corpus_dir, const CaseRestorer& bounded,
    const std::vector<std::string>& train_case_ids, const EvalConfig& cfg,
    uint64_t seed);

// Rows must agree on case ids and recipe seeds, in order.
PairedReport paired_comparison(const std::vector<CaseMetrics>& rows_a,
                               const std::vector<CaseMetrics>& rows_b);

// cfg.n_seeds fresh degradations per case; recipe seed derived from
// (seed, case_id, seed_index), so any subset of runs is reproducible alone.
StabilityReport mc_stability(const std::string& corpus_dir,
                             const Checkpoint& ckpt, const EvalConfig& cfg,
                             uint64_t seed);
StabilityReport mc_stability_with(const std::string& corpus_dir,
                                  const CaseRestorer& bounded,
                                  const EvalConfig& cfg, uint64_t seed);

// Where the model edits: per-region share of meaningful edits on the label
// partition, over evaluated slices.
OverlapReport overlap_analysis(const std::string& corpus_dir,
                               const Checkpoint& ckpt, const EvalConfig& cfg,
                               uint64_t seed);
OverlapReport overlap_analysis_with(const std::string& corpus_dir,
                                    const CaseRestorer& bounded,
                                    const EvalConfig& cfg, uint64_t seed);

// Supplied degraded/reference pairs; no internal degradation. Volume-level
// PSNR, improvement over the degraded input, and modification magnitude.
ExternalReport external_eval(const std::string& corpus_dir,
                             const Checkpoint& ckpt, const EvalConfig& cfg);

}  // namespace resbound
