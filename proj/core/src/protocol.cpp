#include "resbound/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "resbound/errors.hpp"
#include "resbound/parallel.hpp"
#include "resbound/rng.hpp"

using nlohmann::json;

namespace resbound {

namespace {

json parse_or_throw(std::string_view text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError(std::string("invalid JSON in ") + what);
  return j;
}

double pop_std(double mean, double mean_sq) {
  return std::sqrt(std::max(0.0, mean_sq - mean * mean));
}

CorpusManifest load_kind(const std::string& dir, const char* kind) {
  CorpusManifest m = load_corpus_manifest(dir);
  if (m.kind != kind)
    throw DataError("corpus at " + dir + " has kind '" + m.kind +
                    "', expected '" + kind + "'");
  return m;
}

void check_disjoint(const CorpusManifest& m,
                    const std::vector<std::string>& train_case_ids) {
  const std::set<std::string> train(train_case_ids.begin(),
                                    train_case_ids.end());
  size_t shared = 0;
  std::string first;
  for (const auto& c : m.cases)
    if (train.count(c.case_id)) {
      if (shared == 0) first = c.case_id;
      ++shared;
    }
  if (shared > 0)
    throw DataError("evaluation corpus shares " + std::to_string(shared) +
                    " case id(s) with the training corpus (first: " + first +
                    ")");
}

CaseRestorer model_restorer(const ModelParams& p) {
  return [&p](const Volume& degraded, const PhantomCaseFiles&) {
    return restore_volume(degraded, p);
  };
}

double volume_max_abs_diff(const Volume& a, const Volume& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.voxel_count(); ++i)
    m = std::max(m, std::abs(double(a.voxels[i]) - double(b.voxels[i])));
  return m;
}

}  // namespace

void EvalConfig::validate() const {
  degrade.validate();
  baselines.validate();
  thresholds.validate();
  if (!(std::isfinite(eps_mc) && eps_mc > 0.0))
    throw DataError("eps_mc must be positive");
  if (n_seeds < 2) throw DataError("stability needs at least 2 seeds per case");
}

std::string EvalConfig::to_json_text() const {
  json j;
  j["degrade"] = parse_or_throw(degrade.to_json_text(), "degrade config");
  j["baselines"] = {{"gaussian_sigma", baselines.gaussian_sigma},
                    {"nlm_patch", baselines.nlm_patch},
                    {"nlm_search", baselines.nlm_search},
                    {"nlm_h", baselines.nlm_h}};
  j["thresholds"] = {{"tau_edit", thresholds.tau_edit},
                     {"tau_iat", thresholds.tau_iat},
                     {"psnr_cap", thresholds.psnr_cap},
                     {"ssim_window", thresholds.ssim_window},
                     {"ssim_c1", thresholds.ssim_c1},
                     {"ssim_c2", thresholds.ssim_c2}};
  j["eps_mc"] = eps_mc;
  j["n_seeds"] = n_seeds;
  return j.dump(2) + "\n";
}

EvalConfig EvalConfig::from_json_text(std::string_view text) {
  const json j = parse_or_throw(text, "eval config");
  EvalConfig c;
  try {
    if (j.contains("degrade"))
      c.degrade = DegradeConfig::from_json_text(j.at("degrade").dump());
    if (j.contains("baselines")) {
      const json& b = j.at("baselines");
      if (b.contains("gaussian_sigma"))
        c.baselines.gaussian_sigma = b.at("gaussian_sigma").get<double>();
      if (b.contains("nlm_patch"))
        c.baselines.nlm_patch = b.at("nlm_patch").get<int>();
      if (b.contains("nlm_search"))
        c.baselines.nlm_search = b.at("nlm_search").get<int>();
      if (b.contains("nlm_h")) c.baselines.nlm_h = b.at("nlm_h").get<double>();
    }
    if (j.contains("thresholds")) {
      const json& t = j.at("thresholds");
      if (t.contains("tau_edit"))
        c.thresholds.tau_edit = t.at("tau_edit").get<double>();
      if (t.contains("tau_iat"))
        c.thresholds.tau_iat = t.at("tau_iat").get<double>();
      if (t.contains("psnr_cap"))
        c.thresholds.psnr_cap = t.at("psnr_cap").get<double>();
      if (t.contains("ssim_window"))
        c.thresholds.ssim_window = t.at("ssim_window").get<int>();
      if (t.contains("ssim_c1"))
        c.thresholds.ssim_c1 = t.at("ssim_c1").get<double>();
      if (t.contains("ssim_c2"))
        c.thresholds.ssim_c2 = t.at("ssim_c2").get<double>();
    }
    if (j.contains("eps_mc")) c.eps_mc = j.at("eps_mc").get<double>();
    if (j.contains("n_seeds")) c.n_seeds = j.at("n_seeds").get<int>();
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad eval config: ") + ex.what());
  }
  c.validate();
  return c;
}

const char* stability_class_name(StabilityClass c) {
  switch (c) {
    case StabilityClass::StablyPositive: return "stably_positive";
    case StabilityClass::NoiseSensitive: return "noise_sensitive";
    case StabilityClass::Neutral: return "neutral";
    case StabilityClass::StablyNegative: return "stably_negative";
  }
  throw DataError("unknown stability class");
}

StabilityClass classify_case(const std::vector<double>& gains, double eps_mc) {
  if (gains.empty()) throw DataError("cannot classify a case with no runs");
  bool all_pos = true, all_neg = true, all_band = true;
  for (double g : gains) {
    all_pos = all_pos && g > eps_mc;
    all_neg = all_neg && g < -eps_mc;
    all_band = all_band && std::abs(g) <= eps_mc;
  }
  if (all_pos) return StabilityClass::StablyPositive;
  if (all_neg) return StabilityClass::StablyNegative;
  if (all_band) return StabilityClass::Neutral;
  return StabilityClass::NoiseSensitive;
}

MatrixReport run_recovery_matrix_with(
    const std::string& corpus_dir, const CaseRestorer& bounded,
    const std::vector<std::string>& train_case_ids, const EvalConfig& cfg,
    uint64_t seed) {
  cfg.validate();
  const CorpusManifest m = load_kind(corpus_dir, "phantom");
  check_disjoint(m, train_case_ids);

  const size_t n_cases = m.cases.size();
  const size_t n_methods = kMatrixMethods.size();
  std::vector<CaseMetrics> slots(n_cases * n_methods);
  parallel_for(n_cases, [&](size_t i) {
    const CorpusCaseEntry& e = m.cases[i];
    const PhantomCaseFiles files = load_phantom_case(corpus_dir, e);
    const uint64_t rseed = rng::derive_seed(seed, e.case_id, 0);
    const DegradationRecipe recipe = sample_recipe(cfg.degrade, rseed);
    const Volume degraded = apply_recipe(files.clean, recipe);

    const Volume smoothed =
        gaussian_baseline_volume(degraded, cfg.baselines.gaussian_sigma);
    const Volume nlm = nlm_baseline_volume(degraded, cfg.baselines);
    const Volume restored = bounded(degraded, files);
    const std::array<const Volume*, 4> outs = {&degraded, &smoothed, &nlm,
                                               &restored};
    for (size_t k = 0; k < n_methods; ++k) {
      CaseMetrics cm = case_metrics_for_volume(*outs[k], degraded, files.clean,
                                               files.target, cfg.thresholds);
      cm.case_id = e.case_id;
      cm.seed = rseed;
      cm.method = std::string(kMatrixMethods[k]);
      slots[i * n_methods + k] = std::move(cm);
    }
  });

  MatrixReport rep;
  rep.case_count = int(n_cases);
  rep.rows = std::move(slots);
  for (size_t k = 0; k < n_methods; ++k) {
    MethodAggregate agg;
    agg.method = std::string(kMatrixMethods[k]);
    double g = 0, g2 = 0, p = 0, p2 = 0, fm = 0, ff = 0;
    uint64_t flagged = 0;
    for (size_t i = 0; i < n_cases; ++i) {
      const CaseMetrics& cm = rep.rows[i * n_methods + k];
      g += cm.target_gain;
      g2 += cm.target_gain * cm.target_gain;
      p += cm.psnr_db;
      p2 += cm.psnr_db * cm.psnr_db;
      fm += cm.footprint_max;
      ff += cm.footprint_fraction;
      flagged += cm.iatrogenic ? 1 : 0;
    }
    const double inv = 1.0 / double(n_cases);
    agg.mean_target_gain = g * inv;
    agg.std_target_gain = pop_std(agg.mean_target_gain, g2 * inv);
    agg.mean_psnr_db = p * inv;
    agg.std_psnr_db = pop_std(agg.mean_psnr_db, p2 * inv);
    agg.iatrogenic_rate = double(flagged) * inv;
    agg.mean_footprint_max = fm * inv;
    agg.mean_footprint_fraction = ff * inv;
    rep.aggregates.push_back(std::move(agg));
  }

  std::vector<CaseMetrics> bounded_rows, gaussian_rows;
  for (size_t i = 0; i < n_cases; ++i) {
    gaussian_rows.push_back(rep.rows[i * n_methods + 1]);
    bounded_rows.push_back(rep.rows[i * n_methods + 3]);
  }
  rep.bounded_vs_gaussian = paired_comparison(bounded_rows, gaussian_rows);
  return rep;
}

MatrixReport run_recovery_matrix(const std::string& corpus_dir,
                                 const Checkpoint& ckpt, const EvalConfig& cfg,
                                 uint64_t seed) {
  return run_recovery_matrix_with(corpus_dir, model_restorer(ckpt.params),
                                  ckpt.meta.train_case_ids, cfg, seed);
}

PairedReport paired_comparison(const std::vector<CaseMetrics>& rows_a,
                               const std::vector<CaseMetrics>& rows_b) {
  if (rows_a.empty() || rows_a.size() != rows_b.size())
    throw DataError("paired comparison needs two equal non-empty row sets");
  PairedReport rep;
  rep.method_a = rows_a.front().method;
  rep.method_b = rows_b.front().method;
  double dg = 0, dp = 0;
  for (size_t i = 0; i < rows_a.size(); ++i) {
    const CaseMetrics& a = rows_a[i];
    const CaseMetrics& b = rows_b[i];
    if (a.case_id != b.case_id || a.seed != b.seed)
      throw DataError("paired rows disagree at index " + std::to_string(i) +
                      ": " + a.case_id + " vs " + b.case_id);
    PairedRow r;
    r.case_id = a.case_id;
    r.delta_target_gain = a.target_gain - b.target_gain;
    r.delta_psnr_db = a.psnr_db - b.psnr_db;
    if (r.delta_target_gain > 0) ++rep.wins;
    if (r.delta_target_gain == 0) ++rep.ties;
    dg += r.delta_target_gain;
    dp += r.delta_psnr_db;
    rep.rows.push_back(std::move(r));
  }
  const double inv = 1.0 / double(rows_a.size());
  rep.win_rate_target_gain = double(rep.wins) * inv;
  rep.delta_target_gain = dg * inv;
  rep.delta_psnr_db = dp * inv;
  return rep;
}

StabilityReport mc_stability_with(const std::string& corpus_dir,
                                  const CaseRestorer& bounded,
                                  const EvalConfig& cfg, uint64_t seed) {
  cfg.validate();
  const CorpusManifest m = load_kind(corpus_dir, "phantom");

  const size_t n_cases = m.cases.size();
  std::vector<StabilityCaseRow> rows(n_cases);
  std::vector<uint64_t> positives(n_cases, 0);
  parallel_for(n_cases, [&](size_t i) {
    const CorpusCaseEntry& e = m.cases[i];
    const PhantomCaseFiles files = load_phantom_case(corpus_dir, e);
    StabilityCaseRow row;
    row.case_id = e.case_id;
    for (int s = 0; s < cfg.n_seeds; ++s) {
      const uint64_t rseed = rng::derive_seed(seed, e.case_id, uint64_t(s));
      const Volume degraded =
          apply_recipe(files.clean, sample_recipe(cfg.degrade, rseed));
      const Volume restored = bounded(degraded, files);
      const CaseMetrics cm = case_metrics_for_volume(
          restored, degraded, files.clean, files.target, cfg.thresholds);
      row.gains.push_back(cm.target_gain);
      if (cm.target_gain > 0) ++positives[i];
    }
    row.cls = classify_case(row.gains, cfg.eps_mc);
    rows[i] = std::move(row);
  });

  StabilityReport rep;
  rep.n_seeds = cfg.n_seeds;
  rep.rows = std::move(rows);
  rep.total_runs = uint64_t(n_cases) * uint64_t(cfg.n_seeds);
  for (size_t i = 0; i < n_cases; ++i) {
    rep.positive_runs += positives[i];
    ++rep.class_counts[size_t(rep.rows[i].cls)];
  }
  rep.run_positive_rate = double(rep.positive_runs) / double(rep.total_runs);
  return rep;
}

StabilityReport mc_stability(const std::string& corpus_dir,
                             const Checkpoint& ckpt, const EvalConfig& cfg,
                             uint64_t seed) {
  return mc_stability_with(corpus_dir, model_restorer(ckpt.params), cfg, seed);
}

OverlapReport overlap_analysis_with(const std::string& corpus_dir,
                                    const CaseRestorer& bounded,
                                    const EvalConfig& cfg, uint64_t seed) {
  cfg.validate();
  const CorpusManifest m = load_kind(corpus_dir, "phantom");

  const size_t n_cases = m.cases.size();
  std::vector<OverlapCaseRow> rows(n_cases);
  parallel_for(n_cases, [&](size_t i) {
    const CorpusCaseEntry& e = m.cases[i];
    const PhantomCaseFiles files = load_phantom_case(corpus_dir, e);
    const uint64_t rseed = rng::derive_seed(seed, e.case_id, 0);
    const Volume degraded =
        apply_recipe(files.clean, sample_recipe(cfg.degrade, rseed));
    const Volume restored = bounded(degraded, files);

    OverlapCaseRow row;
    row.case_id = e.case_id;
    for (int z = 0; z < degraded.depth; ++z) {
      if (files.target.slice_count_on(z) == 0) continue;
      const auto edits = meaningful_edit_mask(
          restored.slice(z), degraded.slice(z), cfg.thresholds.tau_edit);
      const auto counts =
          edit_counts_by_region(edits, files.labels.slice_data(z));
      for (size_t c = 0; c < kRegionCount; ++c) row.region_counts[c] += counts[c];
      row.evaluated_pixels += degraded.slice_pixels();
    }
    if (row.evaluated_pixels == 0)
      throw DataError("no slice carries target pixels in case " + e.case_id);
    for (size_t c = 0; c < kRegionCount; ++c) {
      row.edit_count += row.region_counts[c];
      row.region_share[c] =
          double(row.region_counts[c]) / double(row.evaluated_pixels);
    }
    row.edit_fraction = double(row.edit_count) / double(row.evaluated_pixels);
    rows[i] = std::move(row);
  });

  OverlapReport rep;
  rep.rows = std::move(rows);
  for (size_t c = 0; c < kRegionCount; ++c) {
    OverlapRegionStat& st = rep.regions[c];
    st.region = region_name(uint8_t(c));
    double acc = 0;
    for (const OverlapCaseRow& row : rep.rows) {
      acc += row.region_share[c];
      st.max_share = std::max(st.max_share, row.region_share[c]);
    }
    st.mean_share = acc / double(n_cases);
  }
  return rep;
}

OverlapReport overlap_analysis(const std::string& corpus_dir,
                               const Checkpoint& ckpt, const EvalConfig& cfg,
                               uint64_t seed) {
  return overlap_analysis_with(corpus_dir, model_restorer(ckpt.params), cfg,
                               seed);
}

ExternalReport external_eval(const std::string& corpus_dir,
                             const Checkpoint& ckpt, const EvalConfig& cfg) {
  cfg.validate();
  const CorpusManifest m = load_kind(corpus_dir, "external");

  const size_t n_cases = m.cases.size();
  const size_t n_methods = kMatrixMethods.size();
  std::vector<ExternalCaseRow> slots(n_cases * n_methods);
  parallel_for(n_cases, [&](size_t i) {
    const CorpusCaseEntry& e = m.cases[i];
    const ExternalPairFiles f = load_external_pair(corpus_dir, e);
    const double base_psnr =
        psnr_db(f.degraded, f.reference, cfg.thresholds.psnr_cap);

    const Volume smoothed =
        gaussian_baseline_volume(f.degraded, cfg.baselines.gaussian_sigma);
    const Volume nlm = nlm_baseline_volume(f.degraded, cfg.baselines);
    const Volume restored = restore_volume(f.degraded, ckpt.params);
    const std::array<const Volume*, 4> outs = {&f.degraded, &smoothed, &nlm,
                                               &restored};
    for (size_t k = 0; k < n_methods; ++k) {
      ExternalCaseRow row;
      row.case_id = e.case_id;
      row.method = std::string(kMatrixMethods[k]);
      row.psnr_db = k == 0 ? base_psnr
                           : psnr_db(*outs[k], f.reference,
                                     cfg.thresholds.psnr_cap);
      row.delta_psnr_db = row.psnr_db - base_psnr;
      row.max_modification =
          k == 0 ? 0.0 : volume_max_abs_diff(*outs[k], f.degraded);
      slots[i * n_methods + k] = std::move(row);
    }
  });

  ExternalReport rep;
  rep.case_count = int(n_cases);
  rep.rows = std::move(slots);
  for (size_t k = 0; k < n_methods; ++k) {
    ExternalMethodStat st;
    st.method = std::string(kMatrixMethods[k]);
    double p = 0, d = 0;
    for (size_t i = 0; i < n_cases; ++i) {
      const ExternalCaseRow& row = rep.rows[i * n_methods + k];
      p += row.psnr_db;
      d += row.delta_psnr_db;
      if (row.delta_psnr_db > 0) ++st.wins;
      if (row.delta_psnr_db == 0) ++st.ties;
      st.max_modification = std::max(st.max_modification, row.max_modification);
    }
    st.mean_psnr_db = p / double(n_cases);
    st.mean_delta_psnr_db = d / double(n_cases);
    st.win_rate = double(st.wins) / double(n_cases);
    rep.methods.push_back(std::move(st));
  }
  return rep;
}

}  // namespace resbound
