#include "resbound/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "resbound/corpus.hpp"
#include "resbound/errors.hpp"
#include "resbound/format.hpp"
#include "resbound/protocol.hpp"
#include "resbound/report.hpp"
#include "resbound/rng.hpp"
#include "resbound/train.hpp"
#include "resbound/version.hpp"

namespace resbound {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string strip_artifact_suffix(std::string path) {
  for (const char* ext : {".json", ".raw"})
    if (path.size() > std::strlen(ext) &&
        path.compare(path.size() - std::strlen(ext), std::string::npos, ext) ==
            0)
      return path.substr(0, path.size() - std::strlen(ext));
  return path;
}

// Flags shared by the four evaluation subcommands.
struct EvalArgs {
  std::string corpus;
  std::string model;
  std::string config;
  std::string out;
  uint64_t seed = 0;
};

void add_eval_flags(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("--corpus", a.corpus, "corpus directory")->required();
  cmd->add_option("--model", a.model, "checkpoint path")->required();
  cmd->add_option("--config", a.config, "evaluation config JSON");
  cmd->add_option("--seed", a.seed, "base seed for degradation sampling");
  cmd->add_option("--out", a.out, "report bundle directory")->required();
}

EvalConfig load_eval_config(const std::string& path) {
  if (path.empty()) {
    EvalConfig cfg;
    cfg.validate();
    return cfg;
  }
  return EvalConfig::from_json_text(read_file(path));
}

RunManifest make_manifest(const char* subcommand, const EvalArgs& a,
                          const EvalConfig& cfg) {
  RunManifest m;
  m.tool_version = kToolVersion;
  m.subcommand = subcommand;
  m.config_text = cfg.to_json_text();
  m.base_seed = a.seed;
  m.rng_name = rng::kGeneratorName;
  m.inputs.emplace_back("corpus_manifest",
                        sha256_file(corpus_manifest_path(a.corpus)));
  const std::string base = strip_artifact_suffix(a.model);
  m.inputs.emplace_back("model_descriptor", sha256_file(base + ".json"));
  m.inputs.emplace_back("model_weights", sha256_file(base + ".raw"));
  if (!a.config.empty())
    m.inputs.emplace_back("config", sha256_file(a.config));
  return m;
}

std::string u64(uint64_t v) { return std::to_string(v); }

AggregateSpec agg(std::string name, std::string table, std::string column,
                  std::string op, std::string where_column = "",
                  std::string where_equals = "", std::string arg = "") {
  AggregateSpec s;
  s.name = std::move(name);
  s.table = std::move(table);
  s.column = std::move(column);
  s.op = std::move(op);
  s.where_column = std::move(where_column);
  s.where_equals = std::move(where_equals);
  s.arg = std::move(arg);
  return s;
}

ReportTable metrics_table(std::string name,
                          const std::vector<CaseMetrics>& rows) {
  ReportTable t;
  t.name = std::move(name);
  t.columns = {"case_id",        "seed",
               "method",         "psnr_db",
               "target_gain",    "footprint_max",
               "footprint_fraction", "meaningful_edit_count",
               "iatrogenic"};
  for (const CaseMetrics& r : rows)
    t.rows.push_back({r.case_id, u64(r.seed), r.method,
                      format_double(r.psnr_db), format_double(r.target_gain),
                      format_double(r.footprint_max),
                      format_double(r.footprint_fraction),
                      u64(r.meaningful_edit_count),
                      r.iatrogenic ? "1" : "0"});
  return t;
}

ReportBundle matrix_bundle(const MatrixReport& rep) {
  ReportBundle b;
  b.tables.push_back(metrics_table("cases", rep.rows));

  ReportTable paired;
  paired.name = "paired";
  paired.columns = {"case_id", "delta_target_gain", "delta_psnr_db"};
  for (const PairedRow& r : rep.bounded_vs_gaussian.rows)
    paired.rows.push_back({r.case_id, format_double(r.delta_target_gain),
                           format_double(r.delta_psnr_db)});
  b.tables.push_back(std::move(paired));

  for (std::string_view mv : kMatrixMethods) {
    const std::string m(mv);
    b.aggregates.push_back(agg("mean_target_gain_" + m, "cases", "target_gain",
                               "mean", "method", m));
    b.aggregates.push_back(agg("std_target_gain_" + m, "cases", "target_gain",
                               "std", "method", m));
    b.aggregates.push_back(
        agg("mean_psnr_db_" + m, "cases", "psnr_db", "mean", "method", m));
    b.aggregates.push_back(
        agg("std_psnr_db_" + m, "cases", "psnr_db", "std", "method", m));
    b.aggregates.push_back(agg("iatrogenic_rate_" + m, "cases", "iatrogenic",
                               "mean", "method", m));
    b.aggregates.push_back(agg("mean_footprint_max_" + m, "cases",
                               "footprint_max", "mean", "method", m));
    b.aggregates.push_back(agg("mean_footprint_fraction_" + m, "cases",
                               "footprint_fraction", "mean", "method", m));
  }
  b.aggregates.push_back(agg("case_count", "paired", "", "count"));
  b.aggregates.push_back(agg("bounded_vs_gaussian_win_rate", "paired",
                             "delta_target_gain", "frac_gt", "", "", "0"));
  b.aggregates.push_back(agg("bounded_vs_gaussian_wins", "paired",
                             "delta_target_gain", "count_gt", "", "", "0"));
  b.aggregates.push_back(agg("bounded_vs_gaussian_ties", "paired",
                             "delta_target_gain", "count_eq", "", "", "0"));
  b.aggregates.push_back(
      agg("mean_delta_target_gain", "paired", "delta_target_gain", "mean"));
  b.aggregates.push_back(
      agg("mean_delta_psnr_db", "paired", "delta_psnr_db", "mean"));
  return b;
}

ReportBundle stability_bundle(const StabilityReport& rep) {
  ReportBundle b;
  ReportTable runs;
  runs.name = "runs";
  runs.columns = {"case_id", "seed_index", "target_gain"};
  ReportTable cases;
  cases.name = "cases";
  cases.columns = {"case_id", "class"};
  for (const StabilityCaseRow& row : rep.rows) {
    for (size_t s = 0; s < row.gains.size(); ++s)
      runs.rows.push_back(
          {row.case_id, u64(s), format_double(row.gains[s])});
    cases.rows.push_back({row.case_id, stability_class_name(row.cls)});
  }
  b.tables.push_back(std::move(runs));
  b.tables.push_back(std::move(cases));

  b.aggregates.push_back(agg("case_count", "cases", "", "count"));
  b.aggregates.push_back(agg("total_runs", "runs", "", "count"));
  b.aggregates.push_back(
      agg("positive_runs", "runs", "target_gain", "count_gt", "", "", "0"));
  b.aggregates.push_back(
      agg("run_positive_rate", "runs", "target_gain", "frac_gt", "", "", "0"));
  for (int c = 0; c < kStabilityClassCount; ++c) {
    const std::string name = stability_class_name(StabilityClass(c));
    b.aggregates.push_back(
        agg("count_" + name, "cases", "class", "count_eq", "", "", name));
  }
  return b;
}

ReportBundle overlap_bundle(const OverlapReport& rep) {
  ReportBundle b;
  ReportTable cases;
  cases.name = "cases";
  cases.columns = {"case_id", "evaluated_pixels", "edit_count",
                   "edit_fraction"};
  for (uint8_t c = 0; c < kRegionCount; ++c)
    cases.columns.push_back(std::string(region_name(c)) + "_share");
  for (const OverlapCaseRow& row : rep.rows) {
    std::vector<std::string> cells = {row.case_id, u64(row.evaluated_pixels),
                                      u64(row.edit_count),
                                      format_double(row.edit_fraction)};
    for (double s : row.region_share) cells.push_back(format_double(s));
    cases.rows.push_back(std::move(cells));
  }
  b.tables.push_back(std::move(cases));

  b.aggregates.push_back(agg("case_count", "cases", "", "count"));
  b.aggregates.push_back(
      agg("mean_edit_fraction", "cases", "edit_fraction", "mean"));
  for (uint8_t c = 0; c < kRegionCount; ++c) {
    const std::string col = std::string(region_name(c)) + "_share";
    b.aggregates.push_back(agg("mean_" + col, "cases", col, "mean"));
    b.aggregates.push_back(agg("max_" + col, "cases", col, "max"));
  }
  return b;
}

ReportBundle external_bundle(const ExternalReport& rep) {
  ReportBundle b;
  ReportTable cases;
  cases.name = "cases";
  cases.columns = {"case_id", "method", "psnr_db", "delta_psnr_db",
                   "max_modification"};
  for (const ExternalCaseRow& r : rep.rows)
    cases.rows.push_back({r.case_id, r.method, format_double(r.psnr_db),
                          format_double(r.delta_psnr_db),
                          format_double(r.max_modification)});
  b.tables.push_back(std::move(cases));

  b.aggregates.push_back(
      agg("case_count", "cases", "", "count", "method", "degraded"));
  for (std::string_view mv : kMatrixMethods) {
    const std::string m(mv);
    b.aggregates.push_back(
        agg("mean_psnr_db_" + m, "cases", "psnr_db", "mean", "method", m));
    b.aggregates.push_back(agg("mean_delta_psnr_db_" + m, "cases",
                               "delta_psnr_db", "mean", "method", m));
    b.aggregates.push_back(agg("win_rate_" + m, "cases", "delta_psnr_db",
                               "frac_gt", "method", m, "0"));
    b.aggregates.push_back(agg("wins_" + m, "cases", "delta_psnr_db",
                               "count_gt", "method", m, "0"));
    b.aggregates.push_back(agg("ties_" + m, "cases", "delta_psnr_db",
                               "count_eq", "method", m, "0"));
    b.aggregates.push_back(agg("max_modification_" + m, "cases",
                               "max_modification", "max", "method", m));
  }
  return b;
}

int run_eval(const char* name, const EvalArgs& a) {
  const EvalConfig cfg = load_eval_config(a.config);
  const Checkpoint ckpt = load_checkpoint(a.model);
  const auto t0 = std::chrono::steady_clock::now();

  ReportBundle bundle;
  if (std::string_view(name) == "eval-matrix")
    bundle = matrix_bundle(run_recovery_matrix(a.corpus, ckpt, cfg, a.seed));
  else if (std::string_view(name) == "mc-stability")
    bundle = stability_bundle(mc_stability(a.corpus, ckpt, cfg, a.seed));
  else if (std::string_view(name) == "overlap")
    bundle = overlap_bundle(overlap_analysis(a.corpus, ckpt, cfg, a.seed));
  else
    bundle = external_bundle(external_eval(a.corpus, ckpt, cfg));

  bundle.manifest = make_manifest(name, a, cfg);
  bundle.manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  emit_report(bundle, a.out);
  std::cout << name << ": bundle written to " << a.out << "\n";
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"residual-bounded CT restoration toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  struct {
    std::string spec, out, degrade_config;
    uint64_t seed = 0;
    int count = 0;
    bool external = false;
  } ph;
  CLI::App* phantom = app.add_subcommand(
      "phantom", "generate a synthetic head corpus with labels and targets");
  phantom->add_option("--spec", ph.spec, "phantom geometry JSON");
  phantom->add_option("--out", ph.out, "corpus directory")->required();
  phantom->add_option("--count", ph.count, "number of cases")->required();
  phantom->add_option("--seed", ph.seed, "corpus base seed");
  phantom->add_flag("--external", ph.external,
                    "write degraded/reference pairs instead of a training corpus");
  phantom->add_option("--degrade-config", ph.degrade_config,
                      "degradation config for --external pairs");

  struct {
    std::string in, out, recipe, config;
    uint64_t sample_seed = 0;
  } dg;
  CLI::App* degrade = app.add_subcommand(
      "degrade", "apply or sample a degradation recipe on a volume");
  degrade->add_option("--in", dg.in, "input volume")->required();
  degrade->add_option("--out", dg.out, "output volume")->required();
  CLI::Option* dg_recipe =
      degrade->add_option("--recipe", dg.recipe, "recipe JSON to apply");
  CLI::Option* dg_seed = degrade->add_option(
      "--sample-seed", dg.sample_seed, "sample a fresh recipe from this seed");
  degrade->add_option("--config", dg.config,
                      "sampling config JSON for --sample-seed");
  dg_recipe->excludes(dg_seed);

  struct {
    std::string config, out;
  } tr;
  CLI::App* train_cmd =
      app.add_subcommand("train", "fit the bounded restorer on a corpus");
  train_cmd->add_option("--config", tr.config, "training config JSON")
      ->required();
  train_cmd->add_option("--out", tr.out, "checkpoint path")->required();

  struct {
    std::string model, in, out, emit_maps;
  } rs;
  CLI::App* restore_cmd =
      app.add_subcommand("restore", "run the restorer over a volume");
  restore_cmd->add_option("--model", rs.model, "checkpoint path")->required();
  restore_cmd->add_option("--in", rs.in, "input volume")->required();
  restore_cmd->add_option("--out", rs.out, "restored volume")->required();
  restore_cmd->add_option("--emit-maps", rs.emit_maps,
                          "directory for residual/edit/uncertainty maps");

  EvalArgs em, ms, ov, ex;
  CLI::App* eval_matrix = app.add_subcommand(
      "eval-matrix", "recovery matrix over a held-out corpus");
  add_eval_flags(eval_matrix, em);
  CLI::App* mc = app.add_subcommand(
      "mc-stability", "per-case gain stability across repeated degradations");
  add_eval_flags(mc, ms);
  CLI::App* overlap_cmd = app.add_subcommand(
      "overlap", "anatomical placement of meaningful edits");
  add_eval_flags(overlap_cmd, ov);
  CLI::App* external_cmd = app.add_subcommand(
      "external-eval", "score shipped degraded/reference pairs");
  add_eval_flags(external_cmd, ex);

  std::string verify_in;
  CLI::App* verify = app.add_subcommand(
      "verify-report", "recheck digests and aggregates of a bundle");
  verify->add_option("--in", verify_in, "bundle directory")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (phantom->parsed()) {
      const PhantomSpec spec = ph.spec.empty()
                                   ? PhantomSpec{}
                                   : PhantomSpec::from_json_text(read_file(ph.spec));
      if (ph.external) {
        const DegradeConfig cfg =
            ph.degrade_config.empty()
                ? DegradeConfig::external_noise_defaults()
                : DegradeConfig::from_json_text(read_file(ph.degrade_config));
        write_external_corpus(ph.out, spec, cfg, ph.seed, ph.count);
        std::cout << "wrote " << ph.count << " degraded/reference pairs to "
                  << ph.out << "\n";
      } else {
        write_phantom_corpus(ph.out, spec, ph.seed, ph.count);
        std::cout << "wrote " << ph.count << " phantom cases to " << ph.out
                  << "\n";
      }
      return 0;
    }
    if (degrade->parsed()) {
      if (dg_recipe->count() == 0 && dg_seed->count() == 0) {
        std::cerr << "degrade needs either --recipe or --sample-seed\n";
        return 1;
      }
      const Volume v = load_volume(dg.in);
      DegradationRecipe recipe;
      if (dg_recipe->count() > 0) {
        recipe = DegradationRecipe::from_json_text(read_file(dg.recipe));
      } else {
        const DegradeConfig cfg =
            dg.config.empty() ? DegradeConfig{}
                              : DegradeConfig::from_json_text(read_file(dg.config));
        recipe = sample_recipe(cfg, dg.sample_seed);
        const std::string rpath = strip_artifact_suffix(dg.out) + "_recipe.json";
        std::ofstream rout(rpath, std::ios::binary | std::ios::trunc);
        const std::string rtext = recipe.to_json_text();
        rout.write(rtext.data(), std::streamsize(rtext.size()));
        if (!rout) throw DataError("cannot write " + rpath);
      }
      save_volume(apply_recipe(v, recipe), dg.out);
      std::cout << "degraded volume written to " << dg.out << "\n";
      return 0;
    }
    if (train_cmd->parsed()) {
      const TrainConfig cfg = TrainConfig::from_json_text(read_file(tr.config));
      const TrainResult result = train(cfg);
      save_checkpoint(result.params, result.meta, tr.out);
      const std::string log_path = strip_artifact_suffix(tr.out) + "_log.csv";
      std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
      const std::string text = result.log.to_csv();
      log.write(text.data(), std::streamsize(text.size()));
      if (!log) throw DataError("cannot write " + log_path);
      std::cout << "checkpoint written to " << tr.out << " (" << cfg.steps
                << " steps)\n";
      return 0;
    }
    if (restore_cmd->parsed()) {
      const Checkpoint ckpt = load_checkpoint(rs.model);
      const Volume v = load_volume(rs.in);
      RestorationMaps maps;
      const bool want_maps = !rs.emit_maps.empty();
      const Volume restored =
          restore_volume(v, ckpt.params, want_maps ? &maps : nullptr);
      save_volume(restored, rs.out);
      if (want_maps) {
        std::error_code ec;
        std::filesystem::create_directories(rs.emit_maps, ec);
        if (ec)
          throw DataError("cannot create " + rs.emit_maps + ": " + ec.message());
        const std::filesystem::path dir(rs.emit_maps);
        save_map_volume(maps.residual, (dir / "residual").string());
        save_map_volume(maps.edit_map, (dir / "edit_map").string());
        save_map_volume(maps.uncertainty, (dir / "uncertainty").string());
        save_map_volume(maps.applied_edit, (dir / "applied_edit").string());
      }
      std::cout << "restored volume written to " << rs.out << "\n";
      return 0;
    }
    if (eval_matrix->parsed()) return run_eval("eval-matrix", em);
    if (mc->parsed()) return run_eval("mc-stability", ms);
    if (overlap_cmd->parsed()) return run_eval("overlap", ov);
    if (external_cmd->parsed()) return run_eval("external-eval", ex);
    if (verify->parsed()) {
      const VerifyVerdict verdict = verify_report(verify_in);
      if (verdict.clean()) {
        std::cout << "bundle consistent: " << verify_in << "\n";
        return 0;
      }
      for (const std::string& m : verdict.mismatches)
        std::cerr << "mismatch: " << m << "\n";
      return 2;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args));
}

}  // namespace resbound
