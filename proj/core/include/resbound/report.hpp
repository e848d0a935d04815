#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace resbound {

// Everything needed to rerun a command bit-exactly on the same build, minus
// wall clock. Digests are SHA-256 hex.
struct RunManifest {
  std::string tool_version;
  std::string subcommand;
  std::string config_text;  // resolved JSON, every default materialized
  uint64_t base_seed = 0;
  std::string rng_name;
  std::vector<std::pair<std::string, std::string>> inputs;   // label -> digest
  std::vector<std::pair<std::string, std::string>> outputs;  // file -> digest
  double wall_clock_seconds = 0.0;  // volatile; emitted to run_info.json only
};

// One CSV payload. Cells are stored preformatted so emission is a plain join;
// commas, quotes and newlines inside cells are rejected rather than escaped.
struct ReportTable {
  std::string name;  // file stem: "cases" -> cases.csv
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void validate() const;  // throws DataError
  std::string csv_text() const;
};

// A summary statistic defined entirely in terms of one table, so a verifier
// can recompute it from the CSV alone. Rows are first filtered by
// where_column == where_equals (string-exact) when where_column is set.
//   mean, std, min, max, sum : numeric ops over `column`
//   count                    : filtered row count; `column` ignored
//   count_eq                 : cells string-equal to `arg`
//   count_gt, frac_gt        : cells numerically above parse_double(arg)
struct AggregateSpec {
  std::string name;
  std::string table;
  std::string column;
  std::string op;
  std::string where_column;
  std::string where_equals;
  std::string arg;
};

struct ReportBundle {
  RunManifest manifest;
  std::vector<ReportTable> tables;
  std::vector<AggregateSpec> aggregates;

  void validate() const;  // throws DataError
};

// Recomputes one summary value from table cells. Both emission and
// verification go through here, so the two can only disagree when the files
// changed underneath. Throws DataError on unknown ops/columns or an empty
// selection where a mean is required.
double evaluate_aggregate(const AggregateSpec& spec, const ReportTable& table);

// Writes <table>.csv per table, summary.json, manifest.json (with output
// digests), and run_info.json (wall clock; excluded from digests). Emission
// is byte-deterministic for a fixed bundle.
void emit_report(const ReportBundle& bundle, const std::string& out_dir);

struct VerifyVerdict {
  std::vector<std::string> mismatches;
  bool clean() const { return mismatches.empty(); }
};

// Recomputes every output digest and every summary aggregate of an emitted
// bundle. Missing or unreadable files throw; inconsistencies are collected.
VerifyVerdict verify_report(const std::string& dir);

std::string sha256_hex(const void* data, size_t size);
std::string sha256_file(const std::string& path);

}  // namespace resbound
