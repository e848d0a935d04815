#include "resbound/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "resbound/errors.hpp"
#include "resbound/format.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace resbound {

namespace {

constexpr const char* kOps[] = {"mean",  "std",      "min",      "max", "sum",
                                "count", "count_eq", "count_gt", "frac_gt"};

bool known_op(const std::string& op) {
  return std::find(std::begin(kOps), std::end(kOps), op) != std::end(kOps);
}

bool op_needs_arg(const std::string& op) {
  return op == "count_eq" || op == "count_gt" || op == "frac_gt";
}

bool op_needs_column(const std::string& op) { return op != "count"; }

void check_cell(const std::string& cell, const std::string& table) {
  for (char c : cell)
    if (c == ',' || c == '"' || c == '\n' || c == '\r')
      throw DataError("table " + table + " cell needs CSV escaping: " + cell);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), std::streamsize(text.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json_file(const fs::path& path) {
  json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded())
    throw DataError("invalid JSON in " + path.string());
  return j;
}

ReportTable parse_csv(const std::string& name, const std::string& text) {
  ReportTable t;
  t.name = name;
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < text.size()) {
    const size_t nl = text.find('\n', start);
    const size_t end = nl == std::string::npos ? text.size() : nl;
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty()) throw DataError("table " + name + " is empty");
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    size_t pos = 0;
    for (;;) {
      const size_t comma = line.find(',', pos);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(pos));
        return cells;
      }
      cells.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
  };
  t.columns = split(lines[0]);
  for (size_t i = 1; i < lines.size(); ++i) t.rows.push_back(split(lines[i]));
  t.validate();
  return t;
}

size_t column_index(const ReportTable& t, const std::string& column,
                    const std::string& who) {
  const auto it = std::find(t.columns.begin(), t.columns.end(), column);
  if (it == t.columns.end())
    throw DataError(who + " references unknown column '" + column +
                    "' of table " + t.name);
  return size_t(it - t.columns.begin());
}

}  // namespace

void ReportTable::validate() const {
  if (name.empty()) throw DataError("report table needs a name");
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
      throw DataError("report table name must be a file stem: " + name);
  if (columns.empty()) throw DataError("table " + name + " has no columns");
  if (rows.empty()) throw DataError("table " + name + " has no rows");
  for (const std::string& c : columns) check_cell(c, name);
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw DataError("table " + name + " has a ragged row");
    for (const std::string& cell : row) check_cell(cell, name);
  }
}

std::string ReportTable::csv_text() const {
  std::string out;
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += columns[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

void ReportBundle::validate() const {
  if (manifest.tool_version.empty() || manifest.subcommand.empty() ||
      manifest.rng_name.empty())
    throw DataError("run manifest is missing identity fields");
  if (json::parse(manifest.config_text, nullptr, false).is_discarded())
    throw DataError("run manifest config is not valid JSON");
  if (tables.empty()) throw DataError("report bundle has no tables");

  std::set<std::string> names;
  for (const ReportTable& t : tables) {
    t.validate();
    if (!names.insert(t.name).second)
      throw DataError("duplicate table name " + t.name);
  }
  std::set<std::string> agg_names;
  for (const AggregateSpec& a : aggregates) {
    if (a.name.empty()) throw DataError("aggregate needs a name");
    if (!agg_names.insert(a.name).second)
      throw DataError("duplicate aggregate name " + a.name);
    if (!known_op(a.op))
      throw DataError("aggregate " + a.name + " has unknown op '" + a.op + "'");
    if (op_needs_arg(a.op) == a.arg.empty())
      throw DataError("aggregate " + a.name + ": op " + a.op +
                      (a.arg.empty() ? " needs an arg" : " takes no arg"));
    if (a.where_column.empty() != a.where_equals.empty())
      throw DataError("aggregate " + a.name + " has a half-specified filter");
    const auto it = std::find_if(
        tables.begin(), tables.end(),
        [&](const ReportTable& t) { return t.name == a.table; });
    if (it == tables.end())
      throw DataError("aggregate " + a.name + " references unknown table " +
                      a.table);
    if (op_needs_column(a.op)) column_index(*it, a.column, "aggregate " + a.name);
    if (!a.where_column.empty())
      column_index(*it, a.where_column, "aggregate " + a.name);
  }
}

double evaluate_aggregate(const AggregateSpec& spec, const ReportTable& table) {
  if (!known_op(spec.op))
    throw DataError("unknown aggregate op '" + spec.op + "'");
  const size_t col = op_needs_column(spec.op)
                         ? column_index(table, spec.column, "aggregate")
                         : 0;
  const size_t where_col =
      spec.where_column.empty()
          ? 0
          : column_index(table, spec.where_column, "aggregate filter");

  std::vector<const std::string*> cells;
  for (const auto& row : table.rows) {
    if (!spec.where_column.empty() && row[where_col] != spec.where_equals)
      continue;
    cells.push_back(&row[col]);
  }

  if (spec.op == "count") return double(cells.size());
  if (spec.op == "count_eq") {
    size_t n = 0;
    for (const std::string* c : cells) n += *c == spec.arg ? 1 : 0;
    return double(n);
  }
  if (spec.op == "count_gt" || spec.op == "frac_gt") {
    if (spec.op == "frac_gt" && cells.empty())
      throw DataError("aggregate " + spec.name + " has no rows to average");
    const double threshold = parse_double(spec.arg);
    size_t n = 0;
    for (const std::string* c : cells) n += parse_double(*c) > threshold;
    if (spec.op == "count_gt") return double(n);
    return double(n) / double(cells.size());
  }

  if (cells.empty())
    throw DataError("aggregate " + spec.name + " has no rows to reduce");
  double sum = 0, sumsq = 0;
  double lo = parse_double(*cells.front());
  double hi = lo;
  for (const std::string* c : cells) {
    const double v = parse_double(*c);
    sum += v;
    sumsq += v * v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double n = double(cells.size());
  if (spec.op == "sum") return sum;
  if (spec.op == "min") return lo;
  if (spec.op == "max") return hi;
  if (spec.op == "mean") return sum / n;
  const double mean = sum / n;  // std
  return std::sqrt(std::max(0.0, sumsq / n - mean * mean));
}

void emit_report(const ReportBundle& bundle, const std::string& out_dir) {
  bundle.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir + ": " + ec.message());

  std::vector<std::pair<std::string, std::string>> outputs;
  for (const ReportTable& t : bundle.tables) {
    const std::string text = t.csv_text();
    const std::string file = t.name + ".csv";
    write_text(fs::path(out_dir) / file, text);
    outputs.emplace_back(file, sha256_hex(text.data(), text.size()));
  }

  json summary;
  summary["aggregates"] = json::array();
  for (const AggregateSpec& a : bundle.aggregates) {
    const auto it = std::find_if(
        bundle.tables.begin(), bundle.tables.end(),
        [&](const ReportTable& t) { return t.name == a.table; });
    json entry;
    entry["name"] = a.name;
    entry["table"] = a.table;
    entry["op"] = a.op;
    if (op_needs_column(a.op)) entry["column"] = a.column;
    if (!a.where_column.empty()) {
      entry["where_column"] = a.where_column;
      entry["where_equals"] = a.where_equals;
    }
    if (!a.arg.empty()) entry["arg"] = a.arg;
    entry["value"] = evaluate_aggregate(a, *it);
    summary["aggregates"].push_back(std::move(entry));
  }
  const std::string summary_text = summary.dump(2) + "\n";
  write_text(fs::path(out_dir) / "summary.json", summary_text);
  outputs.emplace_back("summary.json",
                       sha256_hex(summary_text.data(), summary_text.size()));

  json man;
  man["tool_version"] = bundle.manifest.tool_version;
  man["subcommand"] = bundle.manifest.subcommand;
  man["base_seed"] = bundle.manifest.base_seed;
  man["rng_name"] = bundle.manifest.rng_name;
  man["config"] = json::parse(bundle.manifest.config_text);
  man["inputs"] = json::object();
  for (const auto& [label, digest] : bundle.manifest.inputs)
    man["inputs"][label] = digest;
  man["outputs"] = json::object();
  for (const auto& [file, digest] : outputs) man["outputs"][file] = digest;
  write_text(fs::path(out_dir) / "manifest.json", man.dump(2) + "\n");

  json info;
  info["wall_clock_seconds"] = bundle.manifest.wall_clock_seconds;
  write_text(fs::path(out_dir) / "run_info.json", info.dump(2) + "\n");
}

VerifyVerdict verify_report(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "manifest.json"))
    throw DataError("no manifest.json under " + dir);
  const json man = parse_json_file(root / "manifest.json");

  VerifyVerdict verdict;
  std::set<std::string> covered;
  try {
    for (const auto& [file, digest] : man.at("outputs").items()) {
      covered.insert(file);
      const std::string text = read_text(root / file);
      const std::string actual = sha256_hex(text.data(), text.size());
      if (actual != digest.get<std::string>())
        verdict.mismatches.push_back("digest mismatch for " + file);
    }
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed manifest.json: ") + ex.what());
  }

  const json summary = parse_json_file(root / "summary.json");
  if (!summary.contains("aggregates") || !summary.at("aggregates").is_array())
    throw DataError("summary.json carries no aggregate list");
  for (const json& entry : summary.at("aggregates")) {
    AggregateSpec spec;
    double stored = 0;
    try {
      spec.name = entry.at("name").get<std::string>();
      spec.table = entry.at("table").get<std::string>();
      spec.op = entry.at("op").get<std::string>();
      if (entry.contains("column"))
        spec.column = entry.at("column").get<std::string>();
      if (entry.contains("where_column")) {
        spec.where_column = entry.at("where_column").get<std::string>();
        spec.where_equals = entry.at("where_equals").get<std::string>();
      }
      if (entry.contains("arg")) spec.arg = entry.at("arg").get<std::string>();
      stored = entry.at("value").get<double>();
    } catch (const json::exception& ex) {
      throw DataError(std::string("malformed summary entry: ") + ex.what());
    }
    const std::string file = spec.table + ".csv";
    if (!covered.count(file))
      verdict.mismatches.push_back("table " + file +
                                   " is not covered by the manifest");
    const ReportTable table = parse_csv(spec.table, read_text(root / file));
    const double recomputed = evaluate_aggregate(spec, table);
    if (!(recomputed == stored))
      verdict.mismatches.push_back(
          "aggregate " + spec.name + ": stored " + format_double(stored) +
          ", recomputed " + format_double(recomputed));
  }
  return verdict;
}

std::string sha256_hex(const void* data, size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data, size) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw NumericError("SHA-256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  const std::string text = read_text(path);
  return sha256_hex(text.data(), text.size());
}

}  // namespace resbound
