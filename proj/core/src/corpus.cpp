#include "resbound/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "resbound/errors.hpp"
#include "resbound/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace resbound {

namespace {

json parse_or_throw(std::string_view text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError(std::string("invalid JSON in ") + what);
  return j;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return text;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
  if (!out) throw DataError("short write to " + p.string());
}

}  // namespace

void CorpusManifest::validate() const {
  if (kind != "phantom" && kind != "external")
    throw DataError("corpus kind must be phantom or external: " + kind);
  if (kind == "external" && !degrade)
    throw DataError("external corpus manifest is missing its degrade config");
  spec.validate();
  if (degrade) degrade->validate();
  if (cases.empty()) throw DataError("corpus manifest lists no cases");
  std::set<std::string> ids;
  for (const auto& c : cases) {
    if (c.case_id.empty()) throw DataError("corpus case with empty case_id");
    if (!ids.insert(c.case_id).second)
      throw DataError("duplicate case_id in corpus: " + c.case_id);
    if (kind == "external" && c.recipe_json.empty())
      throw DataError("external corpus case without a recipe: " + c.case_id);
  }
}

std::string CorpusManifest::to_json_text() const {
  json j;
  j["kind"] = kind;
  j["base_seed"] = base_seed;
  j["count"] = cases.size();
  j["spec"] = parse_or_throw(spec.to_json_text(), "phantom spec");
  if (degrade)
    j["degrade"] = parse_or_throw(degrade->to_json_text(), "degrade config");
  j["cases"] = json::array();
  for (const auto& c : cases) {
    json e;
    e["index"] = c.index;
    e["case_id"] = c.case_id;
    e["seed"] = c.seed;
    e["has_aneurysm"] = c.has_aneurysm;
    if (!c.recipe_json.empty())
      e["recipe"] = parse_or_throw(c.recipe_json, "case recipe");
    j["cases"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

CorpusManifest CorpusManifest::from_json_text(std::string_view text) {
  const json j = parse_or_throw(text, "corpus manifest");
  CorpusManifest m;
  try {
    m.kind = j.at("kind").get<std::string>();
    m.base_seed = j.at("base_seed").get<uint64_t>();
    m.spec = PhantomSpec::from_json_text(j.at("spec").dump());
    if (j.contains("degrade"))
      m.degrade = DegradeConfig::from_json_text(j.at("degrade").dump());
    for (const auto& e : j.at("cases")) {
      CorpusCaseEntry c;
      c.index = e.at("index").get<int>();
      c.case_id = e.at("case_id").get<std::string>();
      c.seed = e.at("seed").get<uint64_t>();
      c.has_aneurysm = e.at("has_aneurysm").get<bool>();
      if (e.contains("recipe")) c.recipe_json = e.at("recipe").dump();
      m.cases.push_back(std::move(c));
    }
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad corpus manifest: ") + ex.what());
  }
  m.validate();
  return m;
}

std::vector<std::string> CorpusManifest::case_ids() const {
  std::vector<std::string> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(c.case_id);
  return out;
}

std::string corpus_manifest_path(const std::string& dir) {
  return (fs::path(dir) / "manifest.json").string();
}

std::string case_path(const std::string& dir, const std::string& case_id,
                      const std::string& part) {
  return (fs::path(dir) / (case_id + "_" + part)).string();
}

CorpusManifest write_phantom_corpus(const std::string& dir,
                                    const PhantomSpec& spec, uint64_t base_seed,
                                    int count) {
  spec.validate();
  if (count < 1) throw DataError("corpus needs at least one case");
  fs::create_directories(dir);

  CorpusManifest m;
  m.kind = "phantom";
  m.base_seed = base_seed;
  m.spec = spec;
  m.cases.resize(size_t(count));
  parallel_for(size_t(count), [&](size_t i) {
    PhantomSpec s = spec;
    s.seed = base_seed ^ uint64_t(i);
    const PhantomCase pc = generate_phantom(s);
    save_volume(pc.clean, case_path(dir, pc.case_id, "clean"));
    save_labels(pc.labels, case_path(dir, pc.case_id, "labels"));
    save_mask(pc.target, case_path(dir, pc.case_id, "target"));
    CorpusCaseEntry& e = m.cases[i];
    e.index = int(i);
    e.case_id = pc.case_id;
    e.seed = s.seed;
    e.has_aneurysm = pc.has_aneurysm;
  });
  write_file(corpus_manifest_path(dir), m.to_json_text());
  return m;
}

CorpusManifest write_external_corpus(const std::string& dir,
                                     const PhantomSpec& spec,
                                     const DegradeConfig& cfg,
                                     uint64_t base_seed, int count) {
  spec.validate();
  cfg.validate();
  if (count < 1) throw DataError("corpus needs at least one case");
  fs::create_directories(dir);

  CorpusManifest m;
  m.kind = "external";
  m.base_seed = base_seed;
  m.spec = spec;
  m.degrade = cfg;
  m.cases.resize(size_t(count));
  parallel_for(size_t(count), [&](size_t i) {
    PhantomSpec s = spec;
    s.seed = base_seed ^ uint64_t(i);
    const PhantomCase pc = generate_phantom(s);
    const DegradationRecipe recipe = sample_recipe(cfg, s.seed);
    const Volume degraded = apply_recipe(pc.clean, recipe);
    save_volume(pc.clean, case_path(dir, pc.case_id, "reference"));
    save_volume(degraded, case_path(dir, pc.case_id, "degraded"));
    CorpusCaseEntry& e = m.cases[i];
    e.index = int(i);
    e.case_id = pc.case_id;
    e.seed = s.seed;
    e.has_aneurysm = pc.has_aneurysm;
    e.recipe_json = recipe.to_json_text();
  });
  write_file(corpus_manifest_path(dir), m.to_json_text());
  return m;
}

CorpusManifest load_corpus_manifest(const std::string& dir) {
  const fs::path p = corpus_manifest_path(dir);
  if (!fs::exists(p)) throw DataError("corpus manifest not found: " + p.string());
  return CorpusManifest::from_json_text(read_file(p));
}

PhantomCaseFiles load_phantom_case(const std::string& dir,
                                   const CorpusCaseEntry& e) {
  PhantomCaseFiles f;
  f.clean = load_volume(case_path(dir, e.case_id, "clean"));
  f.labels = load_labels(case_path(dir, e.case_id, "labels"));
  f.target = load_mask(case_path(dir, e.case_id, "target"));
  return f;
}

ExternalPairFiles load_external_pair(const std::string& dir,
                                     const CorpusCaseEntry& e) {
  ExternalPairFiles f;
  f.degraded = load_volume(case_path(dir, e.case_id, "degraded"));
  f.reference = load_volume(case_path(dir, e.case_id, "reference"));
  if (f.degraded.depth != f.reference.depth ||
      f.degraded.height != f.reference.height ||
      f.degraded.width != f.reference.width) {
    throw DataError("external pair shape mismatch for " + e.case_id);
  }
  return f;
}

}  // namespace resbound
