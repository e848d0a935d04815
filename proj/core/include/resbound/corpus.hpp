#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resbound/degrade.hpp"
#include "resbound/phantom.hpp"
#include "resbound/volume.hpp"

namespace resbound {

// Base seeds for the shipped corpora. Disjoint so no generated geometry is
// ever shared between training, evaluation, stability, and external sets.
namespace corpus_seed {
inline constexpr uint64_t kTrain = 0x1000;
inline constexpr uint64_t kHeldOut = 0x2000;
inline constexpr uint64_t kStability = 0x3000;
inline constexpr uint64_t kExternal = 0x4000;
}  // namespace corpus_seed

struct CorpusCaseEntry {
  int index = 0;
  std::string case_id;
  uint64_t seed = 0;  // base_seed ^ index
  bool has_aneurysm = false;
  std::string recipe_json;  // external pairs: the degradation actually applied
};

struct CorpusManifest {
  std::string kind;  // "phantom" (clean/labels/target) or "external" (pairs)
  uint64_t base_seed = 0;
  PhantomSpec spec;                      // per-case seed overrides spec.seed
  std::optional<DegradeConfig> degrade;  // external corpora: sampling config
  std::vector<CorpusCaseEntry> cases;

  void validate() const;  // throws DataError
  std::string to_json_text() const;
  static CorpusManifest from_json_text(std::string_view text);

  std::vector<std::string> case_ids() const;
};

std::string corpus_manifest_path(const std::string& dir);
// File stem for one case artifact, e.g. part = "clean" -> dir/<id>_clean.
std::string case_path(const std::string& dir, const std::string& case_id,
                      const std::string& part);

// Generates count phantoms with per-case seed = base_seed ^ index and writes
// clean volume, label map, target mask, and manifest.json. Parallel per case.
CorpusManifest write_phantom_corpus(const std::string& dir,
                                    const PhantomSpec& spec, uint64_t base_seed,
                                    int count);

// External-style paired corpus: the clean phantom becomes the reference and a
// recipe sampled per case from cfg produces the degraded partner. The recipe
// lands in the manifest, so pairs are reproducible from metadata alone.
CorpusManifest write_external_corpus(const std::string& dir,
                                     const PhantomSpec& spec,
                                     const DegradeConfig& cfg,
                                     uint64_t base_seed, int count);

CorpusManifest load_corpus_manifest(const std::string& dir);

struct PhantomCaseFiles {
  Volume clean;
  LabelMap labels;
  MaskVolume target;
};
PhantomCaseFiles load_phantom_case(const std::string& dir,
                                   const CorpusCaseEntry& e);

struct ExternalPairFiles {
  Volume degraded;
  Volume reference;
};
ExternalPairFiles load_external_pair(const std::string& dir,
                                     const CorpusCaseEntry& e);

}  // namespace resbound
