#include "resbound/train.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <nlohmann/json.hpp>

#include "resbound/backprop.hpp"
#include "resbound/corpus.hpp"
#include "resbound/errors.hpp"
#include "resbound/format.hpp"
#include "resbound/parallel.hpp"
#include "resbound/rng.hpp"
#include "resbound/version.hpp"

using nlohmann::json;

namespace resbound {

void TrainConfig::validate() const {
  if (steps < 1) throw DataError("train config: steps must be >= 1");
  if (batch_size < 1) throw DataError("train config: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw DataError("train config: learning_rate must be finite and >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw DataError("train config: adam betas must be in [0, 1)");
  if (!(adam.epsilon > 0.0))
    throw DataError("train config: adam epsilon must be > 0");
  if (corpus_dir.empty()) throw DataError("train config: corpus_dir is empty");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw DataError("train config: validation_fraction must be in [0, 1)");
  if (validation_interval < 1)
    throw DataError("train config: validation_interval must be >= 1");
  degrade.validate();
  weights.validate();
}

std::string TrainConfig::to_json_text() const {
  json j;
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["adam"]["beta1"] = adam.beta1;
  j["adam"]["beta2"] = adam.beta2;
  j["adam"]["epsilon"] = adam.epsilon;
  j["seed"] = seed;
  j["corpus_dir"] = corpus_dir;
  j["validation_fraction"] = validation_fraction;
  j["validation_interval"] = validation_interval;
  j["degrade"] = json::parse(degrade.to_json_text());
  j["weights"]["restore"] = weights.restore;
  j["weights"]["identity"] = weights.identity;
  j["weights"]["edit"] = weights.edit;
  j["weights"]["smooth"] = weights.smooth;
  j["weights"]["uncertainty"] = weights.uncertainty;
  return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json_text(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("invalid JSON in train config");
  TrainConfig c;
  try {
    if (j.contains("steps")) c.steps = j["steps"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("learning_rate"))
      c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("adam")) {
      const json& a = j["adam"];
      if (a.contains("beta1")) c.adam.beta1 = a["beta1"].get<double>();
      if (a.contains("beta2")) c.adam.beta2 = a["beta2"].get<double>();
      if (a.contains("epsilon")) c.adam.epsilon = a["epsilon"].get<double>();
    }
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("corpus_dir")) c.corpus_dir = j["corpus_dir"].get<std::string>();
    if (j.contains("validation_fraction"))
      c.validation_fraction = j["validation_fraction"].get<double>();
    if (j.contains("validation_interval"))
      c.validation_interval = j["validation_interval"].get<int>();
    if (j.contains("degrade"))
      c.degrade = DegradeConfig::from_json_text(j["degrade"].dump());
    if (j.contains("weights")) {
      const json& w = j["weights"];
      if (w.contains("restore")) c.weights.restore = w["restore"].get<double>();
      if (w.contains("identity")) c.weights.identity = w["identity"].get<double>();
      if (w.contains("edit")) c.weights.edit = w["edit"].get<double>();
      if (w.contains("smooth")) c.weights.smooth = w["smooth"].get<double>();
      if (w.contains("uncertainty"))
        c.weights.uncertainty = w["uncertainty"].get<double>();
    }
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad train config: ") + ex.what());
  }
  c.validate();
  return c;
}

std::string TrainingLog::to_csv() const {
  std::string out = "step,restore,identity,edit,smooth,uncertainty,total,val_restore\n";
  if (val_restore_step0) {
    out += "0,,,,,,," + format_double(*val_restore_step0) + "\n";
  }
  for (const auto& r : rows) {
    out += std::to_string(r.step);
    out += ',' + format_double(r.loss.restore);
    out += ',' + format_double(r.loss.identity);
    out += ',' + format_double(r.loss.edit);
    out += ',' + format_double(r.loss.smooth);
    out += ',' + format_double(r.loss.uncertainty);
    out += ',' + format_double(r.loss.total);
    out += ',';
    if (r.val_restore) out += format_double(*r.val_restore);
    out += '\n';
  }
  return out;
}

ModelParams init_params(uint64_t seed) {
  ModelParams p = ModelParams::make();
  for (size_t li = 0; li < p.trunk.size(); ++li) {
    auto& layer = p.trunk[li];
    rng::Stream s(seed, rng::domain::model_init, li);
    const double bound = std::sqrt(6.0 / (double(layer.in_ch) * 9.0));
    for (float& w : layer.w) w = float(s.uniform(-bound, bound));
    // biases stay zero
  }
  p.validate();
  return p;
}

namespace {

// Degrades the three window slices in place at their true volume indices, so
// the sample equals a window cut from a fully degraded volume.
TrainSample<float> make_sample(const Volume& clean, int z,
                               const DegradationRecipe& recipe) {
  const int zp = z > 0 ? z - 1 : z;
  const int zn = z + 1 < clean.depth ? z + 1 : z;
  const Image prev = apply_recipe_slice(clean.slice(zp), recipe, zp);
  const Image ctr = apply_recipe_slice(clean.slice(z), recipe, z);
  const Image next = apply_recipe_slice(clean.slice(zn), recipe, zn);

  TrainSample<float> s;
  s.input = TensorT<float>(3, clean.height, clean.width);
  std::copy(prev.pix.begin(), prev.pix.end(), s.input.plane(0));
  std::copy(ctr.pix.begin(), ctr.pix.end(), s.input.plane(1));
  std::copy(next.pix.begin(), next.pix.end(), s.input.plane(2));
  const Image target = clean.slice(z);
  s.clean.assign(target.pix.begin(), target.pix.end());
  return s;
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const CorpusManifest manifest = load_corpus_manifest(cfg.corpus_dir);
  if (manifest.kind != "phantom")
    throw DataError("training needs a phantom corpus, got kind=" + manifest.kind);

  const int count = int(manifest.cases.size());
  int n_val = int(double(count) * cfg.validation_fraction + 0.5);
  if (n_val >= count) n_val = count - 1;
  const int n_train = count - n_val;
  if (n_train < 1) throw DataError("no training cases left after validation split");

  std::vector<Volume> clean(static_cast<size_t>(count));
  parallel_for(size_t(count), [&](size_t i) {
    clean[i] = load_volume(
        case_path(cfg.corpus_dir, manifest.cases[i].case_id, "clean"));
  });
  const int depth = clean[0].depth;
  for (const auto& v : clean) {
    if (v.depth != depth || v.height != clean[0].height ||
        v.width != clean[0].width)
      throw DataError("training corpus has mixed volume shapes");
  }

  ModelParams params = init_params(cfg.seed);
  const LossWeights& w = cfg.weights;

  // Validation samples are fixed up front: one slice and one recipe per
  // validation case, so the series is comparable across steps.
  std::vector<TrainSample<float>> val_samples;
  for (int k = 0; k < n_val; ++k) {
    rng::Stream vs(cfg.seed, rng::domain::train_validation, uint64_t(k));
    const int z = vs.uniform_int(0, depth - 1);
    const uint64_t recipe_seed = vs.next_u64();
    const DegradationRecipe recipe = sample_recipe(cfg.degrade, recipe_seed);
    val_samples.push_back(make_sample(clean[size_t(n_train + k)], z, recipe));
  }
  const auto eval_validation = [&]() {
    double acc = 0.0;
    for (const auto& s : val_samples)
      acc += sample_loss_grad(params, s.input, s.clean, w).restore;
    return acc / double(val_samples.size());
  };

  TrainResult out;
  if (!val_samples.empty()) out.log.val_restore_step0 = eval_validation();

  std::vector<double> adam_m(params.param_count(), 0.0);
  std::vector<double> adam_v(params.param_count(), 0.0);

  std::vector<TrainSample<float>> batch(size_t(cfg.batch_size));
  for (int step = 1; step <= cfg.steps; ++step) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const uint64_t ordinal = uint64_t(step - 1) * cfg.batch_size + b;
      rng::Stream ps(cfg.seed, rng::domain::train_batch, ordinal);
      const int case_idx = ps.uniform_int(0, n_train - 1);
      const int z = ps.uniform_int(0, depth - 1);
      const uint64_t recipe_seed =
          rng::Stream(cfg.seed, rng::domain::train_recipe, ordinal).next_u64();
      const DegradationRecipe recipe = sample_recipe(cfg.degrade, recipe_seed);
      batch[size_t(b)] = make_sample(clean[size_t(case_idx)], z, recipe);
    }

    BatchGradients<float> bg;
    try {
      bg = batch_gradients(params, batch, w);
    } catch (const NumericError& ex) {
      throw NumericError("training diverged at step " + std::to_string(step) +
                         ": " + ex.what());
    }

    const auto pblocks = param_blocks(params);
    const auto gblocks = param_blocks(std::as_const(bg.grads));
    const double bc1 = 1.0 - std::pow(cfg.adam.beta1, double(step));
    const double bc2 = 1.0 - std::pow(cfg.adam.beta2, double(step));
    size_t k = 0;
    for (size_t bi = 0; bi < pblocks.size(); ++bi) {
      std::vector<float>& pv = *pblocks[bi];
      const std::vector<float>& gv = *gblocks[bi];
      for (size_t i = 0; i < pv.size(); ++i, ++k) {
        const double g = double(gv[i]);
        if (!std::isfinite(g))
          throw NumericError("non-finite gradient at step " + std::to_string(step));
        adam_m[k] = cfg.adam.beta1 * adam_m[k] + (1.0 - cfg.adam.beta1) * g;
        adam_v[k] = cfg.adam.beta2 * adam_v[k] + (1.0 - cfg.adam.beta2) * g * g;
        const double mhat = adam_m[k] / bc1;
        const double vhat = adam_v[k] / bc2;
        pv[i] = float(double(pv[i]) -
                      cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam.epsilon));
      }
    }

    TrainStepRow row;
    row.step = step;
    row.loss = bg.loss;
    if (!val_samples.empty() &&
        (step % cfg.validation_interval == 0 || step == cfg.steps)) {
      row.val_restore = eval_validation();
    }
    out.log.rows.push_back(std::move(row));
  }

  out.params = std::move(params);
  out.meta.tool_version = kToolVersion;
  out.meta.rng_name = std::string(rng::kGeneratorName);
  out.meta.train_case_ids = manifest.case_ids();
  out.meta.train_config_text = cfg.to_json_text();
  return out;
}

TrainResult train(const TrainConfig& cfg, const LossWeights& w) {
  TrainConfig c = cfg;
  c.weights = w;
  return train(c);
}

}  // namespace resbound
