#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resbound/degrade.hpp"
#include "resbound/loss.hpp"
#include "resbound/model.hpp"

namespace resbound {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  int steps = 5000;
  int batch_size = 2;
  double learning_rate = 1e-3;  // 0 allowed: degenerate no-update run
  AdamConfig adam;
  uint64_t seed = 1;
  std::string corpus_dir;
  double validation_fraction = 0.1;  // trailing cases; 0 disables validation
  int validation_interval = 500;
  DegradeConfig degrade;
  LossWeights weights;

  void validate() const;  // throws DataError
  std::string to_json_text() const;  // every default materialized
  static TrainConfig from_json_text(std::string_view text);
};

struct TrainStepRow {
  int step = 0;  // 1-based
  LossBreakdown loss;
  std::optional<double> val_restore;  // filled every validation_interval steps
};

struct TrainingLog {
  // Validation restore term before the first update; the reference every
  // later validation value is compared against.
  std::optional<double> val_restore_step0;
  std::vector<TrainStepRow> rows;

  std::string to_csv() const;
};

struct TrainResult {
  ModelParams params;
  TrainingLog log;
  CheckpointMeta meta;  // corpus case ids + resolved config, checkpoint-ready
};

// He-uniform trunk from the model-init stream; heads all zero, so the fresh
// model is the exact identity restorer.
ModelParams init_params(uint64_t seed);

// Adam loop over full-slice samples with fresh per-sample degradation
// recipes. Single-threaded; same (cfg) twice gives bitwise-equal params.
TrainResult train(const TrainConfig& cfg);
// Same, with the weights overriding cfg.weights.
TrainResult train(const TrainConfig& cfg, const LossWeights& w);

}  // namespace resbound
