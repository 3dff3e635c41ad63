#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "io.hpp"
#include "model.hpp"

namespace geoconcept {

struct TrainStepRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double total = 0.0;
  double infonce = 0.0;
  double divergence = 0.0;
  double tau = 0.0;
  double grad_norm_location = 0.0;
  double grad_norm_other = 0.0;

  friend bool operator==(const TrainStepRecord&, const TrainStepRecord&) = default;
};

struct TrainRecord {
  std::vector<TrainStepRecord> steps;

  CsvTable to_csv() const;
  friend bool operator==(const TrainRecord&, const TrainRecord&) = default;
};

struct TrainOptions {
  // Stop once the global step counter reaches this value (for resumable runs).
  std::optional<std::uint64_t> stop_at_step;
};

struct TrainResult {
  ModelState state;
  TrainRecord record;
  std::vector<std::string> warnings;
};

// Batches per epoch after the drop-last rule. A dataset smaller than one
// batch trains on a single full-dataset batch.
std::size_t steps_per_epoch(std::size_t dataset_size, const TrainConfig& config);

// Continues optimizing `state` until config.epochs complete (or stop_at_step).
// The batch order of epoch e depends only on (seed, e), so a run resumed from
// any step reproduces the uninterrupted run.
TrainResult train(const ImageDataset& dataset, ModelState state, const TrainOptions& options = {});

TrainResult train(const ImageDataset& dataset, const ConceptSet& concepts,
                  const ModelArchitecture& arch, const TrainConfig& config,
                  const TrainOptions& options = {});

// One bias-corrected Adam update with per-group learning rates; log_tau is
// clamped to [log 1e-3, log 100] afterwards and the step counter advances.
void adam_step(ModelState& state, const ModelParams& grads);

CheckpointBlob checkpoint_blob(const ModelState& state);
ModelState model_from_blob(const CheckpointBlob& blob);
void save_checkpoint(const ModelState& state, const fs::path& path);
ModelState load_checkpoint(const fs::path& path);

// Bitwise equality of every serialized field.
bool states_identical(const ModelState& a, const ModelState& b);

}  // namespace geoconcept
