#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "io.hpp"
#include "model.hpp"
#include "probe.hpp"
#include "synthworld.hpp"

namespace geoconcept {

struct EvalConfig {
  std::vector<double> thresholds_km{1.0, 25.0, 200.0, 750.0, 2500.0};
};

struct GalleryConfig {
  double grid_deg = 5.0;         // 0 disables the sphere grid
  bool include_train = true;     // add every training coordinate
};

struct InterpretConfig {
  std::size_t k_top = 20;
  std::size_t min_support = 5;
  std::size_t table_n = 8;       // top-n and lowest-n per bin
  std::size_t sankey_top = 5;
  std::size_t clusters = 8;
  std::size_t kmeans_max_iter = 300;
};

// Everything a CLI run can be configured with. JSON keys mirror the field
// names, grouped in the sections below.
struct RunConfig {
  TrainConfig train;
  ModelArchitecture model;
  std::vector<std::string> concepts;  // selected names; empty = all
  EvalConfig eval;
  GalleryConfig gallery;
  WorldSpec world;
  InterpretConfig interpret;
  ProbeConfig probe;
};

Json run_config_to_json(const RunConfig& cfg);
// Strict: unknown keys and wrong value types are rejected.
RunConfig run_config_from_json(const Json& j);
// Applies `patch` onto the defaults.
RunConfig load_run_config(const fs::path& path);
// key like "train.batch_size"; the value text is parsed as JSON, falling back
// to a plain string.
void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value);
std::uint64_t config_hash(const RunConfig& cfg);

Json architecture_to_json(const ModelArchitecture& a);
ModelArchitecture architecture_from_json(const Json& j);
Json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);
Json world_spec_to_json(const WorldSpec& w);
WorldSpec world_spec_from_json(const Json& j);

}  // namespace geoconcept
