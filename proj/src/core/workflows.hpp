#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "io.hpp"

namespace geoconcept {

// Outcome of one CLI workflow: files written plus human-readable lines.
struct WorkflowReport {
  std::vector<std::string> messages;
  std::vector<std::string> warnings;
  std::vector<fs::path> outputs;
  std::vector<double> fractions;  // eval only
};

// Every workflow writes stamp.json (command, config hash, seed, code version)
// and config.json (the effective configuration) into its output directory.
const char* code_version();

struct SimulateRequest {
  fs::path out_dir;
};
WorkflowReport run_simulate(const RunConfig& cfg, const SimulateRequest& req);

struct TrainRequest {
  fs::path concepts;  // prefix of a concept_set GEMB + manifest pair
  fs::path data;      // prefix of an image_embeddings pair with lat/lon
  fs::path out_dir;
  std::optional<fs::path> resume;  // checkpoint to continue from
  std::optional<std::uint64_t> stop_at_step;
};
WorkflowReport run_train(const RunConfig& cfg, const TrainRequest& req);

struct EvalRequest {
  fs::path checkpoint;
  fs::path test;  // rows sharing a manifest view_of entry are views of one image
  fs::path out_dir;
  std::optional<fs::path> gallery;  // manifest prefix whose lat/lon become the gallery
  std::optional<fs::path> train;    // training pair whose coordinates join the gallery
};
WorkflowReport run_eval(const RunConfig& cfg, const EvalRequest& req);

struct ExplainRequest {
  fs::path checkpoint;
  fs::path embeddings;
  fs::path out_dir;
  std::optional<fs::path> errors;  // eval_items.csv from an eval run
  std::optional<fs::path> labels;  // CSV with id,label columns
};
WorkflowReport run_explain(const RunConfig& cfg, const ExplainRequest& req);

struct MapRequest {
  fs::path checkpoint;
  std::string concept_name;
  fs::path out_dir;
  std::optional<fs::path> points;  // CSV with lat,lon[,region]
  double grid_deg = 5.0;           // used when no points file is given
  bool use_basis = false;
};
WorkflowReport run_map(const RunConfig& cfg, const MapRequest& req);

enum class ProbeFeatures { kImage, kLocation, kFused };
ProbeFeatures probe_features_from_name(const std::string& name);

struct ProbeRequest {
  fs::path checkpoint;
  fs::path embeddings;
  fs::path task;  // CSV with id and target columns
  fs::path out_dir;
  std::string target_column = "target";
  bool classification = false;
  ProbeFeatures features = ProbeFeatures::kImage;
};
WorkflowReport run_probe(const RunConfig& cfg, const ProbeRequest& req);

struct TemplateRequest {
  fs::path out_prefix;
  ManifestKind kind = ManifestKind::kImageEmbeddings;
  std::size_t dim = 512;
};
WorkflowReport run_export_template(const TemplateRequest& req);

}  // namespace geoconcept
