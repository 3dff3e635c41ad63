#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "numkernel.hpp"

namespace geoconcept {

enum class MetricKind { kRSquared, kAccuracy };
const char* metric_kind_name(MetricKind k);

// Downstream MLP probe on frozen features. Hyperparameters come from a seeded
// random search over learning rate, depth (0-2 hidden layers) and width
// (<= 128), scored on the validation split.
struct ProbeConfig {
  std::uint64_t seed = 0;
  std::size_t trials = 6;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  std::vector<double> lr_choices{1e-3, 3e-3, 1e-2};
  std::size_t max_depth = 2;
  std::vector<std::size_t> width_choices{16, 32, 64, 128};

  void validate() const;
};

struct ProbeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded shuffle cut into train/val/test by the configured fractions.
ProbeSplit make_split(std::size_t n, const ProbeConfig& cfg);

struct ProbeHyperparams {
  double lr = 1e-3;
  std::size_t depth = 1;
  std::size_t width = 64;
};

struct ProbeResult {
  std::string task;
  MetricKind metric = MetricKind::kRSquared;
  double value = 0.0;
  ProbeHyperparams chosen;
  double validation_value = 0.0;
  std::vector<std::string> warnings;
};

// 1 - SS_res / SS_tot; zero-variance targets are an error.
double r_squared(std::span<const double> truth, std::span<const double> predicted);

ProbeResult probe_regression(const Matrix& features, std::span<const double> targets,
                             const ProbeConfig& cfg, const std::string& task = "regression");
ProbeResult probe_regression(const Matrix& features, std::span<const double> targets,
                             const ProbeSplit& split, const ProbeConfig& cfg,
                             const std::string& task = "regression");

ProbeResult probe_classification(const Matrix& features, std::span<const std::size_t> labels,
                                 const ProbeConfig& cfg, const std::string& task = "classification");
ProbeResult probe_classification(const Matrix& features, std::span<const std::size_t> labels,
                                 const ProbeSplit& split, const ProbeConfig& cfg,
                                 const std::string& task = "classification");

// Image block first, then the location block.
Matrix concat_features(const Matrix& image_block, const Matrix& location_block);

}  // namespace geoconcept
