#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "concepts.hpp"
#include "encoder.hpp"
#include "geo.hpp"
#include "losses.hpp"

namespace geoconcept {

struct ModelArchitecture {
  LocationEncoderConfig location_encoder;
  std::vector<std::size_t> image_hidden{256};
  Activation image_activation = Activation::kRelu;
};

struct TrainConfig {
  double lr_location_encoder = 3e-5;
  double lr_other = 3e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool drop_last = true;
  LossConfig loss;
  KernelConfig kernel;

  void validate() const;
};

enum class ParamGroup { kLocationEncoder, kOther };

// Every trainable tensor of the alignment model. Fourier frequencies inside
// the location encoder are fixed and never enumerated as parameters.
struct ModelParams {
  LocationEncoderParams location_encoder;
  MlpParams image_projector;  // f_img: d -> hidden -> k
  Matrix delta;               // d x k offset added to the frozen concept basis
  Matrix log_tau;             // 1 x 1

  double tau() const;
  ModelParams zeros_like() const;
};

struct ParamView {
  std::string name;
  ParamGroup group;
  Matrix* value;
};

struct ConstParamView {
  std::string name;
  ParamGroup group;
  const Matrix* value;
};

// Fixed enumeration order: encoder branches, f_img layers, delta, log_tau.
std::vector<ParamView> param_views(ModelParams& p);
std::vector<ConstParamView> param_views(const ModelParams& p);
std::size_t param_count(const ModelParams& p);

struct ModelState {
  ModelArchitecture arch;
  TrainConfig config;
  ConceptSet concepts;
  ModelParams params;
  ModelParams adam_m;
  ModelParams adam_v;
  std::uint64_t step = 0;

  std::size_t dim() const { return concepts.dim(); }
  std::size_t k() const { return concepts.k(); }
  ConceptBasis basis() const { return build_basis(concepts, params.delta); }
  double tau() const { return params.tau(); }
};

// Random parameters from config.seed; delta starts at zero and tau at
// loss.temperature_init. The encoder output width follows the concept dim.
ModelState initialize_model(const ConceptSet& concepts, ModelArchitecture arch,
                            const TrainConfig& config);

// Hash over architecture and every parameter byte; galleries record it.
std::uint64_t model_hash(const ModelState& state);

struct BatchInputs {
  Matrix x_img;                         // N x d, unit rows
  std::vector<GeoCoordinate> locations;  // N
};

struct ObjectiveResult {
  LossResult loss;
  ModelParams grads;  // populated when gradients were requested
};

// Full alignment objective: encodes the locations, projects both sides into
// concept space and evaluates infonce + lambda * divergence. With
// with_grad=true every trainable tensor receives its analytic gradient.
ObjectiveResult evaluate_objective(const ModelParams& params, const Matrix& concept_base,
                                   const BatchInputs& batch, const LossConfig& loss_cfg,
                                   const KernelConfig& kernel_cfg, bool with_grad,
                                   LossTerms terms = LossTerms::kTotal);

// Concept activations for image rows (N x d) and location rows (N x d).
Matrix image_concepts(const ModelState& model, const Matrix& x_img);
Matrix location_concepts(const ModelState& model, const Matrix& x_loc);

}  // namespace geoconcept
