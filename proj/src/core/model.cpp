#include "model.hpp"

#include <bit>
#include <cmath>

#include "error.hpp"
#include "io.hpp"

namespace geoconcept {

void TrainConfig::validate() const {
  if (!(lr_location_encoder >= 0.0) || !(lr_other >= 0.0)) {
    fail(ErrorCode::kUsage, "learning rates must be non-negative");
  }
  if (batch_size == 0) fail(ErrorCode::kUsage, "batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::kUsage, "adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) fail(ErrorCode::kUsage, "adam eps must be > 0");
  loss.validate();
  kernel.validate();
}

double ModelParams::tau() const { return std::exp(log_tau[0]); }

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.location_encoder.config = location_encoder.config;
  z.location_encoder.frequencies = location_encoder.frequencies;
  for (const auto& b : location_encoder.branches) z.location_encoder.branches.push_back(b.zeros_like());
  z.image_projector = image_projector.zeros_like();
  z.delta = Matrix(delta.rows(), delta.cols());
  z.log_tau = Matrix(1, 1);
  return z;
}

namespace {

template <typename View, typename Params>
std::vector<View> collect_views(Params& p) {
  std::vector<View> out;
  for (std::size_t s = 0; s < p.location_encoder.branches.size(); ++s) {
    auto& branch = p.location_encoder.branches[s];
    for (std::size_t l = 0; l < branch.layers.size(); ++l) {
      const std::string base = "loc.branch" + std::to_string(s) + ".layer" + std::to_string(l);
      out.push_back({base + ".weight", ParamGroup::kLocationEncoder, &branch.layers[l].weight});
      out.push_back({base + ".bias", ParamGroup::kLocationEncoder, &branch.layers[l].bias});
    }
  }
  for (std::size_t l = 0; l < p.image_projector.layers.size(); ++l) {
    const std::string base = "img.layer" + std::to_string(l);
    out.push_back({base + ".weight", ParamGroup::kOther, &p.image_projector.layers[l].weight});
    out.push_back({base + ".bias", ParamGroup::kOther, &p.image_projector.layers[l].bias});
  }
  out.push_back({"delta", ParamGroup::kOther, &p.delta});
  out.push_back({"log_tau", ParamGroup::kOther, &p.log_tau});
  return out;
}

}  // namespace

std::vector<ParamView> param_views(ModelParams& p) { return collect_views<ParamView>(p); }

std::vector<ConstParamView> param_views(const ModelParams& p) {
  return collect_views<ConstParamView>(p);
}

std::size_t param_count(const ModelParams& p) {
  std::size_t n = 0;
  for (const auto& v : param_views(p)) n += v.value->size();
  return n;
}

ModelState initialize_model(const ConceptSet& concepts, ModelArchitecture arch,
                            const TrainConfig& config) {
  config.validate();
  if (concepts.k() == 0) fail(ErrorCode::kUsage, "concept set selects no concepts");
  arch.location_encoder.output_dim = concepts.dim();
  ModelState s;
  s.arch = arch;
  s.config = config;
  s.concepts = concepts;
  s.params.location_encoder = LocationEncoderParams::create(arch.location_encoder, config.seed);
  Rng rng(derive_seed(config.seed, 0x494d4750));  // "IMGP"
  s.params.image_projector = MlpParams::create(concepts.dim(), arch.image_hidden, concepts.k(), rng,
                                               arch.image_activation);
  s.params.delta = Matrix(concepts.dim(), concepts.k());
  s.params.log_tau = Matrix(1, 1, std::log(config.loss.temperature_init));
  s.adam_m = s.params.zeros_like();
  s.adam_v = s.params.zeros_like();
  return s;
}

std::uint64_t model_hash(const ModelState& state) {
  std::uint64_t h = fnv1a64(contrastive_space_name(state.config.loss.contrastive_space));
  auto mix = [&h](const Matrix& m) {
    h = fnv1a64(std::as_bytes(m.values()), h);
  };
  for (const auto& f : state.params.location_encoder.frequencies) mix(f);
  for (const auto& v : param_views(state.params)) mix(*v.value);
  mix(state.concepts.embeddings());
  return h;
}

ObjectiveResult evaluate_objective(const ModelParams& params, const Matrix& concept_base,
                                   const BatchInputs& batch, const LossConfig& loss_cfg,
                                   const KernelConfig& kernel_cfg, bool with_grad,
                                   LossTerms terms) {
  if (batch.x_img.rows() != batch.locations.size()) {
    fail(ErrorCode::kShape, "objective: image and location counts differ");
  }
  LocationEncoderCache loc_cache;
  MlpCache img_cache;
  const Matrix basis = concept_base + params.delta;

  AlignmentBatch ab;
  ab.img_raw = batch.x_img;
  ab.loc_raw = encode_locations(params.location_encoder, batch.locations,
                                with_grad ? &loc_cache : nullptr);
  ab.img_concept = mlp_forward(params.image_projector, batch.x_img, with_grad ? &img_cache : nullptr);
  ab.loc_concept = project_locations(basis, ab.loc_raw);

  ObjectiveResult out;
  out.loss = total_loss(ab, loss_cfg, params.tau(), kernel_cfg, terms);
  if (!with_grad) return out;

  const LossGradients& g = out.loss.grads;
  out.grads = params.zeros_like();
  // z_loc = x_loc B: dL/dx_loc picks up dL/dz_loc B^T, dL/dB = x_loc^T dL/dz_loc.
  Matrix dx_loc = g.loc_raw + matmul_nt(g.loc_concept, basis);
  out.grads.delta = matmul_tn(ab.loc_raw, g.loc_concept);
  encode_locations_backward(params.location_encoder, loc_cache, dx_loc,
                            out.grads.location_encoder.branches);
  mlp_backward(params.image_projector, img_cache, g.img_concept, out.grads.image_projector, false);
  out.grads.log_tau[0] = g.tau * params.tau();
  return out;
}

Matrix image_concepts(const ModelState& model, const Matrix& x_img) {
  return mlp_forward(model.params.image_projector, x_img);
}

Matrix location_concepts(const ModelState& model, const Matrix& x_loc) {
  return project_locations(model.basis().effective(), x_loc);
}

}  // namespace geoconcept
