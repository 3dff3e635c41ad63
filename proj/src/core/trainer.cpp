#include "trainer.hpp"

#include <algorithm>
#include <cmath>

#include "config.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace geoconcept {

CsvTable TrainRecord::to_csv() const {
  CsvTable t({"step", "epoch", "total", "infonce", "divergence", "tau", "grad_norm_location",
              "grad_norm_other"});
  for (const auto& s : steps) {
    t.add_row({std::to_string(s.step), std::to_string(s.epoch), format_double(s.total),
               format_double(s.infonce), format_double(s.divergence), format_double(s.tau),
               format_double(s.grad_norm_location), format_double(s.grad_norm_other)});
  }
  return t;
}

std::size_t steps_per_epoch(std::size_t dataset_size, const TrainConfig& config) {
  if (dataset_size == 0) return 0;
  if (dataset_size < config.batch_size) return 1;
  if (config.drop_last) return dataset_size / config.batch_size;
  return (dataset_size + config.batch_size - 1) / config.batch_size;
}

void adam_step(ModelState& state, const ModelParams& grads) {
  const TrainConfig& cfg = state.config;
  auto params = param_views(state.params);
  auto first = param_views(state.adam_m);
  auto second = param_views(state.adam_v);
  auto g = param_views(grads);
  if (g.size() != params.size()) fail(ErrorCode::kShape, "adam_step: gradient layout mismatch");
  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    require_same_shape(*params[p].value, *g[p].value, "adam_step");
    const double lr =
        params[p].group == ParamGroup::kLocationEncoder ? cfg.lr_location_encoder : cfg.lr_other;
    Matrix& theta = *params[p].value;
    Matrix& m = *first[p].value;
    Matrix& v = *second[p].value;
    const Matrix& grad = *g[p].value;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
  double& log_tau = state.params.log_tau[0];
  log_tau = std::clamp(log_tau, std::log(kTauMin), std::log(kTauMax));
  ++state.step;
}

namespace {

double group_norm(const ModelParams& grads, ParamGroup group) {
  double ss = 0.0;
  for (const auto& v : param_views(grads)) {
    if (v.group == group) ss += sum_squares(v.value->values());
  }
  return std::sqrt(ss);
}

void require_finite_params(const ModelState& state) {
  for (const auto& v : param_views(state.params)) {
    if (!v.value->all_finite()) {
      fail(ErrorCode::kNumeric, "step " + std::to_string(state.step) + ": parameter '" + v.name +
                                    "' became non-finite");
    }
  }
}

}  // namespace

TrainResult train(const ImageDataset& dataset, ModelState state, const TrainOptions& options) {
  const TrainConfig& cfg = state.config;
  cfg.validate();
  if (dataset.size() == 0) fail(ErrorCode::kData, "train: dataset is empty");
  if (!dataset.fully_located()) fail(ErrorCode::kData, "train: every item needs a true location");
  if (dataset.dim() != state.dim()) {
    fail(ErrorCode::kShape, "train: image dim " + std::to_string(dataset.dim()) +
                                " does not match concept dim " + std::to_string(state.dim()));
  }

  TrainResult result;
  const std::size_t n = dataset.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  if (batch == 1) result.warnings.push_back("batch size 1: the contrastive term is identically zero");
  if (n < cfg.batch_size) {
    result.warnings.push_back("dataset smaller than batch_size; training on one batch of " +
                              std::to_string(n));
  }
  const std::size_t per_epoch = steps_per_epoch(n, cfg);
  const std::uint64_t total_steps = per_epoch * cfg.epochs;
  const std::uint64_t stop = std::min(total_steps, options.stop_at_step.value_or(total_steps));
  const Matrix base = state.concepts.selected_embeddings();

  std::vector<std::size_t> order;
  std::size_t order_epoch = SIZE_MAX;
  BatchInputs inputs;
  inputs.x_img = Matrix(batch, dataset.dim());
  inputs.locations.resize(batch);

  while (state.step < stop) {
    const std::size_t epoch = state.step / per_epoch;
    const std::size_t slot = state.step % per_epoch;
    if (epoch != order_epoch) {
      Rng rng(derive_seed(cfg.seed, 0x53485546ULL + epoch));  // "SHUF"
      order = permutation(n, rng);
      order_epoch = epoch;
    }
    const std::size_t begin = slot * batch;
    const std::size_t count = std::min(batch, n - begin);
    if (inputs.locations.size() != count) {
      inputs.x_img = Matrix(count, dataset.dim());
      inputs.locations.resize(count);
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t idx = order[begin + i];
      const auto src = dataset.vectors.row(idx);
      std::copy(src.begin(), src.end(), inputs.x_img.row(i).begin());
      inputs.locations[i] = *dataset.locations[idx];
    }

    ObjectiveResult obj;
    try {
      obj = evaluate_objective(state.params, base, inputs, cfg.loss, cfg.kernel, true);
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(state.step) + ": " + e.what());
    }
    if (!std::isfinite(obj.loss.infonce)) {
      fail(ErrorCode::kNumeric, "step " + std::to_string(state.step) + ": non-finite infonce loss");
    }
    if (!std::isfinite(obj.loss.divergence)) {
      fail(ErrorCode::kNumeric,
           "step " + std::to_string(state.step) + ": non-finite divergence loss");
    }

    TrainStepRecord rec;
    rec.step = state.step;
    rec.epoch = epoch;
    rec.total = obj.loss.total;
    rec.infonce = obj.loss.infonce;
    rec.divergence = obj.loss.divergence;
    rec.tau = state.tau();
    rec.grad_norm_location = group_norm(obj.grads, ParamGroup::kLocationEncoder);
    rec.grad_norm_other = group_norm(obj.grads, ParamGroup::kOther);
    result.record.steps.push_back(rec);

    adam_step(state, obj.grads);
    require_finite_params(state);
  }
  result.state = std::move(state);
  return result;
}

TrainResult train(const ImageDataset& dataset, const ConceptSet& concepts,
                  const ModelArchitecture& arch, const TrainConfig& config,
                  const TrainOptions& options) {
  return train(dataset, initialize_model(concepts, arch, config), options);
}

CheckpointBlob checkpoint_blob(const ModelState& state) {
  CheckpointBlob blob;
  blob.meta["format"] = "geoconcept-checkpoint";
  blob.meta["architecture"] = architecture_to_json(state.arch);
  blob.meta["train"] = train_config_to_json(state.config);
  blob.meta["concept_names"] = state.concepts.names();
  blob.meta["concept_selected"] = state.concepts.selected();
  blob.meta["step"] = state.step;
  blob.tensors.push_back({"concepts.embeddings", state.concepts.embeddings()});
  const auto& freqs = state.params.location_encoder.frequencies;
  for (std::size_t s = 0; s < freqs.size(); ++s) {
    blob.tensors.push_back({"loc.frequencies" + std::to_string(s), freqs[s]});
  }
  for (const auto& v : param_views(state.params)) blob.tensors.push_back({v.name, *v.value});
  for (const auto& v : param_views(state.adam_m)) blob.tensors.push_back({"adam_m." + v.name, *v.value});
  for (const auto& v : param_views(state.adam_v)) blob.tensors.push_back({"adam_v." + v.name, *v.value});
  return blob;
}

ModelState model_from_blob(const CheckpointBlob& blob) {
  try {
    if (blob.meta.value("format", "") != "geoconcept-checkpoint") {
      fail(ErrorCode::kValidation, "checkpoint metadata has the wrong format tag");
    }
    const ModelArchitecture arch = architecture_from_json(blob.meta.at("architecture"));
    const TrainConfig config = train_config_from_json(blob.meta.at("train"));
    ConceptSet concepts(blob.meta.at("concept_names").get<std::vector<std::string>>(),
                        blob.tensor("concepts.embeddings"),
                        blob.meta.at("concept_selected").get<std::vector<std::size_t>>());
    ModelState state = initialize_model(concepts, arch, config);
    // Stored embeddings are already unit columns; keep their exact bits.
    state.concepts = ConceptSet(concepts.names(), blob.tensor("concepts.embeddings"),
                                concepts.selected(), false);
    auto restore = [&blob](std::vector<ParamView> views, const std::string& prefix) {
      for (auto& v : views) {
        const Matrix& stored = blob.tensor(prefix + v.name);
        require_same_shape(*v.value, stored, ("checkpoint tensor " + v.name).c_str());
        *v.value = stored;
      }
    };
    auto& freqs = state.params.location_encoder.frequencies;
    for (std::size_t s = 0; s < freqs.size(); ++s) {
      const Matrix& stored = blob.tensor("loc.frequencies" + std::to_string(s));
      require_same_shape(freqs[s], stored, "checkpoint frequencies");
      freqs[s] = stored;
    }
    state.adam_m.location_encoder.frequencies = freqs;
    state.adam_v.location_encoder.frequencies = freqs;
    restore(param_views(state.params), "");
    restore(param_views(state.adam_m), "adam_m.");
    restore(param_views(state.adam_v), "adam_v.");
    state.step = blob.meta.at("step").get<std::uint64_t>();
    return state;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed checkpoint metadata: ") + e.what());
  }
}

void save_checkpoint(const ModelState& state, const fs::path& path) {
  write_file_atomic(path, encode_checkpoint(checkpoint_blob(state)));
}

ModelState load_checkpoint(const fs::path& path) {
  try {
    return model_from_blob(decode_checkpoint(read_file_bytes(path)));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

bool states_identical(const ModelState& a, const ModelState& b) {
  return encode_checkpoint(checkpoint_blob(a)) == encode_checkpoint(checkpoint_blob(b));
}

}  // namespace geoconcept
