#include "config.hpp"

#include "error.hpp"

namespace geoconcept {

namespace {

// Overlays `patch` onto `base`, refusing keys the base does not have and
// values whose JSON type differs (integers are accepted for float fields).
void overlay(Json& base, const Json& patch, const std::string& path) {
  if (!patch.is_object()) fail(ErrorCode::kValidation, "config section '" + path + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) fail(ErrorCode::kValidation, "unknown config key '" + key + "'");
    Json& slot = base[it.key()];
    const Json& v = it.value();
    if (slot.is_object()) {
      overlay(slot, v, key);
      continue;
    }
    const bool ok = (slot.is_number_float() && v.is_number()) ||
                    (slot.is_number_unsigned() && v.is_number_unsigned()) ||
                    (slot.is_number_integer() && !slot.is_number_unsigned() && v.is_number_integer()) ||
                    (slot.is_boolean() && v.is_boolean()) || (slot.is_string() && v.is_string()) ||
                    (slot.is_array() && v.is_array());
    if (!ok) {
      fail(ErrorCode::kValidation, "config key '" + key + "' expects " + std::string(slot.type_name()) +
                                       ", got " + std::string(v.type_name()));
    }
    slot = slot.is_number_float() ? Json(v.get<double>()) : v;
  }
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::kValidation, std::string("config key '") + key + "' is missing or has the wrong type");
  }
}

Json probe_to_json(const ProbeConfig& p) {
  return Json{{"seed", p.seed},
              {"trials", p.trials},
              {"epochs", p.epochs},
              {"batch_size", p.batch_size},
              {"train_fraction", p.train_fraction},
              {"val_fraction", p.val_fraction},
              {"lr_choices", p.lr_choices},
              {"max_depth", p.max_depth},
              {"width_choices", p.width_choices}};
}

ProbeConfig probe_from_json(const Json& j) {
  ProbeConfig p;
  p.seed = get<std::uint64_t>(j, "seed");
  p.trials = get<std::size_t>(j, "trials");
  p.epochs = get<std::size_t>(j, "epochs");
  p.batch_size = get<std::size_t>(j, "batch_size");
  p.train_fraction = get<double>(j, "train_fraction");
  p.val_fraction = get<double>(j, "val_fraction");
  p.lr_choices = get<std::vector<double>>(j, "lr_choices");
  p.max_depth = get<std::size_t>(j, "max_depth");
  p.width_choices = get<std::vector<std::size_t>>(j, "width_choices");
  p.validate();
  return p;
}

}  // namespace

Json architecture_to_json(const ModelArchitecture& a) {
  return Json{{"scales", a.location_encoder.scales},
              {"frequencies", a.location_encoder.frequencies},
              {"hidden", a.location_encoder.hidden},
              {"output_dim", a.location_encoder.output_dim},
              {"image_hidden", a.image_hidden},
              {"image_activation", activation_name(a.image_activation)}};
}

ModelArchitecture architecture_from_json(const Json& j) {
  ModelArchitecture a;
  a.location_encoder.scales = get<std::vector<double>>(j, "scales");
  a.location_encoder.frequencies = get<std::size_t>(j, "frequencies");
  a.location_encoder.hidden = get<std::size_t>(j, "hidden");
  a.location_encoder.output_dim = get<std::size_t>(j, "output_dim");
  a.image_hidden = get<std::vector<std::size_t>>(j, "image_hidden");
  a.image_activation = activation_from_name(get<std::string>(j, "image_activation"));
  if (a.location_encoder.scales.empty() || a.location_encoder.frequencies == 0 ||
      a.location_encoder.hidden == 0) {
    fail(ErrorCode::kValidation, "model: scales, frequencies and hidden must be non-empty/positive");
  }
  for (double s : a.location_encoder.scales) {
    if (!(s > 0.0)) fail(ErrorCode::kValidation, "model.scales must be positive");
  }
  return a;
}

Json train_config_to_json(const TrainConfig& c) {
  return Json{{"lr_location_encoder", c.lr_location_encoder},
              {"lr_other", c.lr_other},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"drop_last", c.drop_last},
              {"loss",
               {{"lambda", c.loss.lambda},
                {"temperature_init", c.loss.temperature_init},
                {"contrastive_space", contrastive_space_name(c.loss.contrastive_space)},
                {"divergence_variant", divergence_variant_name(c.loss.divergence_variant)},
                {"normalize_before_contrastive", c.loss.normalize_before_contrastive},
                {"symmetric", c.loss.symmetric}}},
              {"kernel", {{"sigma", c.kernel.sigma}}}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.lr_location_encoder = get<double>(j, "lr_location_encoder");
  c.lr_other = get<double>(j, "lr_other");
  c.batch_size = get<std::size_t>(j, "batch_size");
  c.epochs = get<std::size_t>(j, "epochs");
  c.seed = get<std::uint64_t>(j, "seed");
  c.beta1 = get<double>(j, "beta1");
  c.beta2 = get<double>(j, "beta2");
  c.adam_eps = get<double>(j, "adam_eps");
  c.drop_last = get<bool>(j, "drop_last");
  const Json& l = j.at("loss");
  c.loss.lambda = get<double>(l, "lambda");
  c.loss.temperature_init = get<double>(l, "temperature_init");
  c.loss.contrastive_space = contrastive_space_from_name(get<std::string>(l, "contrastive_space"));
  c.loss.divergence_variant = divergence_variant_from_name(get<std::string>(l, "divergence_variant"));
  c.loss.normalize_before_contrastive = get<bool>(l, "normalize_before_contrastive");
  c.loss.symmetric = get<bool>(l, "symmetric");
  c.kernel.sigma = get<double>(j.at("kernel"), "sigma");
  c.validate();
  return c;
}

Json world_spec_to_json(const WorldSpec& w) {
  return Json{{"seed", w.seed},
              {"n_concepts", w.n_concepts},
              {"dim", w.dim},
              {"bumps_per_concept", w.bumps_per_concept},
              {"bandwidth_km_min", w.bandwidth_km_min},
              {"bandwidth_km_max", w.bandwidth_km_max},
              {"amplitude_min", w.amplitude_min},
              {"amplitude_max", w.amplitude_max},
              {"noise_sigma", w.noise_sigma},
              {"n_train", w.n_train},
              {"n_test", w.n_test},
              {"orthogonalize", w.orthogonalize}};
}

WorldSpec world_spec_from_json(const Json& j) {
  WorldSpec w;
  w.seed = get<std::uint64_t>(j, "seed");
  w.n_concepts = get<std::size_t>(j, "n_concepts");
  w.dim = get<std::size_t>(j, "dim");
  w.bumps_per_concept = get<std::size_t>(j, "bumps_per_concept");
  w.bandwidth_km_min = get<double>(j, "bandwidth_km_min");
  w.bandwidth_km_max = get<double>(j, "bandwidth_km_max");
  w.amplitude_min = get<double>(j, "amplitude_min");
  w.amplitude_max = get<double>(j, "amplitude_max");
  w.noise_sigma = get<double>(j, "noise_sigma");
  w.n_train = get<std::size_t>(j, "n_train");
  w.n_test = get<std::size_t>(j, "n_test");
  w.orthogonalize = get<bool>(j, "orthogonalize");
  w.validate();
  return w;
}

Json run_config_to_json(const RunConfig& cfg) {
  Json train = train_config_to_json(cfg.train);
  Json loss = train["loss"];
  Json kernel = train["kernel"];
  train.erase("loss");
  train.erase("kernel");
  Json model = architecture_to_json(cfg.model);
  model.erase("output_dim");  // follows the concept embedding width
  return Json{{"train", train},
              {"loss", loss},
              {"kernel", kernel},
              {"model", model},
              {"concepts", {{"selected", cfg.concepts}}},
              {"eval", {{"thresholds_km", cfg.eval.thresholds_km}}},
              {"gallery", {{"grid_deg", cfg.gallery.grid_deg}, {"include_train", cfg.gallery.include_train}}},
              {"world", world_spec_to_json(cfg.world)},
              {"interpret",
               {{"k_top", cfg.interpret.k_top},
                {"min_support", cfg.interpret.min_support},
                {"table_n", cfg.interpret.table_n},
                {"sankey_top", cfg.interpret.sankey_top},
                {"clusters", cfg.interpret.clusters},
                {"kmeans_max_iter", cfg.interpret.kmeans_max_iter}}},
              {"probe", probe_to_json(cfg.probe)}};
}

RunConfig run_config_from_json(const Json& patch) {
  Json j = run_config_to_json(RunConfig{});
  overlay(j, patch, "");
  RunConfig cfg;
  try {
    Json train = j.at("train");
    train["loss"] = j.at("loss");
    train["kernel"] = j.at("kernel");
    cfg.train = train_config_from_json(train);
    Json model = j.at("model");
    model["output_dim"] = cfg.model.location_encoder.output_dim;
    cfg.model = architecture_from_json(model);
    cfg.concepts = j.at("concepts").at("selected").get<std::vector<std::string>>();
    cfg.eval.thresholds_km = j.at("eval").at("thresholds_km").get<std::vector<double>>();
    ThresholdSpec check(cfg.eval.thresholds_km);
    cfg.gallery.grid_deg = j.at("gallery").at("grid_deg").get<double>();
    cfg.gallery.include_train = j.at("gallery").at("include_train").get<bool>();
    if (cfg.gallery.grid_deg < 0.0 || cfg.gallery.grid_deg > 180.0) {
      fail(ErrorCode::kValidation, "gallery.grid_deg must lie in [0, 180]");
    }
    if (cfg.gallery.grid_deg == 0.0 && !cfg.gallery.include_train) {
      fail(ErrorCode::kValidation, "gallery has no source: enable include_train or set grid_deg");
    }
    cfg.world = world_spec_from_json(j.at("world"));
    const Json& in = j.at("interpret");
    cfg.interpret.k_top = get<std::size_t>(in, "k_top");
    cfg.interpret.min_support = get<std::size_t>(in, "min_support");
    cfg.interpret.table_n = get<std::size_t>(in, "table_n");
    cfg.interpret.sankey_top = get<std::size_t>(in, "sankey_top");
    cfg.interpret.clusters = get<std::size_t>(in, "clusters");
    cfg.interpret.kmeans_max_iter = get<std::size_t>(in, "kmeans_max_iter");
    if (cfg.interpret.k_top == 0) fail(ErrorCode::kValidation, "interpret.k_top must be >= 1");
    cfg.probe = probe_from_json(j.at("probe"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kValidation) throw;
    fail(ErrorCode::kValidation, std::string("invalid config: ") + e.what());
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("invalid config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file_text(path));
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kValidation, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  Json leaf;
  try {
    leaf = Json::parse(value);
  } catch (const Json::parse_error&) {
    leaf = value;
  }
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t dot; (dot = dotted_key.find('.', start)) != std::string::npos; start = dot + 1) {
    parts.push_back(dotted_key.substr(start, dot - start));
  }
  parts.push_back(dotted_key.substr(start));
  Json base = run_config_to_json(cfg);
  const Json* slot = &base;
  for (const auto& part : parts) {
    if (part.empty() || !slot->is_object() || !slot->contains(part)) {
      fail(ErrorCode::kValidation, "unknown config key '" + dotted_key + "'");
    }
    slot = &slot->at(part);
  }
  if (slot->is_object()) fail(ErrorCode::kValidation, "config key '" + dotted_key + "' names a section");
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) leaf = Json{{*it, leaf}};
  overlay(base, leaf, "");
  cfg = run_config_from_json(base);
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(run_config_to_json(cfg).dump()); }

}  // namespace geoconcept
