#include "geoconcept/geoconcept.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "error.hpp"
#include "geo.hpp"
#include "trainer.hpp"
#include "workflows.hpp"

namespace gc = geoconcept;

struct gc_config {
  gc::RunConfig value;
};

struct gc_report {
  std::vector<std::string> messages;
  std::vector<std::string> warnings;
  std::vector<std::string> outputs;
  std::vector<double> fractions;
};

struct gc_model {
  gc::ModelState state;
  std::vector<std::string> names;
};

namespace {

thread_local std::string last_error;

gc_status to_status(gc::ErrorCode code) {
  switch (code) {
    case gc::ErrorCode::kUsage: return GC_ERR_USAGE;
    case gc::ErrorCode::kShape: return GC_ERR_SHAPE;
    case gc::ErrorCode::kNumeric: return GC_ERR_NUMERIC;
    case gc::ErrorCode::kData: return GC_ERR_DATA;
    case gc::ErrorCode::kIo: return GC_ERR_IO;
    case gc::ErrorCode::kBadMagic: return GC_ERR_BAD_MAGIC;
    case gc::ErrorCode::kVersionMismatch: return GC_ERR_VERSION_MISMATCH;
    case gc::ErrorCode::kChecksumMismatch: return GC_ERR_CHECKSUM_MISMATCH;
    case gc::ErrorCode::kCountMismatch: return GC_ERR_COUNT_MISMATCH;
    case gc::ErrorCode::kValidation: return GC_ERR_VALIDATION;
  }
  return GC_ERR_INTERNAL;
}

template <class Fn>
gc_status guarded(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return GC_OK;
  } catch (const gc::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  }
  return GC_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) gc::fail(gc::ErrorCode::kUsage, what);
}

std::optional<gc::fs::path> opt_path(const char* p) {
  if (p == nullptr || *p == '\0') return std::nullopt;
  return gc::fs::path(p);
}

gc_status emit(const gc::WorkflowReport& r, gc_report** out) {
  if (out == nullptr) return GC_OK;
  auto* rep = new gc_report;
  rep->messages = r.messages;
  rep->warnings = r.warnings;
  for (const auto& p : r.outputs) rep->outputs.push_back(p.string());
  rep->fractions = r.fractions;
  *out = rep;
  return GC_OK;
}

template <class Fn>
gc_status run_workflow(gc_report** report, Fn&& fn) {
  if (report != nullptr) *report = nullptr;
  gc::WorkflowReport r;
  const gc_status st = guarded([&] { r = fn(); });
  if (st != GC_OK) return st;
  return emit(r, report);
}

const char* at(const std::vector<std::string>& v, size_t i) {
  return i < v.size() ? v[i].c_str() : nullptr;
}

}  // namespace

extern "C" {

const char* gc_version(void) { return gc::code_version(); }

const char* gc_last_error(void) { return last_error.c_str(); }

const char* gc_status_name(gc_status status) {
  switch (status) {
    case GC_OK: return "ok";
    case GC_ERR_INTERNAL: return "internal";
    default: break;
  }
  if (status >= GC_ERR_USAGE && status <= GC_ERR_VALIDATION) {
    return gc::error_code_name(static_cast<gc::ErrorCode>(status));
  }
  return "unknown";
}

int gc_status_exit_code(gc_status status) {
  switch (status) {
    case GC_OK: return 0;
    case GC_ERR_USAGE: return 1;
    case GC_ERR_NUMERIC: return 3;
    default: return 2;
  }
}

gc_status gc_config_create(gc_config** out) {
  return guarded([&] {
    require(out != nullptr, "gc_config_create: out is NULL");
    *out = new gc_config;
  });
}

gc_status gc_config_load(const char* path, gc_config** out) {
  return guarded([&] {
    require(out != nullptr && path != nullptr, "gc_config_load: NULL argument");
    *out = nullptr;
    auto cfg = std::make_unique<gc_config>();
    cfg->value = gc::load_run_config(path);
    *out = cfg.release();
  });
}

gc_status gc_config_set(gc_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr && value != nullptr, "gc_config_set: NULL argument");
    gc::set_config_value(cfg->value, key, value);
  });
}

gc_status gc_config_json(const gc_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr, "gc_config_json: config is NULL");
    const std::string text = gc::run_config_to_json(cfg->value).dump(2);
    if (needed != nullptr) *needed = text.size() + 1;
    if (buf != nullptr && cap > 0) {
      const size_t n = std::min(cap - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

uint64_t gc_config_hash(const gc_config* cfg) {
  return cfg == nullptr ? 0 : gc::config_hash(cfg->value);
}

void gc_config_free(gc_config* cfg) { delete cfg; }

size_t gc_report_message_count(const gc_report* r) { return r ? r->messages.size() : 0; }
const char* gc_report_message(const gc_report* r, size_t i) { return r ? at(r->messages, i) : nullptr; }
size_t gc_report_warning_count(const gc_report* r) { return r ? r->warnings.size() : 0; }
const char* gc_report_warning(const gc_report* r, size_t i) { return r ? at(r->warnings, i) : nullptr; }
size_t gc_report_output_count(const gc_report* r) { return r ? r->outputs.size() : 0; }
const char* gc_report_output(const gc_report* r, size_t i) { return r ? at(r->outputs, i) : nullptr; }
size_t gc_report_fraction_count(const gc_report* r) { return r ? r->fractions.size() : 0; }
double gc_report_fraction(const gc_report* r, size_t i) {
  return r && i < r->fractions.size() ? r->fractions[i] : 0.0;
}
void gc_report_free(gc_report* r) { delete r; }

gc_status gc_simulate(const gc_config* cfg, const char* out_dir, gc_report** report) {
  return run_workflow(report, [&] {
    require(cfg != nullptr && out_dir != nullptr, "simulate: config and output directory are required");
    return gc::run_simulate(cfg->value, {out_dir});
  });
}

gc_status gc_train(const gc_config* cfg, const gc_train_args* args, gc_report** report) {
  return run_workflow(report, [&] {
    require(cfg != nullptr && args != nullptr, "train: NULL argument");
    require(args->data != nullptr && args->out_dir != nullptr, "train: --data and --out are required");
    require(args->concepts != nullptr || args->resume != nullptr,
            "train: --concepts is required unless resuming");
    gc::TrainRequest req;
    req.concepts = args->concepts ? args->concepts : "";
    req.data = args->data;
    req.out_dir = args->out_dir;
    req.resume = opt_path(args->resume);
    if (args->stop_at_step >= 0) req.stop_at_step = static_cast<std::uint64_t>(args->stop_at_step);
    return gc::run_train(cfg->value, req);
  });
}

gc_status gc_eval(const gc_config* cfg, const gc_eval_args* args, gc_report** report) {
  return run_workflow(report, [&] {
    require(cfg != nullptr && args != nullptr, "eval: NULL argument");
    require(args->checkpoint && args->test && args->out_dir, "eval: --checkpoint, --test and --out are required");
    gc::EvalRequest req{args->checkpoint, args->test, args->out_dir, opt_path(args->gallery),
                        opt_path(args->train)};
    return gc::run_eval(cfg->value, req);
  });
}

gc_status gc_explain(const gc_config* cfg, const gc_explain_args* args, gc_report** report) {
  return run_workflow(report, [&] {
    require(cfg != nullptr && args != nullptr, "explain: NULL argument");
    require(args->checkpoint && args->embeddings && args->out_dir,
            "explain: --checkpoint, --embeddings and --out are required");
    gc::ExplainRequest req{args->checkpoint, args->embeddings, args->out_dir, opt_path(args->errors),
                           opt_path(args->labels)};
    return gc::run_explain(cfg->value, req);
  });
}

gc_status gc_map(const gc_config* cfg, const gc_map_args* args, gc_report** report) {
  return run_workflow(report, [&] {
    require(cfg != nullptr && args != nullptr, "map: NULL argument");
    require(args->checkpoint && args->concept_name && args->out_dir,
            "map: --checkpoint, --concept and --out are required");
    gc::MapRequest req;
    req.checkpoint = args->checkpoint;
    req.concept_name = args->concept_name;
    req.out_dir = args->out_dir;
    req.points = opt_path(args->points);
    req.grid_deg = args->grid_deg;
    req.use_basis = args->use_basis != 0;
    return gc::run_map(cfg->value, req);
  });
}

gc_status gc_probe(const gc_config* cfg, const gc_probe_args* args, gc_report** report) {
  return run_workflow(report, [&] {
    require(cfg != nullptr && args != nullptr, "probe: NULL argument");
    require(args->checkpoint && args->embeddings && args->task && args->out_dir,
            "probe: --checkpoint, --embeddings, --task and --out are required");
    gc::ProbeRequest req;
    req.checkpoint = args->checkpoint;
    req.embeddings = args->embeddings;
    req.task = args->task;
    req.out_dir = args->out_dir;
    if (args->target_column) req.target_column = args->target_column;
    req.classification = args->classification != 0;
    if (args->features) req.features = gc::probe_features_from_name(args->features);
    return gc::run_probe(cfg->value, req);
  });
}

gc_status gc_export_template(const char* out_prefix, const char* kind, size_t dim, gc_report** report) {
  return run_workflow(report, [&] {
    require(out_prefix != nullptr, "export-embeddings-template: --out is required");
    gc::TemplateRequest req;
    req.out_prefix = out_prefix;
    if (kind) req.kind = gc::manifest_kind_from_name(kind);
    req.dim = dim;
    return gc::run_export_template(req);
  });
}

gc_status gc_model_load(const char* path, gc_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "gc_model_load: NULL argument");
    *out = nullptr;
    auto m = std::make_unique<gc_model>();
    m->state = gc::load_checkpoint(path);
    m->names = m->state.concepts.selected_names();
    *out = m.release();
  });
}

gc_status gc_model_save(const gc_model* model, const char* path) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "gc_model_save: NULL argument");
    gc::save_checkpoint(model->state, path);
  });
}

void gc_model_free(gc_model* model) { delete model; }

size_t gc_model_dim(const gc_model* model) { return model ? model->state.dim() : 0; }
size_t gc_model_concept_count(const gc_model* model) { return model ? model->state.k() : 0; }
const char* gc_model_concept_name(const gc_model* model, size_t i) {
  return model ? at(model->names, i) : nullptr;
}
double gc_model_temperature(const gc_model* model) { return model ? model->state.tau() : 0.0; }
uint64_t gc_model_step(const gc_model* model) { return model ? model->state.step : 0; }

gc_status gc_model_encode_location(const gc_model* model, double lat, double lon, double* out,
                                   size_t out_len) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "gc_model_encode_location: NULL argument");
    if (out_len != model->state.dim()) gc::fail(gc::ErrorCode::kShape, "output buffer must hold dim values");
    const auto v = gc::encode_location(model->state.params.location_encoder, gc::GeoCoordinate::make(lat, lon));
    std::copy(v.begin(), v.end(), out);
  });
}

gc_status gc_model_project_image(const gc_model* model, const double* x, size_t x_len, double* out,
                                 size_t out_len) {
  return guarded([&] {
    require(model != nullptr && x != nullptr && out != nullptr, "gc_model_project_image: NULL argument");
    if (x_len != model->state.dim()) gc::fail(gc::ErrorCode::kShape, "image embedding must have dim values");
    if (out_len != model->state.k()) gc::fail(gc::ErrorCode::kShape, "output buffer must hold k values");
    const auto z = gc::mlp_forward(model->state.params.image_projector, std::span<const double>(x, x_len));
    std::copy(z.begin(), z.end(), out);
  });
}

gc_status gc_haversine_km(double lat1, double lon1, double lat2, double lon2, double* out) {
  return guarded([&] {
    require(out != nullptr, "gc_haversine_km: out is NULL");
    *out = gc::haversine_km(gc::GeoCoordinate::make(lat1, lon1), gc::GeoCoordinate::make(lat2, lon2));
  });
}

}  // extern "C"
