/* geoconcept: concept-aware image/GPS alignment toolkit, C interface.
 *
 * Every fallible call returns a gc_status. On failure the message for the
 * calling thread is available from gc_last_error() until the next call.
 * Handles are opaque; free them with the matching *_free function (NULL is
 * accepted everywhere a handle is freed). Strings returned by the library
 * stay valid as long as the handle they came from. */
#ifndef GEOCONCEPT_H
#define GEOCONCEPT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(GC_BUILDING_LIBRARY)
#    define GC_API __declspec(dllexport)
#  else
#    define GC_API __declspec(dllimport)
#  endif
#else
#  define GC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gc_status {
  GC_OK = 0,
  GC_ERR_USAGE = 1,
  GC_ERR_SHAPE = 2,
  GC_ERR_NUMERIC = 3,
  GC_ERR_DATA = 4,
  GC_ERR_IO = 5,
  GC_ERR_BAD_MAGIC = 6,
  GC_ERR_VERSION_MISMATCH = 7,
  GC_ERR_CHECKSUM_MISMATCH = 8,
  GC_ERR_COUNT_MISMATCH = 9,
  GC_ERR_VALIDATION = 10,
  GC_ERR_INTERNAL = 99
} gc_status;

GC_API const char* gc_version(void);
GC_API const char* gc_last_error(void);
GC_API const char* gc_status_name(gc_status status);
/* Process exit code for a status: 0 ok, 1 usage, 3 numeric, 2 otherwise. */
GC_API int gc_status_exit_code(gc_status status);

/* ---- configuration ---------------------------------------------------- */

typedef struct gc_config gc_config;

GC_API gc_status gc_config_create(gc_config** out);
/* JSON file overlaid on the defaults; unknown keys are rejected. */
GC_API gc_status gc_config_load(const char* path, gc_config** out);
/* Dotted key ("train.batch_size"); value is JSON text or a bare string. */
GC_API gc_status gc_config_set(gc_config* cfg, const char* key, const char* value);
/* Effective configuration as JSON. Copies at most cap bytes including the
 * terminator; *needed receives the full size. */
GC_API gc_status gc_config_json(const gc_config* cfg, char* buf, size_t cap, size_t* needed);
GC_API uint64_t gc_config_hash(const gc_config* cfg);
GC_API void gc_config_free(gc_config* cfg);

/* ---- workflow reports -------------------------------------------------- */

typedef struct gc_report gc_report;

GC_API size_t gc_report_message_count(const gc_report* r);
GC_API const char* gc_report_message(const gc_report* r, size_t i);
GC_API size_t gc_report_warning_count(const gc_report* r);
GC_API const char* gc_report_warning(const gc_report* r, size_t i);
GC_API size_t gc_report_output_count(const gc_report* r);
GC_API const char* gc_report_output(const gc_report* r, size_t i);
/* Threshold fractions (eval only). */
GC_API size_t gc_report_fraction_count(const gc_report* r);
GC_API double gc_report_fraction(const gc_report* r, size_t i);
GC_API void gc_report_free(gc_report* r);

/* ---- workflows ----------------------------------------------------------
 * Optional path fields may be NULL. Each writes stamp.json and config.json
 * next to its outputs. */

GC_API gc_status gc_simulate(const gc_config* cfg, const char* out_dir, gc_report** report);

typedef struct gc_train_args {
  const char* concepts;  /* concept_set prefix */
  const char* data;      /* image_embeddings prefix with lat/lon */
  const char* out_dir;
  const char* resume;    /* checkpoint path or NULL */
  int64_t stop_at_step;  /* < 0 for none */
} gc_train_args;
GC_API gc_status gc_train(const gc_config* cfg, const gc_train_args* args, gc_report** report);

typedef struct gc_eval_args {
  const char* checkpoint;
  const char* test;
  const char* out_dir;
  const char* gallery;  /* manifest prefix with lat/lon, or NULL */
  const char* train;    /* training prefix whose coordinates join the gallery, or NULL */
} gc_eval_args;
GC_API gc_status gc_eval(const gc_config* cfg, const gc_eval_args* args, gc_report** report);

typedef struct gc_explain_args {
  const char* checkpoint;
  const char* embeddings;
  const char* out_dir;
  const char* errors;  /* eval_items.csv or NULL */
  const char* labels;  /* id,label CSV or NULL */
} gc_explain_args;
GC_API gc_status gc_explain(const gc_config* cfg, const gc_explain_args* args, gc_report** report);

typedef struct gc_map_args {
  const char* checkpoint;
  const char* concept_name;
  const char* out_dir;
  const char* points;  /* lat,lon[,region] CSV or NULL for a grid */
  double grid_deg;
  int use_basis;
} gc_map_args;
GC_API gc_status gc_map(const gc_config* cfg, const gc_map_args* args, gc_report** report);

typedef struct gc_probe_args {
  const char* checkpoint;
  const char* embeddings;
  const char* task;           /* CSV with id and target columns */
  const char* out_dir;
  const char* target_column;  /* NULL means "target" */
  int classification;
  const char* features;       /* "image", "location" or "fused"; NULL means image */
} gc_probe_args;
GC_API gc_status gc_probe(const gc_config* cfg, const gc_probe_args* args, gc_report** report);

/* kind: image_embeddings, concept_set, gallery or checkpoint. */
GC_API gc_status gc_export_template(const char* out_prefix, const char* kind, size_t dim,
                                    gc_report** report);

/* ---- trained models ---------------------------------------------------- */

typedef struct gc_model gc_model;

GC_API gc_status gc_model_load(const char* path, gc_model** out);
GC_API gc_status gc_model_save(const gc_model* model, const char* path);
GC_API void gc_model_free(gc_model* model);
GC_API size_t gc_model_dim(const gc_model* model);
GC_API size_t gc_model_concept_count(const gc_model* model);
GC_API const char* gc_model_concept_name(const gc_model* model, size_t i);
GC_API double gc_model_temperature(const gc_model* model);
GC_API uint64_t gc_model_step(const gc_model* model);
/* Unit-norm location embedding; out holds gc_model_dim values. */
GC_API gc_status gc_model_encode_location(const gc_model* model, double lat, double lon, double* out,
                                          size_t out_len);
/* Concept activations z_img; out holds gc_model_concept_count values. */
GC_API gc_status gc_model_project_image(const gc_model* model, const double* x, size_t x_len,
                                        double* out, size_t out_len);

/* ---- geodesy ----------------------------------------------------------- */

GC_API gc_status gc_haversine_km(double lat1, double lon1, double lat2, double lon2, double* out);

#ifdef __cplusplus
}
#endif

#endif
