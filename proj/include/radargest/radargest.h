#ifndef RADARGEST_H
#define RADARGEST_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RG_API __declspec(dllexport)
#else
#define RG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rg_status {
  RG_OK = 0,
  RG_ERR_INVALID_ARGUMENT = 1,
  RG_ERR_IO = 2,
  RG_ERR_FORMAT = 3,
  RG_ERR_SHAPE = 4,
  RG_ERR_NUMERIC = 5,
  RG_ERR_STATE = 6,
  RG_ERR_INTERNAL = 7
} rg_status;

/* Short lowercase name of a status ("ok", "invalid_argument", "io", ...). */
RG_API const char* rg_status_name(rg_status status);

/* Details of the last failure on the calling thread. The message stays valid
   until the next failing call on that thread; the offset is the first
   offending byte of a malformed file, or -1. */
RG_API const char* rg_last_error(void);
RG_API int64_t rg_last_error_offset(void);

RG_API const char* rg_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
RG_API void rg_string_free(char* s);

/* ---- commands -------------------------------------------------------- */

/* Progress callback: one line per epoch for training commands. */
typedef void (*rg_log_fn)(const char* line, void* user);

/* NUL-terminated list of command names, in help order. */
RG_API const char* const* rg_commands(void);

/* Full default configuration of `command` as JSON. */
RG_API rg_status rg_default_config(const char* command, char** config_json);

/* Runs `command` with `config_json` (keys override the defaults; unknown keys
   are rejected) and returns the JSON report echoing the full configuration
   and seed. `log` may be NULL. */
RG_API rg_status rg_run(const char* command, const char* config_json, rg_log_fn log, void* user,
                        char** report_json);

/* ---- models ---------------------------------------------------------- */

typedef struct rg_model rg_model;

RG_API rg_status rg_model_open(const char* checkpoint_dir, rg_model** out);
RG_API void rg_model_close(rg_model* model);

/* "autoencoder", "classifier" or "baseline"; valid while the model is open. */
RG_API const char* rg_model_kind(const rg_model* model);
RG_API uint64_t rg_model_parameter_count(const rg_model* model);
RG_API uint64_t rg_model_seed(const rg_model* model);

/* Classifies one recording: `points` holds frames x 64 x 5 values
   (x, y, z, Doppler, intensity per point) and `valid_counts` one entry per
   frame. Writes `classes` logits and returns the argmax in *label. */
RG_API rg_status rg_model_classify(const rg_model* model, const double* points, const int32_t* valid_counts,
                                   size_t frames, double* logits, size_t classes, int32_t* label);

/* Reconstructs a 17 x 3 skeleton (metres) from one 64 x 5 point cloud with an
   autoencoder checkpoint. */
RG_API rg_status rg_model_reconstruct(const rg_model* model, const double* points, int32_t valid_count,
                                      double* joints);

/* ---- camera rigs ----------------------------------------------------- */

typedef struct rg_rig rg_rig;

RG_API rg_status rg_rig_load(const char* path, rg_rig** out);
RG_API void rg_rig_close(rg_rig* rig);
RG_API size_t rg_rig_cameras(const rg_rig* rig);

/* Pixel (u, v) of ground point xyz in camera `view`. */
RG_API rg_status rg_rig_project(const rg_rig* rig, size_t view, const double* xyz, double* uv);

/* DLT triangulation from `count` observations: views[i] with pixel
   uv[2i], uv[2i+1]. */
RG_API rg_status rg_rig_triangulate(const rg_rig* rig, const size_t* views, const double* uv, size_t count,
                                    double* xyz);

#ifdef __cplusplus
}
#endif

#endif
