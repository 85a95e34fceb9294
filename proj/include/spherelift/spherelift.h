/* C interface to the spherelift library. All functions return an sl_status;
 * on failure sl_last_error() holds a one-line message for the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * sl_string_free. JSON arguments use the same schemas as the command line. */
#ifndef SPHERELIFT_H
#define SPHERELIFT_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define SL_API __attribute__((visibility("default")))
#else
#define SL_API
#endif

typedef enum sl_status {
  SL_OK = 0,
  SL_ERR_INTERNAL = 1,
  SL_ERR_USAGE = 2,
  SL_ERR_CONFIG = 3,
  SL_ERR_DATA = 4,
  SL_ERR_PROPERTY = 5
} sl_status;

typedef struct sl_mesh sl_mesh;
typedef struct sl_signal sl_signal;

/* Receives one JSON object per line-worthy event (training progress). */
typedef void (*sl_log_fn)(const char* json_line, void* user);

SL_API const char* sl_version(void);
SL_API const char* sl_last_error(void);
SL_API void sl_string_free(char* s);
SL_API void sl_set_log(sl_log_fn fn, void* user);

/* Meshes */
SL_API sl_status sl_mesh_build(int max_level, sl_mesh** out);
SL_API sl_status sl_mesh_load(const char* path, sl_mesh** out);
SL_API sl_status sl_mesh_save(const sl_mesh* mesh, const char* path);
SL_API int sl_mesh_max_level(const sl_mesh* mesh);
SL_API int64_t sl_mesh_node_count(const sl_mesh* mesh, int level);
/* Structural invariants; SL_ERR_PROPERTY when any fails. */
SL_API sl_status sl_mesh_validate(const sl_mesh* mesh, char** report_json);
SL_API void sl_mesh_free(sl_mesh* mesh);

/* Signals: node-major, channels interleaved (row-major nodes x channels). */
SL_API sl_status sl_signal_create(int level, int64_t nodes, int64_t channels, const double* values, sl_signal** out);
SL_API sl_status sl_signal_load(const char* path, sl_signal** out);
SL_API sl_status sl_signal_save(const sl_signal* signal, const char* path);
SL_API int sl_signal_level(const sl_signal* signal);
SL_API int64_t sl_signal_nodes(const sl_signal* signal);
SL_API int64_t sl_signal_channels(const sl_signal* signal);
SL_API const double* sl_signal_values(const sl_signal* signal);
SL_API void sl_signal_free(sl_signal* signal);

/* Synthetic signals from {"kind","level","channels","band_limit","amplitude","seed"}. */
SL_API sl_status sl_generate(const sl_mesh* mesh, const char* spec_json, sl_signal** out);
/* Writes `count` samples (seeds seed, seed+1, ...) as a dataset directory. */
SL_API sl_status sl_generate_dataset(const sl_mesh* mesh, const char* spec_json, int count, const char* out_dir);

/* Handcrafted multi-level lifting. Forward maps a level-L signal to
 * [C at level L-levels; D of each step, coarsest first], which has the same
 * shape; inverse undoes it. */
SL_API sl_status sl_transform(const sl_mesh* mesh, const sl_signal* in, int levels, int inverse, sl_signal** out);

/* Projects IDX images (and optional labels, may be NULL) onto level `level`
 * and writes a dataset directory. */
SL_API sl_status sl_project_idx(const char* images_path, const char* labels_path, int level, const char* out_dir,
                                char** summary_json);

/* Property battery; options {"level","seed","attention_trials","impulses",
 * "perturb_row_sum","gradient"}. SL_ERR_PROPERTY when a property fails. */
SL_API sl_status sl_check(const sl_mesh* mesh, const char* options_json, char** report_json);

/* Experiment config: {"network":{...},"train":{...},"data":{"train":DIR,"test":DIR}}
 * or {"synthetic":{...spec,"train_count","test_count"}} in place of "data". */
SL_API sl_status sl_train(const char* config_json, const char* out_dir, char** summary_json);
SL_API sl_status sl_evaluate(const char* checkpoint_dir, const char* data_dir, char** summary_json);
/* kinds_csv overrides the config's "kinds"; the config's "seeds" lists the runs. */
SL_API sl_status sl_compare(const char* config_json, const char* kinds_csv, const char* out_csv, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
