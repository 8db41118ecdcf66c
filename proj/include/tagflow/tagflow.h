#ifndef TAGFLOW_TAGFLOW_H
#define TAGFLOW_TAGFLOW_H

#include <stddef.h>

#if defined(TAGFLOW_BUILDING_LIBRARY)
#define TF_API __attribute__((visibility("default")))
#else
#define TF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct tf_config tf_config;
typedef struct tf_volume tf_volume;

typedef enum tf_status {
    TF_OK = 0,
    TF_ERR_CONFIG = 1,
    TF_ERR_NUMERICAL = 2,
    TF_ERR_IO = 3,
    TF_ERR_INVALID_ARGUMENT = 4,
    TF_ERR_INTERNAL = 5
} tf_status;

typedef enum tf_stage {
    TF_STAGE_PHANTOM = 0,
    TF_STAGE_HARP = 1,
    TF_STAGE_REGISTER = 2,
    TF_STAGE_EVALUATE = 3,
    TF_STAGE_PIPELINE = 4
} tf_stage;

typedef struct tf_run_options {
    const char* out_dir; /* NULL: output.dir from the config */
    int jobs;            /* worker threads, >= 1 */
    int trace;           /* nonzero: write per-registration trace CSVs */
} tf_run_options;

TF_API const char* tf_version(void);

/* Message for the last failing call on this thread; "" after success. */
TF_API const char* tf_last_error(void);

TF_API tf_status tf_config_default(tf_config** out);
TF_API tf_status tf_config_load(const char* path, tf_config** out);
TF_API tf_status tf_config_parse(const char* text, tf_config** out);
TF_API tf_status tf_config_set(tf_config* config, const char* key, const char* value);
/* Copies the value (NUL-terminated) into buf when it fits; *needed always
   receives the size including the terminator. */
TF_API tf_status tf_config_get(const tf_config* config, const char* key, char* buf, size_t cap, size_t* needed);
TF_API tf_status tf_config_serialize(const tf_config* config, char* buf, size_t cap, size_t* needed);
/* 16 hex digits plus terminator. */
TF_API tf_status tf_config_hash(const tf_config* config, char out[17]);
TF_API void tf_config_free(tf_config* config);

TF_API void tf_run_options_init(tf_run_options* options);
/* TF_STAGE_REGISTER stores the number of registrations in *register_calls
   when it is non-NULL; other stages leave it alone. */
TF_API tf_status tf_run_stage(const tf_config* config, tf_stage stage, const tf_run_options* options,
                              int* register_calls);

TF_API tf_status tf_volume_read(const char* path, tf_volume** out);
TF_API tf_status tf_volume_write(const tf_volume* volume, const char* path);
TF_API tf_status tf_volume_dims(const tf_volume* volume, int dims[3], double spacing[3], double origin[3]);
/* 1 for scalar volumes, 3 for vector volumes, 0 for NULL. */
TF_API int tf_volume_components(const tf_volume* volume);
/* Copies components * voxels doubles, x fastest, vector components interleaved. */
TF_API tf_status tf_volume_copy_data(const tf_volume* volume, double* out, size_t count);
TF_API void tf_volume_free(tf_volume* volume);

#ifdef __cplusplus
}
#endif

#endif
