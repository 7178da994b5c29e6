#ifndef ROMKIT_ROMKIT_H
#define ROMKIT_ROMKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(ROMKIT_BUILDING_LIBRARY)
#define ROMKIT_API __attribute__((visibility("default")))
#else
#define ROMKIT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. ROMKIT_OK is zero; every failure also records a message
 * retrievable with romkit_last_error() on the calling thread. */
typedef enum romkit_status {
  ROMKIT_OK = 0,
  ROMKIT_CONTRACT_VIOLATION = 1,
  ROMKIT_CONFIGURATION = 2,
  ROMKIT_NUMERICAL_DOMAIN = 3,
  ROMKIT_INTEGRATION_BLOWUP = 4,
  ROMKIT_STEADY_STATE_FAILURE = 5,
  ROMKIT_NUMERICAL = 6,
  ROMKIT_DIVERGENCE = 7,
  ROMKIT_FILTER_DIVERGENCE = 8,
  ROMKIT_SINGULAR_UPDATE = 9,
  ROMKIT_MISSING_ARTIFACT = 10,
  ROMKIT_IO = 11,
  ROMKIT_INTERNAL = 12
} romkit_status;

typedef struct romkit_config romkit_config;
typedef struct romkit_plant romkit_plant;
typedef struct romkit_basis romkit_basis;
typedef struct romkit_mlp romkit_mlp;

ROMKIT_API const char* romkit_version(void);
/* Stable snake_case category name, e.g. "missing_artifact". */
ROMKIT_API const char* romkit_status_name(romkit_status status);
/* Message of the most recent failure on this thread, "" if none. */
ROMKIT_API const char* romkit_last_error(void);

/* Experiment configuration. */
ROMKIT_API romkit_status romkit_config_default(romkit_config** out);
ROMKIT_API romkit_status romkit_config_load(const char* path, romkit_config** out);
ROMKIT_API romkit_status romkit_config_set_seed(romkit_config* config, uint64_t seed);
ROMKIT_API romkit_status romkit_config_set_output_dir(romkit_config* config, const char* dir);
ROMKIT_API romkit_status romkit_config_set_filter(romkit_config* config, const char* filter);
ROMKIT_API romkit_status romkit_config_use_fast_profile(romkit_config* config);
/* Writes the canonical settings text into buf (NUL-terminated, truncated to
 * capacity); *needed receives the full length without the terminator. */
ROMKIT_API romkit_status romkit_config_describe(const romkit_config* config, char* buf, size_t capacity,
                                                size_t* needed);
ROMKIT_API void romkit_config_free(romkit_config* config);

/* Runs simulate, reduce, train, estimate, benchmark or report. */
ROMKIT_API romkit_status romkit_run(const romkit_config* config, const char* command);

/* Reference plant with default coefficients. States have length 103, inputs 3. */
ROMKIT_API romkit_status romkit_plant_create(romkit_plant** out);
ROMKIT_API size_t romkit_plant_state_dim(const romkit_plant* plant);
ROMKIT_API romkit_status romkit_plant_steady_state(const romkit_plant* plant, const double* u, double* x_out);
ROMKIT_API romkit_status romkit_plant_derivative(const romkit_plant* plant, const double* x, const double* u,
                                                 double* dx_out);
ROMKIT_API romkit_status romkit_plant_step(const romkit_plant* plant, const double* x, const double* u,
                                           double* x_out);
ROMKIT_API void romkit_plant_free(romkit_plant* plant);

/* Basis file written by the reduce command. */
ROMKIT_API romkit_status romkit_basis_load(const char* path, romkit_basis** out);
ROMKIT_API size_t romkit_basis_state_dim(const romkit_basis* basis);
ROMKIT_API size_t romkit_basis_order(const romkit_basis* basis);
/* Keeps the leading `order` modes. */
ROMKIT_API romkit_status romkit_basis_truncate(romkit_basis* basis, size_t order);
ROMKIT_API romkit_status romkit_basis_reduce(const romkit_basis* basis, const double* x, double* xi_out);
ROMKIT_API romkit_status romkit_basis_reconstruct(const romkit_basis* basis, const double* xi, double* x_out);
ROMKIT_API void romkit_basis_free(romkit_basis* basis);

/* Surrogate file written by the train command. */
ROMKIT_API romkit_status romkit_mlp_load(const char* path, romkit_mlp** out);
ROMKIT_API size_t romkit_mlp_order(const romkit_mlp* model);
ROMKIT_API romkit_status romkit_mlp_forward(const romkit_mlp* model, const double* xi, const double* u,
                                            double* xi_out);
/* Row-major r x r Jacobian with respect to xi. */
ROMKIT_API romkit_status romkit_mlp_jacobian(const romkit_mlp* model, const double* xi, const double* u,
                                             double* jac_out);
ROMKIT_API void romkit_mlp_free(romkit_mlp* model);

#ifdef __cplusplus
}
#endif

#endif
