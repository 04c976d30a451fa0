/* C API for loading and evaluating trained varqnn models. */

#ifndef VARQNN_H
#define VARQNN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes, mirroring the CLI exit codes. */
#define VARQNN_OK 0
#define VARQNN_ERR_VALIDATION 1
#define VARQNN_ERR_NUMERIC 2
#define VARQNN_ERR_IO 3
/* Null pointer or malformed string argument. */
#define VARQNN_ERR_ARGUMENT 4

/* Opaque handle to a loaded model. */
typedef struct VarqnnModel VarqnnModel;

/*
 * Copy the message for the current thread's most recent error into buf
 * (NUL-terminated, truncated to cap bytes). Returns the full message
 * length in bytes, excluding the terminator. buf may be NULL to query
 * the length.
 */
size_t varqnn_last_error(char *buf, size_t cap);

/*
 * Load a model file written by the train command. Returns NULL on
 * failure; see varqnn_last_error for the reason.
 */
VarqnnModel *varqnn_model_load(const char *path);

/* Release a handle returned by varqnn_model_load. NULL is a no-op. */
void varqnn_model_free(VarqnnModel *handle);

/* Number of input features the model expects, or -1 for a NULL handle. */
int32_t varqnn_model_n_features(const VarqnnModel *handle);

/*
 * Exact model output and outcome variance at input x (x_len doubles).
 * Returns a status code.
 */
int32_t varqnn_model_evaluate(const VarqnnModel *handle, const double *x,
                              size_t x_len, double *out_value,
                              double *out_variance);

/* Shot-sampled model output; deterministic for a given seed. */
int32_t varqnn_model_evaluate_shots(const VarqnnModel *handle, const double *x,
                                    size_t x_len, uint64_t shots,
                                    uint64_t seed, double *out_value,
                                    double *out_variance);

/*
 * Tabulate the single-qubit encoding curve T_phi over grid, writing len
 * values to out.
 */
int32_t varqnn_chebyshev(double phi, const double *grid, size_t len,
                         double *out);

#ifdef __cplusplus
}
#endif

#endif /* VARQNN_H */
