#ifndef QCORR_H
#define QCORR_H

/* Generated by cbindgen from qcorr-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Non-zero codes leave a human-readable
// message retrievable through `qcorr_last_error`.
typedef enum QcorrStatus {
  // Success.
  QCORR_STATUS_OK = 0,
  // Malformed input: bad JSON, unknown identifiers, invalid requests.
  QCORR_STATUS_INVALID_INPUT = 2,
  // A numerical guard tripped during an otherwise valid computation.
  QCORR_STATUS_NUMERICAL_GUARD = 3,
  // A required pointer argument was null.
  QCORR_STATUS_NULL_ARGUMENT = 4,
  // A string argument was not valid UTF-8.
  QCORR_STATUS_INVALID_UTF8 = 5,
  // An internal invariant failed; the process state is still sound.
  QCORR_STATUS_INTERNAL = 6,
} QcorrStatus;

// Opaque correlation engine holding cached factorizations.
typedef struct QcorrEngine QcorrEngine;

// Opaque validated system model.
typedef struct QcorrModel QcorrModel;

// One coherent drive tone for the multi-tone entry points.
typedef struct QcorrTone {
  // Channel index the tone enters through.
  size_t channel;
  // Real part of the relative coherent amplitude.
  double amplitude_re;
  // Imaginary part of the relative coherent amplitude.
  double amplitude_im;
  // Drive frequency.
  double frequency;
} QcorrTone;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *qcorr_version(void);

// Copy the last error message of this thread into `buf` (truncating to
// `cap - 1` bytes plus NUL) and return the full message length.
size_t qcorr_last_error(char *buf, size_t cap);

// Parse and validate a model from its JSON description.
enum QcorrStatus qcorr_model_from_json(const char *json, struct QcorrModel **out);

// Construct a named builtin model (see the library documentation for names).
enum QcorrStatus qcorr_model_builtin(const char *name, struct QcorrModel **out);

// Release a model handle. Passing null is a no-op.
void qcorr_model_free(struct QcorrModel *model);

// Resolve a channel id to its index.
enum QcorrStatus qcorr_model_channel_index(const struct QcorrModel *model,
                                           const char *id,
                                           size_t *out);

// Copy the model's canonical SHA-256 hex digest into `buf` (65 bytes are
// sufficient) and return the digest length.
size_t qcorr_model_sha256(const struct QcorrModel *model, char *buf, size_t cap);

// Create a correlation engine for a model. The engine keeps its own
// reference; the model handle may be freed independently.
enum QcorrStatus qcorr_engine_new(const struct QcorrModel *model, struct QcorrEngine **out);

// Release an engine handle. Passing null is a no-op.
void qcorr_engine_free(struct QcorrEngine *engine);

// Equal-time correlation `g⁽ⁿ⁾(0)` between distinct input and output
// channels under a single weak tone at `omega_d`. `undefined` (optional)
// reports dark points where the defining ratio degenerates; the value is
// NaN there.
enum QcorrStatus qcorr_etcf(const struct QcorrEngine *engine,
                            size_t order,
                            double omega_d,
                            size_t in_channel,
                            size_t out_channel,
                            double *value,
                            bool *undefined);

// Single-photon transmission between distinct channels.
enum QcorrStatus qcorr_transmission(const struct QcorrEngine *engine,
                                    double omega_d,
                                    size_t in_channel,
                                    size_t out_channel,
                                    double *value);

// Equal-time correlation of the driven channel itself (transmitted drive
// interfering with the re-emitted field).
enum QcorrStatus qcorr_etcf_same_channel(const struct QcorrEngine *engine,
                                         size_t order,
                                         double omega_d,
                                         size_t channel,
                                         double *value,
                                         bool *undefined);

// Transmission of the driven channel itself.
enum QcorrStatus qcorr_transmission_same_channel(const struct QcorrEngine *engine,
                                                 double omega_d,
                                                 size_t channel,
                                                 double *value);

// Equal-time correlation under several simultaneous tones, observed at time
// `t` (the value is `t`-independent when all tone frequencies agree).
enum QcorrStatus qcorr_etcf_multi(const struct QcorrEngine *engine,
                                  size_t order,
                                  const struct QcorrTone *tones,
                                  size_t n_tones,
                                  size_t out_channel,
                                  double t,
                                  double *value,
                                  bool *undefined);

// Transmission under several equal-frequency tones.
enum QcorrStatus qcorr_transmission_multi(const struct QcorrEngine *engine,
                                          const struct QcorrTone *tones,
                                          size_t n_tones,
                                          size_t out_channel,
                                          double *value,
                                          bool *undefined);

// Cross-correlation across `n_outputs` readout channels under a single tone
// entering `in_channel` (which must not be among the outputs).
enum QcorrStatus qcorr_cross_correlation(const struct QcorrEngine *engine,
                                         const size_t *outputs,
                                         size_t n_outputs,
                                         double omega_d,
                                         size_t in_channel,
                                         double *value,
                                         bool *undefined);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCORR_H */
