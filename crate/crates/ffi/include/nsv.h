#ifndef NSV_H
#define NSV_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NsvStatus {
  NSV_STATUS_OK = 0,
  NSV_STATUS_NULL_POINTER = 1,
  NSV_STATUS_INVALID_ARGUMENT = 2,
  NSV_STATUS_NOT_FOUND = 3,
  NSV_STATUS_IO = 4,
  NSV_STATUS_PARSE = 5,
  NSV_STATUS_FORMAT = 6,
  NSV_STATUS_UNKNOWN_SPEAKER = 7,
  NSV_STATUS_VALIDATION = 8,
  NSV_STATUS_INSUFFICIENT_DATA = 9,
  NSV_STATUS_DIVERGENCE = 10,
  NSV_STATUS_PANIC = 99,
} NsvStatus;

/*
 Synthesized mono audio.
 */
typedef struct NsvAudio NsvAudio;

/*
 Pipeline configuration handle.
 */
typedef struct NsvConfig NsvConfig;

/*
 A loaded checkpoint ready to synthesize.
 */
typedef struct NsvSynthesizer NsvSynthesizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, static storage.
 */
const char *nsv_version(void);

/*
 Message of the last failed call on this thread ("" after a success).
 Valid until the next nsv call on the same thread.
 */
const char *nsv_last_error(void);

/*
 Default configuration. Never null.
 */
struct NsvConfig *nsv_config_new(void);

/*
 Loads a key=value config file into `*out`.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum NsvStatus nsv_config_load(const char *path, struct NsvConfig **out);

/*
 Sets one config key; unknown keys fail with `NSV_STATUS_INVALID_ARGUMENT`.

 # Safety
 `cfg` must come from this library; strings must be NUL-terminated.
 */
enum NsvStatus nsv_config_set(struct NsvConfig *cfg, const char *key, const char *value);

/*
 # Safety
 `cfg` must come from this library and not be used afterwards. Null is ignored.
 */
void nsv_config_free(struct NsvConfig *cfg);

/*
 Writes the synthetic corpus into the configured corpus directory.

 # Safety
 `cfg` must come from this library.
 */
enum NsvStatus nsv_gen_corpus(const struct NsvConfig *cfg);

/*
 Builds the dataset directory from the corpus.

 # Safety
 `cfg` must come from this library.
 */
enum NsvStatus nsv_prepare(const struct NsvConfig *cfg);

/*
 Trains on the prepared dataset and writes the checkpoint.

 # Safety
 `cfg` must come from this library.
 */
enum NsvStatus nsv_train(const struct NsvConfig *cfg);

/*
 Loads a checkpoint (the configured one when `checkpoint` is null).

 # Safety
 `cfg` must come from this library; `checkpoint` null or NUL-terminated;
 `out` writable.
 */
enum NsvStatus nsv_synthesizer_open(const struct NsvConfig *cfg,
                                    const char *checkpoint,
                                    struct NsvSynthesizer **out);

/*
 # Safety
 `s` must come from this library. Returns 0 for null.
 */
uintptr_t nsv_synthesizer_speaker_count(const struct NsvSynthesizer *s);

/*
 Speaker id `index`, owned by the handle; null when out of range.

 # Safety
 `s` must come from this library.
 */
const char *nsv_synthesizer_speaker_id(const struct NsvSynthesizer *s, uintptr_t index);

/*
 Renders pseudo-phoneme `text` under `speaker` with predicted durations.

 # Safety
 `s` must come from this library; strings NUL-terminated; `out` writable.
 */
enum NsvStatus nsv_synthesize_text(const struct NsvSynthesizer *s,
                                   const char *text,
                                   const char *speaker,
                                   uint64_t noise_seed,
                                   struct NsvAudio **out);

/*
 # Safety
 `s` must come from this library and not be used afterwards. Null is ignored.
 */
void nsv_synthesizer_free(struct NsvSynthesizer *s);

/*
 # Safety
 `a` must come from this library. Returns 0 for null.
 */
uintptr_t nsv_audio_len(const struct NsvAudio *a);

/*
 # Safety
 `a` must come from this library. Returns 0 for null.
 */
uint32_t nsv_audio_sample_rate(const struct NsvAudio *a);

/*
 Samples in [-1, 1], `nsv_audio_len` of them, owned by the handle.

 # Safety
 `a` must come from this library. Returns null for null.
 */
const float *nsv_audio_samples(const struct NsvAudio *a);

/*
 Writes 16-bit PCM WAV.

 # Safety
 `a` must come from this library; `path` NUL-terminated.
 */
enum NsvStatus nsv_audio_write_wav(const struct NsvAudio *a, const char *path);

/*
 # Safety
 `a` must come from this library and not be used afterwards. Null is ignored.
 */
void nsv_audio_free(struct NsvAudio *a);

/*
 Encodes unit indices as pseudo-phoneme text; free with `nsv_string_free`.

 # Safety
 `units` must point to `len` values (may be null when `len` is 0); `out` writable.
 */
enum NsvStatus nsv_units_to_text(const uint16_t *units, uintptr_t len, char **out);

/*
 Decodes pseudo-phoneme text into unit indices; free with `nsv_units_free`.

 # Safety
 `text` NUL-terminated; `out_units` and `out_len` writable.
 */
enum NsvStatus nsv_text_to_units(const char *text, uint16_t **out_units, uintptr_t *out_len);

/*
 # Safety
 `s` must come from `nsv_units_to_text`. Null is ignored.
 */
void nsv_string_free(char *s);

/*
 # Safety
 `units`/`len` must come from `nsv_text_to_units`. Null is ignored.
 */
void nsv_units_free(uint16_t *units, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NSV_H */
