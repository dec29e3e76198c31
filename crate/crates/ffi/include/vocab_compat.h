#ifndef VOCAB_COMPAT_H
#define VOCAB_COMPAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum VcStatus {
  VC_STATUS_OK = 0,
  VC_STATUS_NULL_POINTER = 1,
  VC_STATUS_INVALID_UTF8 = 2,
  VC_STATUS_IO = 3,
  VC_STATUS_DATA = 4,
  VC_STATUS_NUMERIC = 5,
  VC_STATUS_USAGE = 6,
  VC_STATUS_BUFFER_TOO_SMALL = 7,
  VC_STATUS_PANIC = 8,
} VcStatus;

typedef struct VcCorpus VcCorpus;

typedef struct VcEmbedding VcEmbedding;

typedef struct VcProfile VcProfile;

typedef struct VcVocab VcVocab;

// Embedding hyperparameters; see `vc_embed_config_default`.
typedef struct VcEmbedConfig {
  size_t dim;
  size_t window;
  size_t negatives;
  size_t epochs;
  double learning_rate;
  double subsample;
  size_t threads;
} VcEmbedConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`) and returns the full message length
// excluding the terminator; 0 when there is no error.
size_t vc_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *vc_version(void);

enum VcStatus vc_corpus_load(const char *path,
                             const char *language_id,
                             bool nfc,
                             struct VcCorpus **out_corpus);

// Parses `unit_id<TAB>text` lines from a memory buffer.
enum VcStatus vc_corpus_from_tsv(const uint8_t *data,
                                 size_t len,
                                 const char *language_id,
                                 struct VcCorpus **out_corpus);

// Fake-language copy of a corpus: every word gains `marker` as a prefix.
enum VcStatus vc_corpus_fake(const struct VcCorpus *corpus,
                             const char *marker,
                             struct VcCorpus **out_corpus);

enum VcStatus vc_corpus_len(const struct VcCorpus *corpus, size_t *out_len);

// `1 + 2 * |alphabet|`.
enum VcStatus vc_corpus_min_vocab_size(const struct VcCorpus *corpus, size_t *out_size);

void vc_corpus_free(struct VcCorpus *corpus);

// Trains a vocabulary of at most `target_size` tokens with default settings.
enum VcStatus vc_vocab_train(const struct VcCorpus *corpus,
                             size_t target_size,
                             struct VcVocab **out_vocab);

enum VcStatus vc_vocab_load(const char *path, struct VcVocab **out_vocab);

enum VcStatus vc_vocab_save(const struct VcVocab *vocab, const char *path);

enum VcStatus vc_vocab_len(const struct VcVocab *vocab, size_t *out_len);

// Encodes `text` into token ids.
enum VcStatus vc_vocab_encode(const struct VcVocab *vocab,
                              const char *text,
                              uint32_t *ids,
                              size_t capacity,
                              size_t *out_len);

// Total tokens when the whole corpus is encoded.
enum VcStatus vc_vocab_token_count(const struct VcVocab *vocab,
                                   const struct VcCorpus *corpus,
                                   uint64_t *out_count);

void vc_vocab_free(struct VcVocab *vocab);

// Trains once up to `n_max`; rates at any smaller size are then cheap.
enum VcStatus vc_profile_build(const struct VcCorpus *corpus,
                               size_t n_max,
                               struct VcProfile **out_profile);

enum VcStatus vc_profile_n_min(const struct VcProfile *profile, size_t *out_n);

enum VcStatus vc_profile_acr(const struct VcProfile *profile, size_t n, double *out_rate);

enum VcStatus vc_profile_rcr(const struct VcProfile *profile, size_t n, double *out_rate);

enum VcStatus vc_profile_asymptote(const struct VcProfile *profile, double *out_a);

void vc_profile_free(struct VcProfile *profile);

// Least-squares beta from `len` samples `(sizes[i], rates[i])`.
enum VcStatus vc_fit_beta(const size_t *sizes,
                          const double *rates,
                          size_t len,
                          double a,
                          size_t n_min,
                          double *out_beta);

// Smallest integer size whose modelled rate reaches `target_rate`.
enum VcStatus vc_invert_model(double beta,
                              double a,
                              size_t n_min,
                              double target_rate,
                              size_t *out_size);

struct VcEmbedConfig vc_embed_config_default(void);

enum VcStatus vc_embedding_train(const struct VcCorpus *corpus,
                                 const struct VcVocab *vocab,
                                 struct VcEmbedConfig config,
                                 uint64_t seed,
                                 struct VcEmbedding **out_embedding);

enum VcStatus vc_embedding_load(const char *path, struct VcEmbedding **out_embedding);

enum VcStatus vc_embedding_save(const struct VcEmbedding *embedding, const char *path);

enum VcStatus vc_embedding_shape(const struct VcEmbedding *embedding,
                                 size_t *out_rows,
                                 size_t *out_cols);

// Descending singular values; there are `min(rows, cols)` of them.
enum VcStatus vc_embedding_singular_values(const struct VcEmbedding *embedding,
                                           double *values,
                                           size_t capacity,
                                           size_t *out_len);

void vc_embedding_free(struct VcEmbedding *embedding);

// Singular value gap over the first `k` values of two descending spectra.
enum VcStatus vc_svg(const double *left,
                     size_t left_len,
                     const double *right,
                     size_t right_len,
                     size_t k,
                     double *out_gap);

enum VcStatus vc_pearson(const double *x, const double *y, size_t len, double *out_r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOCAB_COMPAT_H */
