#ifndef POPCOUNT_H
#define POPCOUNT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define POPCOUNT_FEATURE_POPCNT 1

#define POPCOUNT_FEATURE_SSSE3 (1 << 1)

#define POPCOUNT_FEATURE_AVX2 (1 << 2)

#define POPCOUNT_FEATURE_AVX512 (1 << 3)

/**
 * Result of every fallible call. Zero is success.
 */
typedef enum PopcountStatus {
  POPCOUNT_STATUS_OK = 0,
  POPCOUNT_STATUS_NULL_POINTER = 1,
  POPCOUNT_STATUS_INVALID_ARGUMENT = 2,
  POPCOUNT_STATUS_UNSUPPORTED_KERNEL = 3,
  POPCOUNT_STATUS_UNSUPPORTED_FEATURE = 4,
  POPCOUNT_STATUS_LENGTH_MISMATCH = 5,
  POPCOUNT_STATUS_INTERNAL = 6,
} PopcountStatus;

/**
 * Owned array of 64-bit words.
 */
typedef struct PopcountBitset PopcountBitset;

/**
 * Intersection and union counts of two bitsets plus their Jaccard index.
 */
typedef struct PopcountSimilarity {
  uint64_t intersection_count;
  uint64_t union_count;
  /**
   * 1.0 when both bitsets are empty.
   */
  double jaccard;
} PopcountSimilarity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies `len` bytes as little-endian words, zero-padding the last word.
 * Returns null if `data` is null while `len` is non-zero.
 *
 * # Safety
 * `data` must point to `len` readable bytes.
 */
struct PopcountBitset *popcount_bitset_from_bytes(const uint8_t *data, size_t len);

/**
 * Copies `len` 64-bit words.
 *
 * # Safety
 * `words` must point to `len` readable words.
 */
struct PopcountBitset *popcount_bitset_from_words(const uint64_t *words, size_t len);

/**
 * Number of 64-bit words held; 0 for a null handle.
 *
 * # Safety
 * `bitset` must be null or a live handle.
 */
size_t popcount_bitset_len_words(const struct PopcountBitset *bitset);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `bitset` must be null or a handle not yet freed.
 */
void popcount_bitset_free(struct PopcountBitset *bitset);

/**
 * Counts one-bits with the kernel chosen for this CPU and input size.
 *
 * # Safety
 * `bitset` must be a live handle and `count` writable.
 */
enum PopcountStatus popcount_count(const struct PopcountBitset *bitset, uint64_t *count);

/**
 * Like [`popcount_count`] but forces `kernel` (e.g. "wwg", "avx2-hs")
 * unless it is null.
 *
 * # Safety
 * `bitset` must be a live handle, `kernel` null or a NUL-terminated
 * string, and `count` writable.
 */
enum PopcountStatus popcount_count_with_kernel(const struct PopcountBitset *bitset,
                                               const char *kernel,
                                               uint64_t *count);

/**
 * Counts one-bits of a caller-owned word array without making a handle.
 *
 * # Safety
 * `words` must point to `len` readable words and `count` be writable.
 */
enum PopcountStatus popcount_count_words(const uint64_t *words, size_t len, uint64_t *count);

/**
 * Fused intersection and union counts in one pass.
 *
 * # Safety
 * `a` and `b` must be live handles and `result` writable.
 */
enum PopcountStatus popcount_jaccard(const struct PopcountBitset *a,
                                     const struct PopcountBitset *b,
                                     struct PopcountSimilarity *result);

/**
 * Like [`popcount_jaccard`] but forces a Jaccard kernel (e.g.
 * "jaccard-popcnt") unless `kernel` is null.
 *
 * # Safety
 * As for [`popcount_jaccard`]; `kernel` must be null or NUL-terminated.
 */
enum PopcountStatus popcount_jaccard_with_kernel(const struct PopcountBitset *a,
                                                 const struct PopcountBitset *b,
                                                 const char *kernel,
                                                 struct PopcountSimilarity *result);

/**
 * Number of bits set in both `a` and `b`.
 *
 * # Safety
 * `a` and `b` must be live handles and `count` writable.
 */
enum PopcountStatus popcount_intersection_count(const struct PopcountBitset *a,
                                                const struct PopcountBitset *b,
                                                uint64_t *count);

/**
 * Number of bits set in `a` or `b`.
 *
 * # Safety
 * `a` and `b` must be live handles and `count` writable.
 */
enum PopcountStatus popcount_union_count(const struct PopcountBitset *a,
                                         const struct PopcountBitset *b,
                                         uint64_t *count);

/**
 * Bitmask of `POPCOUNT_FEATURE_*` flags usable on this CPU.
 */
uint32_t popcount_cpu_features(void);

/**
 * Writes the name of the count kernel selected for `len_bytes` of input
 * into `buf` (NUL-terminated, truncated to `buf_len`). Returns the full
 * name length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or point to `buf_len` writable bytes.
 */
size_t popcount_selected_kernel(size_t len_bytes, char *buf, size_t buf_len);

/**
 * Whether `name` is a runnable kernel of either kind on this CPU.
 *
 * # Safety
 * `name` must be null or NUL-terminated.
 */
bool popcount_kernel_available(const char *name);

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *popcount_last_error(void);

/**
 * Static, NUL-terminated name of a status code.
 */
const char *popcount_status_name(enum PopcountStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POPCOUNT_H */
