#ifndef SAFEPLC_H
#define SAFEPLC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SafeplcError {
  SAFEPLC_ERROR_OK = 0,
  SAFEPLC_ERROR_NULL_ARGUMENT = 1,
  SAFEPLC_ERROR_INVALID_UTF8 = 2,
  SAFEPLC_ERROR_PARSE = 3,
  SAFEPLC_ERROR_TYPECHECK = 4,
  SAFEPLC_ERROR_PROVE = 5,
  SAFEPLC_ERROR_COMPILE = 6,
  SAFEPLC_ERROR_LINK = 7,
  SAFEPLC_ERROR_INTEGRITY = 8,
  SAFEPLC_ERROR_WCET = 9,
  /**
   * The platform is latched in panic mode; only a reset helps.
   */
  SAFEPLC_ERROR_PANICKED = 10,
  SAFEPLC_ERROR_BAD_ARGUMENT = 11,
  SAFEPLC_ERROR_INTERNAL = 12,
} SafeplcError;

/**
 * Bytes produced by the library, such as a linked bundle.
 */
typedef struct SafeplcBytes SafeplcBytes;

/**
 * An integrity-checked firmware bundle.
 */
typedef struct SafeplcFirmware SafeplcFirmware;

/**
 * A simulated dual-MCU board running one firmware.
 */
typedef struct SafeplcPlatform SafeplcPlatform;

typedef struct SafeplcCycleStatus {
  /**
   * Next cycle to run, or the panicking cycle.
   */
  uint64_t cycle;
  bool panicked;
} SafeplcCycleStatus;

/**
 * Copies the last error message, NUL-terminated, into `buf`. Returns the
 * length the message needs including the terminator, so a call with
 * `len == 0` sizes the buffer.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null with `len == 0`.
 */
size_t safeplc_last_error(char *buf, size_t len);

/**
 * Runs the whole pipeline on B0 source text and returns the bundle.
 * Unproven obligations are accepted only with `allow_unproven`; a
 * counterexample always fails with [`SafeplcError::Prove`].
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` writable.
 */
enum SafeplcError safeplc_build(const char *source, bool allow_unproven, struct SafeplcBytes **out);

/**
 * # Safety
 * `bytes` must come from this library.
 */
const uint8_t *safeplc_bytes_data(const struct SafeplcBytes *bytes);

/**
 * # Safety
 * `bytes` must come from this library.
 */
size_t safeplc_bytes_len(const struct SafeplcBytes *bytes);

/**
 * # Safety
 * `bytes` must come from this library or be null.
 */
void safeplc_bytes_free(struct SafeplcBytes *bytes);

/**
 * Checks and loads a bundle.
 *
 * # Safety
 * `data` must be valid for `len` bytes and `out` writable.
 */
enum SafeplcError safeplc_firmware_load(const uint8_t *data,
                                        size_t len,
                                        struct SafeplcFirmware **out);

/**
 * CRC-32 of the whole bundle the firmware was loaded from.
 *
 * # Safety
 * `fw` must come from this library.
 */
uint32_t safeplc_firmware_crc(const struct SafeplcFirmware *fw);

/**
 * Static cycle-cost bound of the bytecode image under the default costs.
 *
 * # Safety
 * `fw` must come from this library and `out` be writable.
 */
enum SafeplcError safeplc_firmware_wcet(const struct SafeplcFirmware *fw, uint64_t *out);

/**
 * # Safety
 * `fw` must come from this library or be null.
 */
void safeplc_firmware_free(struct SafeplcFirmware *fw);

/**
 * Boots a platform. The firmware handle stays owned by the caller. A
 * platform whose INIT traps is returned already panicked.
 *
 * # Safety
 * `fw` must come from this library and `out` be writable.
 */
enum SafeplcError safeplc_platform_new(const struct SafeplcFirmware *fw,
                                       struct SafeplcPlatform **out);

/**
 * # Safety
 * `p` must come from this library or be null.
 */
void safeplc_platform_free(struct SafeplcPlatform *p);

/**
 * # Safety
 * `p` must come from this library.
 */
size_t safeplc_platform_input_count(const struct SafeplcPlatform *p);

/**
 * # Safety
 * `p` must come from this library.
 */
size_t safeplc_platform_output_count(const struct SafeplcPlatform *p);

/**
 * # Safety
 * `p` must come from this library and `out` be writable.
 */
enum SafeplcError safeplc_platform_status(const struct SafeplcPlatform *p,
                                          struct SafeplcCycleStatus *out);

/**
 * Runs one cycle. `levels` and `pulses` hold one entry per input, in
 * declaration order. A cycle that ends in panic still returns
 * [`SafeplcError::Ok`] with `panicked` set; stepping a panicked platform
 * fails with [`SafeplcError::Panicked`].
 *
 * # Safety
 * `levels` and `pulses` must be valid for `n` elements (or null with
 * `n == 0`), `out` writable or null.
 */
enum SafeplcError safeplc_platform_step(struct SafeplcPlatform *p,
                                        const uint8_t *levels,
                                        const uint64_t *pulses,
                                        size_t n,
                                        struct SafeplcCycleStatus *out);

/**
 * Physical level of output `index`: 1 only when both MCUs drive it.
 *
 * # Safety
 * `p` must come from this library and `out` be writable.
 */
enum SafeplcError safeplc_platform_output(const struct SafeplcPlatform *p,
                                          size_t index,
                                          uint8_t *out);

/**
 * Hard reset: reboots from the loaded firmware and clears panic mode.
 *
 * # Safety
 * `p` must come from this library.
 */
enum SafeplcError safeplc_platform_reset(struct SafeplcPlatform *p);

/**
 * Stops MCU `mcu` (1 or 2).
 *
 * # Safety
 * `p` must come from this library.
 */
enum SafeplcError safeplc_inject_halt(struct SafeplcPlatform *p, uint8_t mcu_id);

/**
 * Flips one bit of canonical state cell `slot` in image 0 (A) or 1 (B).
 *
 * # Safety
 * `p` must come from this library.
 */
enum SafeplcError safeplc_inject_var_flip(struct SafeplcPlatform *p,
                                          uint8_t mcu_id,
                                          uint8_t image_id,
                                          size_t slot,
                                          uint32_t bit);

/**
 * XORs program byte `offset` of image 0 (A) or 1 (B) with `mask`.
 *
 * # Safety
 * `p` must come from this library.
 */
enum SafeplcError safeplc_inject_program_flip(struct SafeplcPlatform *p,
                                              uint8_t mcu_id,
                                              uint8_t image_id,
                                              size_t offset,
                                              uint8_t mask);

/**
 * Freezes the pulse counter of input `index`.
 *
 * # Safety
 * `p` must come from this library.
 */
enum SafeplcError safeplc_inject_freeze_pulse(struct SafeplcPlatform *p, size_t index);

#endif  /* SAFEPLC_H */
