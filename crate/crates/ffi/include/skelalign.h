/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SKELALIGN_H
#define SKELALIGN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SkelalignAnchor {
  SKELALIGN_ANCHOR_MIN_Y = 0,
  SKELALIGN_ANCHOR_MAX_Y = 1,
} SkelalignAnchor;

/**
 * Per-joint outcome of an alignment.
 */
typedef enum SkelalignJointStatus {
  SKELALIGN_JOINT_STATUS_ALIGNED = 0,
  SKELALIGN_JOINT_STATUS_MISSING_IN_REF = 1,
  SKELALIGN_JOINT_STATUS_MISSING_IN_SUBJECT = 2,
  SKELALIGN_JOINT_STATUS_DEGENERATE = 3,
} SkelalignJointStatus;

typedef enum SkelalignStatus {
  SKELALIGN_STATUS_OK = 0,
  SKELALIGN_STATUS_NULL_POINTER = 1,
  SKELALIGN_STATUS_INVALID_UTF8 = 2,
  SKELALIGN_STATUS_PARSE = 3,
  SKELALIGN_STATUS_INVALID_ARGUMENT = 4,
  SKELALIGN_STATUS_REFERENCE_ROOT_MISSING = 5,
  SKELALIGN_STATUS_NO_COMMON_BONES = 6,
  SKELALIGN_STATUS_RENDER = 7,
  SKELALIGN_STATUS_INDEX_OUT_OF_RANGE = 8,
  SKELALIGN_STATUS_PANIC = 9,
} SkelalignStatus;

/**
 * Opaque alignment result.
 */
typedef struct SkelalignAlignment SkelalignAlignment;

/**
 * Opaque 18-joint skeleton.
 */
typedef struct SkelalignSkeleton SkelalignSkeleton;

/**
 * Bytes owned by the library. `len` excludes the trailing NUL that string
 * results carry.
 */
typedef struct SkelalignBuffer {
  uint8_t *data;
  uintptr_t len;
  uintptr_t capacity;
} SkelalignBuffer;

typedef struct SkelalignKeypoint {
  double x;
  double y;
  /**
   * 0 means the joint is missing.
   */
  double confidence;
} SkelalignKeypoint;

typedef struct SkelalignAlignConfig {
  double subject_scale;
  enum SkelalignAnchor anchor;
  /**
   * When true the aligned root is placed at (root_x, root_y) before the
   * vertical correction; otherwise at the reference root.
   */
  bool explicit_root;
  double root_x;
  double root_y;
} SkelalignAlignConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *skelalign_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on this thread.
 */
const char *skelalign_last_error(void);

void skelalign_buffer_free(struct SkelalignBuffer *buf);

/**
 * Empty skeleton (all joints missing) on a `width` x `height` canvas.
 */
enum SkelalignStatus skelalign_skeleton_new(uint32_t width,
                                            uint32_t height,
                                            struct SkelalignSkeleton **out);

/**
 * Parses person `person` from an OpenPose JSON document of `len` bytes.
 * `default_width` / `default_height` apply when the document has no canvas.
 */
enum SkelalignStatus skelalign_skeleton_from_openpose_json(const uint8_t *json,
                                                           uintptr_t len,
                                                           uint32_t default_width,
                                                           uint32_t default_height,
                                                           uintptr_t person,
                                                           struct SkelalignSkeleton **out);

void skelalign_skeleton_free(struct SkelalignSkeleton *skeleton);

enum SkelalignStatus skelalign_skeleton_set_joint(struct SkelalignSkeleton *skeleton,
                                                  uintptr_t index,
                                                  struct SkelalignKeypoint point);

enum SkelalignStatus skelalign_skeleton_get_joint(const struct SkelalignSkeleton *skeleton,
                                                  uintptr_t index,
                                                  struct SkelalignKeypoint *out);

/**
 * Serializes the skeleton as a one-person OpenPose document.
 */
enum SkelalignStatus skelalign_skeleton_to_openpose_json(const struct SkelalignSkeleton *skeleton,
                                                         struct SkelalignBuffer *out);

struct SkelalignAlignConfig skelalign_align_config_default(void);

/**
 * Aligns `reference` to the proportions of `subject` using the default
 * tree. `config` may be null for defaults.
 */
enum SkelalignStatus skelalign_retarget(const struct SkelalignSkeleton *reference,
                                        const struct SkelalignSkeleton *subject,
                                        const struct SkelalignAlignConfig *config,
                                        struct SkelalignAlignment **out);

void skelalign_alignment_free(struct SkelalignAlignment *alignment);

/**
 * Vertical offset applied by the correction step; NaN for a null handle.
 */
double skelalign_alignment_offset(const struct SkelalignAlignment *alignment);

/**
 * Joint `index` in 0..20 (18 and 19 are the shoulder and hip centers).
 * Either output pointer may be null.
 */
enum SkelalignStatus skelalign_alignment_joint(const struct SkelalignAlignment *alignment,
                                               uintptr_t index,
                                               struct SkelalignKeypoint *point,
                                               enum SkelalignJointStatus *status);

/**
 * Copies the aligned pose (virtual joints dropped) into a new skeleton.
 */
enum SkelalignStatus skelalign_alignment_skeleton(const struct SkelalignAlignment *alignment,
                                                  struct SkelalignSkeleton **out);

/**
 * Renders the skeleton to PNG. Zero for any size argument selects the
 * default (skeleton canvas, 4 px per 512 px strokes).
 */
enum SkelalignStatus skelalign_render_png(const struct SkelalignSkeleton *skeleton,
                                          uint32_t width,
                                          uint32_t height,
                                          uint32_t limb_thickness,
                                          uint32_t joint_radius,
                                          struct SkelalignBuffer *out);

/**
 * Replaces the first occurrence of `subject_phrase` in `caption` with
 * "`rare_token` `common_tokens`". The result is NUL-terminated.
 */
enum SkelalignStatus skelalign_apply_identifier(const char *caption,
                                                const char *subject_phrase,
                                                const char *rare_token,
                                                const char *common_tokens,
                                                struct SkelalignBuffer *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKELALIGN_H */
