/* Generated by cbindgen from crates/ffi. Do not edit. */

#ifndef INTENBOT_H
#define INTENBOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IbModality {
  IB_MODALITY_GAZE = 0,
  IB_MODALITY_THUMB_LEFT = 1,
  IB_MODALITY_THUMB_RIGHT = 2,
  IB_MODALITY_INDEX_LEFT = 3,
  IB_MODALITY_INDEX_RIGHT = 4,
} IbModality;

typedef enum IbPhase {
  IB_PHASE_IDLE = 0,
  IB_PHASE_RECORDING = 1,
  IB_PHASE_DISPATCHED = 2,
  IB_PHASE_PRESENTING = 3,
  IB_PHASE_CONFIRMED = 4,
  IB_PHASE_ABANDONED = 5,
} IbPhase;

typedef enum IbRingEvent {
  IB_RING_EVENT_TOUCH = 0,
  IB_RING_EVENT_PRESS = 1,
  IB_RING_EVENT_RELEASE = 2,
} IbRingEvent;

typedef enum IbStatus {
  IB_STATUS_OK = 0,
  IB_STATUS_NULL_ARGUMENT = 1,
  IB_STATUS_INVALID_UTF8 = 2,
  IB_STATUS_INVALID_INPUT = 3,
  IB_STATUS_PROTOCOL = 4,
  IB_STATUS_NO_SNAPSHOT = 5,
  IB_STATUS_RETRY_EXHAUSTED = 6,
  IB_STATUS_SCENE_TOO_SMALL = 7,
  IB_STATUS_RESOLVER_TIMEOUT = 8,
  IB_STATUS_RESOLVER_PROTOCOL = 9,
  IB_STATUS_PLAN = 10,
  IB_STATUS_PANIC = 11,
} IbStatus;

// Opaque scene handle.
typedef struct IbScene IbScene;

// Opaque interaction session. Holds its own reference to the scene.
typedef struct IbSession IbSession;

// Cone sizes in degrees; pass NULL wherever accepted for the defaults (14, 11, 2.8, 8).
typedef struct IbAngles {
  double gaze_range;
  double point_range;
  double gaze_high;
  double point_high;
} IbAngles;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the next failing
// call on the same thread; do not free.
const char *ib_last_error_message(void);

// Release a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void ib_string_free(char *s);

// Library version, static storage.
const char *ib_version(void);

// Parse and validate a scene document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum IbStatus ib_scene_load(const char *json, struct IbScene **out);

// # Safety
// `scene` must come from `ib_scene_load` and not have been freed. NULL is ignored.
void ib_scene_free(struct IbScene *scene);

// Number of objects, or 0 for NULL.
//
// # Safety
// `scene` must be NULL or a live scene handle.
size_t ib_scene_object_count(const struct IbScene *scene);

// Angle in degrees between a ray and the direction to `point`. Vectors are 3 doubles.
//
// # Safety
// Pointer arguments must reference three readable doubles; `out_deg` must be writable.
enum IbStatus ib_angular_offset(const double *origin,
                                const double *direction,
                                const double *point,
                                double *out_deg);

// Objects inside the modality's cone as a JSON array of possible objects, best first.
//
// # Safety
// `scene` must be a live handle; vectors reference three doubles; `angles` may be NULL;
// `out_json` must be writable and receives a string to release with `ib_string_free`.
enum IbStatus ib_resolve_ray(const struct IbScene *scene,
                             const double *origin,
                             const double *direction,
                             enum IbModality modality_kind,
                             const struct IbAngles *angles,
                             char **out_json);

// Start a session over `scene` with the baseline resolver. The scene handle may be freed
// afterwards.
//
// # Safety
// `scene` must be a live handle; `angles` may be NULL; `out` must be writable.
enum IbStatus ib_session_new(const struct IbScene *scene,
                             const struct IbAngles *angles,
                             struct IbSession **out);

// # Safety
// `session` must come from `ib_session_new` and not have been freed. NULL is ignored.
void ib_session_free(struct IbSession *session);

// Record the latest head, gaze and finger pose (snapshot JSON). The next press, or a
// press-free release, captures it.
//
// # Safety
// `session` must be a live handle; `snapshot_json` a NUL-terminated string.
enum IbStatus ib_session_pose(struct IbSession *session, const char *snapshot_json);

// Feed one ring event at monotonic time `t_ms`.
//
// # Safety
// `session` must be a live handle.
enum IbStatus ib_session_event(struct IbSession *session, enum IbRingEvent event, uint64_t t_ms);

// # Safety
// `session` must be a live handle; `text` a NUL-terminated string.
enum IbStatus ib_session_set_transcript(struct IbSession *session, const char *text);

// Resolve the dispatched command into nine candidates (JSON candidate set) and start
// presenting them.
//
// # Safety
// `session` must be a live handle; `out_json` writable; release the result with
// `ib_string_free`.
enum IbStatus ib_session_resolve(struct IbSession *session, char **out_json);

// Confirm the candidate at `rank` (1..=9) and return its behavior-tree XML.
//
// # Safety
// `session` must be a live handle; `out_xml` writable; release the result with
// `ib_string_free`.
enum IbStatus ib_session_confirm(struct IbSession *session, uint8_t rank, char **out_xml);

// Reject the presented candidates. `out_retries_used` (may be NULL) receives the count.
// The third retry abandons the session and returns `IB_STATUS_RETRY_EXHAUSTED`.
//
// # Safety
// `session` must be a live handle; `out_retries_used` NULL or writable.
enum IbStatus ib_session_retry(struct IbSession *session, uint8_t *out_retries_used);

// Current phase; `IB_PHASE_ABANDONED` for NULL.
//
// # Safety
// `session` must be NULL or a live handle.
enum IbPhase ib_session_phase(const struct IbSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTENBOT_H */
