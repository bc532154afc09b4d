/* C interface to the reldiag tuple relational calculus toolkit. */

#ifndef RELDIAG_H
#define RELDIAG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum RdStatus {
  /**
   * Success.
   */
  RD_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RD_NULL_POINTER = 1,
  /**
   * An input string was not valid UTF-8.
   */
  RD_UTF8_ERROR = 2,
  /**
   * Query text did not parse.
   */
  RD_PARSE_ERROR = 3,
  /**
   * The query is outside the fragment the operation needs.
   */
  RD_FRAGMENT_ERROR = 4,
  /**
   * Translation between query and diagram failed.
   */
  RD_TRANSLATE_ERROR = 5,
  /**
   * The diagram document is malformed or inconsistent.
   */
  RD_INVALID_DIAGRAM = 6,
  /**
   * Rendering failed.
   */
  RD_RENDER_ERROR = 7,
  /**
   * An unexpected internal failure.
   */
  RD_INTERNAL_ERROR = 8,
} RdStatus;

/**
 * Opaque handle to a diagram document.
 */
typedef struct RdDiagram RdDiagram;

/**
 * Opaque handle to a parsed query.
 */
typedef struct RdQuery RdQuery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer is
 * valid until the next failing call on the same thread; do not free it.
 */
const char *rd_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void rd_string_free(char *s);

/**
 * Parse query text into a handle.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be a valid pointer.
 */
enum RdStatus rd_query_parse(const char *text, struct RdQuery **out);

/**
 * Release a query handle.
 *
 * # Safety
 * `q` must come from this library and must not be used afterwards.
 */
void rd_query_free(struct RdQuery *q);

/**
 * Render a query back to normalized text.
 *
 * # Safety
 * `q` must be a live handle; `out` must be a valid pointer.
 */
enum RdStatus rd_query_pretty(const struct RdQuery *q, char **out);

/**
 * Check the syntactic safety conditions. On success `*out_safe` is 1 for a
 * safe query and 0 otherwise, and `*out_report` (if non-null) receives a
 * human-readable report listing the violated condition numbers.
 *
 * # Safety
 * `q` must be a live handle; `out_safe` must be a valid pointer.
 */
enum RdStatus rd_query_check_safety(const struct RdQuery *q, int32_t *out_safe, char **out_report);

/**
 * Rewrite `forall` and `->` away (existential fragment, same atoms).
 *
 * # Safety
 * `q` must be a live handle; `out` must be a valid pointer.
 */
enum RdStatus rd_query_remove_forall_implies(const struct RdQuery *q, struct RdQuery **out);

/**
 * Rewrite `or` away via De Morgan (conjunctive fragment, same atoms).
 *
 * # Safety
 * `q` must be a live handle; `out` must be a valid pointer.
 */
enum RdStatus rd_query_remove_disjunction(const struct RdQuery *q, struct RdQuery **out);

/**
 * Rewrite comparison predicates into scope-anchored built-in relations.
 *
 * # Safety
 * `q` must be a live handle; `out` must be a valid pointer.
 */
enum RdStatus rd_query_to_builtin_form(const struct RdQuery *q, struct RdQuery **out);

/**
 * Translate a query into a diagram. `representation_b` of 0 requires the
 * anchored built-in conjunctive form (apply `rd_query_to_builtin_form`
 * first); any other value enables the fuse-box and shortcut representation,
 * which also accepts disjunction.
 *
 * # Safety
 * `q` must be a live handle; `out` must be a valid pointer.
 */
enum RdStatus rd_query_to_diagram(const struct RdQuery *q,
                                  int32_t representation_b,
                                  struct RdDiagram **out);

/**
 * Release a diagram handle.
 *
 * # Safety
 * `d` must come from this library and must not be used afterwards.
 */
void rd_diagram_free(struct RdDiagram *d);

/**
 * Serialize a diagram as its JSON document.
 *
 * # Safety
 * `d` must be a live handle; `out` must be a valid pointer.
 */
enum RdStatus rd_diagram_to_json(const struct RdDiagram *d, char **out);

/**
 * Parse and validate a diagram JSON document.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be a valid pointer.
 */
enum RdStatus rd_diagram_from_json(const char *text, struct RdDiagram **out);

/**
 * Read a diagram back into a query.
 *
 * # Safety
 * `d` must be a live handle; `out` must be a valid pointer.
 */
enum RdStatus rd_diagram_to_query(const struct RdDiagram *d, struct RdQuery **out);

/**
 * Render a diagram as a deterministic SVG document. Nonzero `shading`
 * enables Peirce parity shading; nonzero `dotted` draws dotted connectors
 * between fuse-group members.
 *
 * # Safety
 * `d` must be a live handle; `out` must be a valid pointer.
 */
enum RdStatus rd_diagram_render_svg(const struct RdDiagram *d,
                                    int32_t shading,
                                    int32_t dotted,
                                    char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELDIAG_H */
