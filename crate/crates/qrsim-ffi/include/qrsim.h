/* C interface to the qrsim simulator.
 *
 * Networks of quantum machines with classical message-driven scheduling:
 * parse a network-description document, run closed collections, project
 * views, and check witnessed security claims. Documents cross the
 * boundary as TOML text.
 *
 * Strings returned through out-parameters are owned by the caller and
 * must be released with qrsim_string_free.
 */

#ifndef QRSIM_H
#define QRSIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes. */
#define QRSIM_OK 0
#define QRSIM_ERR_PARSE 1 /* document parsing or validation failed */
#define QRSIM_ERR_MODEL 2 /* runtime model error (overflow, open network, …) */
#define QRSIM_ERR_ARG 4   /* null pointer, bad UTF-8 or unknown name */
#define QRSIM_ERR_PANIC 5 /* internal panic caught at the boundary */

/* Opaque handle to a parsed, resolved network document. */
typedef struct QrsimNetwork QrsimNetwork;

/* Library version; static storage, do not free. */
const char *qrsim_version(void);

/* Releases a string returned through an out-parameter. NULL is ok. */
void qrsim_string_free(char *s);

/* Parses a network-description document (TOML text).
 * On success writes a handle to *out and returns QRSIM_OK.
 * On failure writes an error message to *err (when err is non-NULL). */
int32_t qrsim_network_parse(const char *text, QrsimNetwork **out, char **err);

/* Releases a network handle. NULL is ok. */
void qrsim_network_free(QrsimNetwork *network);

/* Runs every machine validator. Returns QRSIM_OK when clean; otherwise
 * writes the violation report to *report. */
int32_t qrsim_network_validate(const QrsimNetwork *network, char **report);

/* Runs the named collection at security parameter k with the given
 * activation budget and pruning floor; writes the run document (TOML)
 * to *doc_out. */
int32_t qrsim_run(const QrsimNetwork *network, const char *collection,
                  uint32_t k, uint32_t max_activations, double prune_eps,
                  char **doc_out, char **err);

/* Projects a run document onto one machine's view distribution; writes
 * the view document (TOML) to *doc_out. */
int32_t qrsim_view(const char *run_doc, const char *machine, char **doc_out,
                   char **err);

/* Checks the named witnessed claim at the given security parameters;
 * writes the verdict document (TOML) to *doc_out. Returns QRSIM_OK even
 * for failing claims — consult the document's pass flag. */
int32_t qrsim_check_claim(const QrsimNetwork *network, const char *claim,
                          const uint32_t *ks, size_t n_ks, uint32_t budget,
                          char **doc_out, char **err);

#ifdef __cplusplus
}
#endif

#endif /* QRSIM_H */
