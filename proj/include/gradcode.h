/* C interface to the gradient-coding workbench. All entry points return a
 * gc_status; on failure, gc_last_error() describes the problem for the
 * calling thread. Strings returned through char** are heap-allocated and
 * must be released with gc_string_free(). */
#ifndef GRADCODE_H
#define GRADCODE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gc_status {
    GC_OK = 0,
    GC_ERR_INVALID_ARGUMENT = 1,
    GC_ERR_IO = 2,
    GC_ERR_RUNTIME = 3
} gc_status;

/* Last error message for the calling thread; empty string if none. The
 * pointer stays valid until the next failing call on the same thread. */
const char* gc_last_error(void);

void gc_string_free(char* s);

/* ---- graphs ------------------------------------------------------------ */

typedef struct gc_graph gc_graph;

gc_status gc_graph_random_regular(int n, int d, uint64_t seed, gc_graph** out);
gc_status gc_graph_circulant(int n, const int* offsets, int n_offsets, gc_graph** out);
gc_status gc_graph_named(const char* kind, int n, gc_graph** out);
gc_status gc_graph_load(const char* path, gc_graph** out);
gc_status gc_graph_save(const gc_graph* g, const char* path);
gc_status gc_graph_counts(const gc_graph* g, int* n, int* m);
/* Spectral summary: d, lambda2 (signed), gap, lambda_abs. */
gc_status gc_graph_spectral(const gc_graph* g, double* d, double* lambda2, double* gap,
                            double* lambda_abs);
void gc_graph_free(gc_graph* g);

/* ---- assignment schemes ------------------------------------------------ */

typedef struct gc_scheme gc_scheme;

gc_status gc_scheme_from_graph(const gc_graph* g, gc_scheme** out);
gc_status gc_scheme_adjacency(const gc_graph* g, gc_scheme** out);
gc_status gc_scheme_frc(int n_blocks, int m, int d, gc_scheme** out);
gc_status gc_scheme_load(const char* path, gc_scheme** out);
gc_status gc_scheme_save(const gc_scheme* a, const char* path);
gc_status gc_scheme_counts(const gc_scheme* a, int* n_blocks, int* m);
gc_status gc_scheme_hash(const gc_scheme* a, uint64_t* out);
void gc_scheme_free(gc_scheme* a);

/* ---- decoding ---------------------------------------------------------- */

/* Decodes one straggler set (member machine indices). decoder is one of
 * "optimal", "oracle", "fixed". Result is the decoding JSON document
 * {"stragglers", "w", "alpha", "components"}. */
gc_status gc_decode_json(const gc_scheme* a, const char* decoder, const int* stragglers,
                         int n_stragglers, double p, char** json_out);

/* ---- metrics ----------------------------------------------------------- */

gc_status gc_bounds(double d, double p, double lambda, double* lb_universal,
                    double* lb_fixed, double* adv_upper, double* lb_fixed_cov);

gc_status gc_mc_error(const gc_scheme* a, const char* decoder, double p, long long trials,
                      uint64_t seed, int threads, double* mean, double* stderr_out,
                      double* raw_mean, double* norm_const);

/* ---- experiments and descent ------------------------------------------- */

/* Runs the experiment described by a TOML config file, writing the CSV at
 * out_csv_path and the provenance sidecar at out_csv_path + ".json". */
gc_status gc_run_experiment_file(const char* config_path, const char* out_csv_path,
                                 uint64_t seed_override, int has_seed_override,
                                 int threads);

/* Re-runs the experiment recorded in a sidecar and writes the (identical)
 * outputs at out_csv_path. */
gc_status gc_replay(const char* sidecar_path, const char* out_csv_path, int threads);

/* Coded gradient descent simulation from a TOML config; writes the trace CSV
 * and a JSON sidecar. */
gc_status gc_gd_sim_file(const char* config_path, const char* out_csv_path,
                         uint64_t seed_override, int has_seed_override, int threads);

/* Convergence predictions from a TOML config; writes a one-row CSV. */
gc_status gc_predict_file(const char* config_path, const char* out_csv_path, int threads);

/* Debias demonstration from a TOML config; writes the per-block mean CSV. */
gc_status gc_debias_file(const char* config_path, const char* out_csv_path, int threads);

/* ---- cluster ----------------------------------------------------------- */

/* Parameter server: blocks until the run completes, then writes the trace CSV
 * (and sidecar) at out_csv_path if it is non-NULL. */
gc_status gc_cluster_ps(const char* config_path, const char* out_csv_path);

/* Worker process body; blocks until the server sends "done". */
gc_status gc_cluster_worker(const char* config_path, int worker_id);

#ifdef __cplusplus
}
#endif

#endif /* GRADCODE_H */
