/* C interface to the wavecert stability-certification library.
 *
 * Conventions:
 *   - every function returns a status code: WC_OK (0) on success, a
 *     negative WC_ERR_* value on failure; results travel via out-pointers;
 *   - composite results are opaque handles released by the matching
 *     *_free function; freeing NULL is a no-op;
 *   - certificate mode arguments: 0 = full (position-anchored functional,
 *     any q), 1 = reduced (energy seminorm, requires q = 0);
 *   - absent optional values (unmaximized rate, inconclusive fit) are NaN.
 */

#ifndef WAVECERT_H
#define WAVECERT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define WC_OK 0
#define WC_ERR_NULL (-1)
#define WC_ERR_INVALID (-2)
#define WC_ERR_SINGULAR (-3)
#define WC_ERR_MODE (-4)
#define WC_ERR_INFEASIBLE (-5)
#define WC_ERR_SOLVER (-6)
#define WC_ERR_SPECTRUM (-7)
#define WC_ERR_UNBOUNDED (-8)
#define WC_ERR_BUFFER (-9)
#define WC_ERR_PANIC (-10)

typedef struct WcCertification WcCertification;
typedef struct WcSimTrace WcSimTrace;

typedef struct WcTraceRow {
  double t;
  double seminorm_h;
  double norm_h0;
  double u0;
  double w;
  double y;
  double v1;
} WcTraceRow;

/* Closed-form rates (matched speeds; infinity for lossless loops). */
int32_t wc_alpha_dyn(double c, double g, double h, double *out);
int32_t wc_alpha_backstepping(double c1, double k, double *out);
int32_t wc_match_k(double c1, double g, double h, double *out_k_small,
                   double *out_k_large);

/* Certification. */
int32_t wc_certify(double c1, double g, double c2, double h, double q,
                   double alpha, int32_t mode, WcCertification **out);
int32_t wc_max_decay_rate(double c1, double g, double c2, double h, double q,
                          int32_t mode, double tol, WcCertification **out);
int32_t wc_certification_feasible(const WcCertification *cert);
int32_t wc_certification_margin(const WcCertification *cert, double *out);
int32_t wc_certification_alpha_star(const WcCertification *cert, double *out);
int32_t wc_certification_gamma(const WcCertification *cert, double *out);
int32_t wc_certification_multipliers(const WcCertification *cert, double *buf,
                                     size_t cap, size_t *n_out);
void wc_certification_free(WcCertification *cert);

/* Parameter boxes. g_max_is_inf != 0 means the gain is unbounded above. */
int32_t wc_delta_max(double c_min, double c_max, double g_min,
                     int32_t g_max_is_inf, double g_max, double *out);
int32_t wc_certify_robust(double c_min, double c_max, double g_min,
                          int32_t g_max_is_inf, double g_max, double c2,
                          double h, double q, int32_t mode,
                          int32_t *feasible_out, double *margin_out);

/* Simulation. The configuration text uses the same key-value format as the
 * command-line tool (c1, g, c2, h, q, kind, T, N, ic_u, ...). */
int32_t wc_simulate(const char *config_text, WcSimTrace **out);
int32_t wc_sim_trace_len(const WcSimTrace *trace, size_t *out);
int32_t wc_sim_trace_row(const WcSimTrace *trace, size_t idx, WcTraceRow *out);
int32_t wc_sim_trace_fitted_rate(const WcSimTrace *trace, double *out);
void wc_sim_trace_free(WcSimTrace *trace);

/* Spectra. */
int32_t wc_pole_line(double c, double g, double h, double *re_out,
                     double *spacing_out);
int32_t wc_backstepping_poles(double c1, double k, double *re_out,
                              double *spacing_out);
int32_t wc_find_roots(double c1, double g, double c2, double h, double q,
                      double re_min, double re_max, double im_min,
                      double im_max, size_t nx, size_t ny, double *re,
                      double *im, size_t cap, size_t *n_out);

/* Human-readable description of a status code; storage is static. */
const char *wc_status_message(int32_t code);

#ifdef __cplusplus
}
#endif

#endif /* WAVECERT_H */
