/* C ABI of the cvqkd finite-size key-rate calculator.
 *
 * Scenarios are opaque handles: create with cvqkd_scenario_new(), configure
 * with the setters, evaluate with cvqkd_keyrate() or cvqkd_estimate_file(),
 * release with cvqkd_scenario_free(). Fallible calls return a CvqkdStatus;
 * on failure a message is available from cvqkd_last_error_message()
 * (thread-local, valid until the next failing call on the same thread).
 *
 * All variances are expressed in shot-noise units; rates in bits per
 * channel use.
 */

#ifndef CVQKD_H
#define CVQKD_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum CvqkdStatus {
  CvqkdOk = 0,
  CvqkdErrDomain = 1,
  CvqkdErrUnphysical = 2,
  CvqkdErrNonConverged = 3,
  CvqkdErrBudget = 4,
  CvqkdErrParse = 5,
  CvqkdErrIo = 6,
  CvqkdErrNullArgument = 7,
  CvqkdErrInvalidUtf8 = 8,
} CvqkdStatus;

/* Opaque scenario handle. */
typedef struct CvqkdScenario CvqkdScenario;

typedef struct CvqkdKeyRateReport {
  /* Modulation variance used (the optimum when the scenario optimizes). */
  double va;
  /* Mutual information I(x:y). */
  double i_xy;
  /* Worst-case Holevo bound chi(y:E). */
  double chi_ye;
  /* Privacy-amplification penalty Delta(n). */
  double delta_n;
  /* Secret-key rate; negative when the protocol aborts. */
  double rate;
  /* Worst-case channel slope t_min. */
  double worst_t;
  /* Worst-case noise variance sigma2_max. */
  double worst_sigma2;
  /* 1 when the rate is positive, 0 otherwise. */
  int32_t distillable;
  /* 1 when the variance optimizer stopped at the search boundary. */
  int32_t va_at_boundary;
} CvqkdKeyRateReport;

typedef struct CvqkdEstimateReport {
  /* Number of disclosed sample pairs. */
  uint64_t m;
  double t_hat;
  double sigma2_hat;
  double t_min;
  double sigma2_max;
  /* Raw-key size n = N - m. */
  uint64_t n_key;
  double i_xy;
  double chi_ye;
  double delta_n;
  double rate;
  int32_t distillable;
  /* 1 when m is below the Gaussian-approximation floor (1e4 samples). */
  int32_t below_gaussian_floor;
} CvqkdEstimateReport;

/* Message of the most recent failure on this thread; never NULL. */
const char *cvqkd_last_error_message(void);

/* Static version string of the library. */
const char *cvqkd_version(void);

/* New scenario with the reference defaults (four-state, xi = 0.005,
 * eta = 0.6, beta = 0.8, every epsilon at 1e-10, N = 1e10, half the
 * signals disclosed). A distance or transmission must be set before
 * evaluation. */
CvqkdScenario *cvqkd_scenario_new(void);

/* Releases a scenario handle; accepts NULL. */
void cvqkd_scenario_free(CvqkdScenario *sc);

/* "gaussian" | "twostate" | "fourstate" | "eightdim". */
CvqkdStatus cvqkd_scenario_set_scheme(CvqkdScenario *sc, const char *name);

CvqkdStatus cvqkd_scenario_set_va(CvqkdScenario *sc, double va);

/* Requests modulation-variance optimization (the default). */
CvqkdStatus cvqkd_scenario_optimize_va(CvqkdScenario *sc);

/* Fiber distance in km at 0.2 dB/km; clears any fixed transmission. */
CvqkdStatus cvqkd_scenario_set_distance_km(CvqkdScenario *sc, double dist_km);

/* Total transmission including detector efficiency; clears any distance. */
CvqkdStatus cvqkd_scenario_set_transmission(CvqkdScenario *sc, double t_lin);

CvqkdStatus cvqkd_scenario_set_xi(CvqkdScenario *sc, double xi);

CvqkdStatus cvqkd_scenario_set_eta(CvqkdScenario *sc, double eta);

/* Total number of exchanged signals N. */
CvqkdStatus cvqkd_scenario_set_block_size(CvqkdScenario *sc, uint64_t n_total);

/* Fraction of N disclosed for parameter estimation, in [0, 1). */
CvqkdStatus cvqkd_scenario_set_est_fraction(CvqkdScenario *sc, double fraction);

CvqkdStatus cvqkd_scenario_set_beta(CvqkdScenario *sc, double beta);

CvqkdStatus cvqkd_scenario_set_budget(CvqkdScenario *sc, double eps_pe,
                                      double eps_ec, double eps_bar,
                                      double eps_pa);

CvqkdStatus cvqkd_scenario_set_seed(CvqkdScenario *sc, uint64_t seed);

/* Finite-size key rate of the scenario; optimizes the modulation variance
 * when none is fixed. */
CvqkdStatus cvqkd_keyrate(const CvqkdScenario *sc, CvqkdKeyRateReport *out);

/* Estimates the channel from a two-column x,y CSV file and evaluates the
 * finite-size rate on the remaining signals. Requires a fixed va. */
CvqkdStatus cvqkd_estimate_file(const CvqkdScenario *sc, const char *path,
                                CvqkdEstimateReport *out);

/* z solving (1 - erf(z/sqrt(2)))/2 = eps/2. */
CvqkdStatus cvqkd_normal_quantile_half(double eps, double *out);

/* Privacy-amplification penalty Delta(n). */
CvqkdStatus cvqkd_delta_n(uint64_t n_key, uint32_t dim, double eps_bar,
                          double eps_pa, double *out);

/* Samples needed to keep the estimation-induced excess noise at
 * target_dxi. */
CvqkdStatus cvqkd_required_samples(double t_lin, double target_dxi,
                                   double eps_pe, uint64_t *out);

/* Estimation-induced effective excess noise for m disclosed samples. */
CvqkdStatus cvqkd_effective_excess_noise(double t_lin, uint64_t m,
                                         double eps_pe, double *out);

/* Correlation strength Z of a modulation scheme at variance va. */
CvqkdStatus cvqkd_correlation_strength(const char *scheme, double va,
                                       double *out);

/* Holevo bound chi(y:E) of the covariance matrix (a, b, c). */
CvqkdStatus cvqkd_holevo_bound(double a, double b, double c, double *out);

/* Mutual information (1/2) log2(1 + t^2 va / sigma2). */
CvqkdStatus cvqkd_mutual_info(double va, double t, double sigma2, double *out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CVQKD_H */
