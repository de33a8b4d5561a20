/* C ABI for the nvgmi hybrid NV-GMI magnetometer simulator.
 *
 * Conventions:
 *   - Every fallible function returns an nvgmi_status code.
 *   - On failure, nvgmi_last_error_message() returns a thread-local,
 *     NUL-terminated description valid until the next failing call on the
 *     same thread.
 *   - Handles (nvgmi_wire, nvgmi_experiment) are opaque; create and destroy
 *     them only through this API. Passing NULL to a *_free function is a
 *     no-op.
 *   - All quantities are SI: Hz, seconds, Tesla, A/m, Ohm, volts, meters.
 *
 * Maintained by hand in lockstep with src/lib.rs.
 */

#ifndef NVGMI_H
#define NVGMI_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. */
typedef int32_t nvgmi_status;
#define NVGMI_OK 0
#define NVGMI_ERR_MODEL 1  /* simulation / analysis failure */
#define NVGMI_ERR_CONFIG 2 /* invalid configuration */
#define NVGMI_ERR_NULL 3   /* null pointer argument */
#define NVGMI_ERR_UTF8 4   /* string argument not valid UTF-8 */
#define NVGMI_ERR_PANIC 5  /* internal error */

/* Opaque handles. */
typedef struct NvgmiWire nvgmi_wire;
typedef struct NvgmiExperiment nvgmi_experiment;

/* Library version (static string). */
const char *nvgmi_version(void);

/* Thread-local message for the most recent error on this thread. */
const char *nvgmi_last_error_message(void);

/* --- stateless physics helpers ------------------------------------------ */

/* Four ODMR transition frequencies (Hz, ascending) of the default NV
 * parameter set at the axis-projected static field b_parallel (Tesla).
 * out must hold 4 doubles. */
nvgmi_status nvgmi_transition_frequencies(double b_parallel, double *out);

/* Skin depth sqrt(2 rho / (2 pi f mu_r mu_0)), meters. */
nvgmi_status nvgmi_skin_depth(double f_ac, double mu_r, double rho, double *out);

/* Photon-shot-noise DC field figure h * fwhm / (g mu_B), Tesla. */
nvgmi_status nvgmi_shot_noise_dc_sensitivity(double fwhm_hz, double *out);

/* Field per half fringe of the synchronized echo, 1 / (2tau gamma_e), Tesla. */
nvgmi_status nvgmi_delta_b_per_fringe_half(double two_tau_s,
                                           double gyro_e_hz_per_t,
                                           double *out);

/* --- wire model ----------------------------------------------------------- */

/* Create a wire from a preset name: "paper-wire", "pristine", "plated",
 * or "plated+annealed". */
nvgmi_status nvgmi_wire_from_preset(const char *preset, nvgmi_wire **out);
void nvgmi_wire_free(nvgmi_wire *wire);

/* Complex impedance at drive frequency f_ac (Hz) and DC field h_dc (A/m). */
nvgmi_status nvgmi_wire_impedance(const nvgmi_wire *wire, double f_ac,
                                  double h_dc, double *out_re, double *out_im);

/* GMI ratio, percent: 100 (|Z(h)| - |Z(h_sat)|) / |Z(h_sat)|. */
nvgmi_status nvgmi_wire_gmi_ratio(const nvgmi_wire *wire, double f_ac,
                                  double h_dc, double *out);

/* AC field amplitude at the NV (Tesla) for drive v_ac (volts, 0..1) at f_ac
 * under external DC field b_dc (Tesla). */
nvgmi_status nvgmi_wire_ac_field_at_nv(const nvgmi_wire *wire, double v_ac,
                                       double f_ac, double b_dc, double *out);

/* Intrinsic thermal-magnetization noise amplitude, T/sqrt(Hz). */
nvgmi_status nvgmi_wire_intrinsic_noise(const nvgmi_wire *wire, double *out);

/* --- experiments ----------------------------------------------------------- */

/* Parse a TOML experiment configuration. kind uses the CLI vocabulary:
 * "odmr", "rabi", "ramsey", "hahn", "magnetometry", "sweep-fac",
 * "noise-floor", "calibrate", "widefield", "gmi-curve". */
nvgmi_status nvgmi_experiment_new(const char *kind, const char *config_toml,
                                  nvgmi_experiment **out);
void nvgmi_experiment_free(nvgmi_experiment *experiment);

/* Run the experiment; writes trace CSVs, a report JSON, and a manifest to
 * out_dir. use_json selects JSON for auxiliary data files. Outputs are
 * byte-reproducible for a fixed config. */
nvgmi_status nvgmi_experiment_run(const nvgmi_experiment *experiment,
                                  const char *out_dir, int32_t use_json);

#ifdef __cplusplus
}
#endif

#endif /* NVGMI_H */
