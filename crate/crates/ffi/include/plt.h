#ifndef PLT_H
#define PLT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PltInversion {
  PLT_INVERSION_INVERTED = 0,
  PLT_INVERSION_NOT_INVERTED = 1,
  PLT_INVERSION_NOT_APPLICABLE = 2,
} PltInversion;

typedef enum PltStateClass {
  PLT_STATE_CLASS_OSCILLATOR_LIKE = 0,
  PLT_STATE_CLASS_INTERMEDIATE = 1,
  PLT_STATE_CLASS_STARK_LOCALIZED_PAIR = 2,
} PltStateClass;

typedef enum PltStatus {
  PLT_STATUS_OK = 0,
  PLT_STATUS_NULL_POINTER = 1,
  PLT_STATUS_INVALID_ARGUMENT = 2,
  PLT_STATUS_DOMAIN = 3,
  PLT_STATUS_NO_CONVERGENCE = 4,
  PLT_STATUS_TRUNCATION = 5,
  PLT_STATUS_BOUNDARY_WEIGHT = 6,
  PLT_STATUS_INSUFFICIENT_BASIS = 7,
  PLT_STATUS_CONFIG = 8,
  PLT_STATUS_IO = 9,
  PLT_STATUS_BUFFER_TOO_SMALL = 10,
  PLT_STATUS_PANIC = 11,
} PltStatus;

/**
 * Opaque lattice: physical inputs plus derived constants.
 */
typedef struct PltLattice PltLattice;

/**
 * Opaque annotated eigen-decomposition.
 */
typedef struct PltSpectrum PltSpectrum;

/**
 * Opaque propagated wave packet.
 */
typedef struct PltTrajectory PltTrajectory;

/**
 * Physical inputs. Optional fields are absent when zero.
 */
typedef struct PltLatticeParams {
  /**
   * V0 in E_R.
   */
  double lattice_depth;
  /**
   * a in meters.
   */
  double lattice_constant;
  /**
   * m in kilograms.
   */
  double atom_mass;
  /**
   * omega in rad/s.
   */
  double trap_frequency;
  /**
   * epsilon in E_R.
   */
  double stagger;
  /**
   * J in E_R, or 0.
   */
  double hopping_override;
  /**
   * Omega in E_R, or 0.
   */
  double trap_override;
  /**
   * Delta in E_R, or 0.
   */
  double band_gap;
} PltLatticeParams;

typedef struct PltDerivedParams {
  double recoil_energy_joule;
  double hopping;
  double trap_strength;
  double mathieu_q;
  size_t critical_eigennumber;
  /**
   * T_D in hbar/E_R.
   */
  double dipole_period;
  /**
   * hbar/E_R in seconds.
   */
  double time_unit;
  /**
   * n_max, or 0 when no band gap was given.
   */
  double validity_bound;
} PltDerivedParams;

typedef struct PltStateInfo {
  double energy;
  /**
   * +1 even, -1 odd under n -> -n.
   */
  int32_t parity;
  enum PltStateClass state_class;
  /**
   * <|n|> in sites.
   */
  double arm_center;
  double ipr;
  /**
   * Index of the mirrored partner, or -1.
   */
  int64_t pair_partner;
  /**
   * |E_partner - E_r|, or 0 without a partner.
   */
  double pair_splitting;
} PltStateInfo;

typedef struct PltPacketSpec {
  double n0;
  double k0a;
  double sigma0;
} PltPacketSpec;

typedef struct PltObservables {
  /**
   * hbar/E_R.
   */
  double time;
  double time_ms;
  double norm;
  /**
   * <H> in E_R.
   */
  double energy;
  double mean_n;
  double var_n;
  double p_left;
  double p_right;
} PltObservables;

/**
 * Tunneling measurement. Times are in hbar/E_R; absent values are NaN.
 */
typedef struct PltTunnelingResult {
  bool transferred;
  double tunneling_time;
  double tunneling_time_ms;
  double dipole_periods;
  /**
   * pi hbar / epsilon.
   */
  double stagger_prediction;
  /**
   * pi hbar / Delta E of the most populated pair.
   */
  double splitting_prediction;
  double transfer_completeness;
  enum PltInversion inversion;
} PltTunnelingResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buffer` as a
 * NUL-terminated string, truncating if needed. Returns the full message
 * length excluding the terminator.
 */
size_t plt_last_error_message(char *buffer, size_t len);

/**
 * Static, NUL-terminated version string.
 */
const char *plt_version(void);

enum PltStatus plt_lattice_new(const struct PltLatticeParams *params, struct PltLattice **out);

/**
 * The rubidium reference lattice (J = 0.024 E_R, Omega = 3.2e-4 E_R).
 */
enum PltStatus plt_lattice_reference(struct PltLattice **out);

enum PltStatus plt_lattice_derived(const struct PltLattice *lattice, struct PltDerivedParams *out);

void plt_lattice_free(struct PltLattice *lattice);

/**
 * Lowest `count` eigenstates on sites [-N, N] with stagger `stagger`,
 * classified against the band edge and paired.
 */
enum PltStatus plt_spectrum_new(const struct PltLattice *lattice,
                                size_t half_width,
                                double stagger,
                                size_t count,
                                struct PltSpectrum **out);

void plt_spectrum_free(struct PltSpectrum *spectrum);

/**
 * Number of computed states; 0 for a null handle.
 */
size_t plt_spectrum_len(const struct PltSpectrum *spectrum);

/**
 * Lattice dimension 2N+1; 0 for a null handle.
 */
size_t plt_spectrum_dim(const struct PltSpectrum *spectrum);

enum PltStatus plt_spectrum_energies(const struct PltSpectrum *spectrum,
                                     double *buffer,
                                     size_t len);

/**
 * Site amplitudes of state `r`, ordered from n = -N to n = N.
 */
enum PltStatus plt_spectrum_state(const struct PltSpectrum *spectrum,
                                  size_t r,
                                  double *buffer,
                                  size_t len);

enum PltStatus plt_spectrum_state_info(const struct PltSpectrum *spectrum,
                                       size_t r,
                                       struct PltStateInfo *out);

/**
 * Husimi Q of state `r` on an `x_points` x `k_points` grid over
 * x in [-x_max, x_max], ka in [-pi, pi], x-major. `sigma <= 0` selects the
 * default width (J/Omega)^(1/4).
 */
enum PltStatus plt_spectrum_husimi(const struct PltSpectrum *spectrum,
                                   size_t r,
                                   double x_max,
                                   size_t x_points,
                                   size_t k_points,
                                   double sigma,
                                   double *buffer,
                                   size_t len);

/**
 * Propagates a Gaussian packet over `horizon_td` dipole periods, sampled at
 * `samples` uniform times, in the full eigenbasis of the lattice with
 * stagger `stagger`.
 */
enum PltStatus plt_trajectory_new(const struct PltLattice *lattice,
                                  size_t half_width,
                                  double stagger,
                                  const struct PltPacketSpec *packet,
                                  double horizon_td,
                                  size_t samples,
                                  struct PltTrajectory **out);

void plt_trajectory_free(struct PltTrajectory *trajectory);

/**
 * Number of stored times; 0 for a null handle.
 */
size_t plt_trajectory_len(const struct PltTrajectory *trajectory);

enum PltStatus plt_trajectory_observables(const struct PltTrajectory *trajectory,
                                          struct PltObservables *buffer,
                                          size_t len);

/**
 * Amplitudes at time index `i` as interleaved (re, im) pairs, 2(2N+1)
 * values ordered from n = -N.
 */
enum PltStatus plt_trajectory_packet(const struct PltTrajectory *trajectory,
                                     size_t i,
                                     double *buffer,
                                     size_t len);

/**
 * Propagates `packet` over `horizon_td` dipole periods and measures the
 * time of the first transfer to the opposite arm.
 */
enum PltStatus plt_tunneling_measure(const struct PltLattice *lattice,
                                     size_t half_width,
                                     double stagger,
                                     const struct PltPacketSpec *packet,
                                     double horizon_td,
                                     size_t samples,
                                     struct PltTunnelingResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLT_H */
