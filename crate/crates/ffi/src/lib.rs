//! C ABI over `plt-core`.
//!
//! Every function returns a [`PltStatus`]. Objects are opaque handles created
//! by `*_new` functions and released by the matching `*_free`. Array outputs
//! are written into caller buffers; when a buffer is too short the call
//! fails with `PLT_STATUS_BUFFER_TOO_SMALL` and the required length is in the
//! last-error message. The last error is kept per thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use plt_core::dynamics::{dipole_time_grid, gaussian_packet, propagate_spectral, PacketSpec, Trajectory};
use plt_core::experiments::{analyze_tunneling, InversionVerdict, NamedPacket, RunSettings, Scenario};
use plt_core::model::{build_hamiltonian, derive_params, DerivedParams, LatticeParams};
use plt_core::phasespace::{husimi, HusimiGrid, Normalization};
use plt_core::spectrum::{eigendecompose, ClassifyOptions, Parity, Spectrum, StateClass};
use plt_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PltStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    NoConvergence = 4,
    Truncation = 5,
    BoundaryWeight = 6,
    InsufficientBasis = 7,
    Config = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into_bytes());
}

fn status_of(e: &Error) -> PltStatus {
    match e {
        Error::Domain { .. } | Error::UndefinedPeriod => PltStatus::Domain,
        Error::NoConvergence { .. } => PltStatus::NoConvergence,
        Error::Truncation { .. } => PltStatus::Truncation,
        Error::BoundaryWeight { .. } => PltStatus::BoundaryWeight,
        Error::InsufficientBasis { .. } => PltStatus::InsufficientBasis,
        Error::Config(_) | Error::UnknownScenario(_) | Error::Json(_) => PltStatus::Config,
        Error::Io { .. } => PltStatus::Io,
        Error::Scenario { source, .. } => status_of(source),
    }
}

fn fail(status: PltStatus, message: impl Into<String>) -> PltStatus {
    set_error(message.into());
    status
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PltStatus>) -> PltStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PltStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(PltStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, PltStatus>;
}

impl<T> OrStatus<T> for plt_core::Result<T> {
    fn or_status(self) -> Result<T, PltStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, PltStatus> {
    p.as_ref().ok_or_else(|| fail(PltStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, name: &str) -> Result<&'a mut [T], PltStatus> {
    if p.is_null() {
        return Err(fail(PltStatus::NullPointer, format!("{name} is null")));
    }
    if len < needed {
        return Err(fail(
            PltStatus::BufferTooSmall,
            format!("{name} holds {len} elements, {needed} required"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn store<T>(out: *mut T, value: T, name: &str) -> Result<(), PltStatus> {
    if out.is_null() {
        return Err(fail(PltStatus::NullPointer, format!("{name} is null")));
    }
    out.write(value);
    Ok(())
}

/// Copies the calling thread's last error message into `buffer` as a
/// NUL-terminated string, truncating if needed. Returns the full message
/// length excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn plt_last_error_message(buffer: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buffer.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buffer.cast::<u8>(), n);
            *buffer.add(n) = 0;
        }
        msg.len()
    })
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn plt_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Physical inputs. Optional fields are absent when zero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PltLatticeParams {
    /// V0 in E_R.
    pub lattice_depth: f64,
    /// a in meters.
    pub lattice_constant: f64,
    /// m in kilograms.
    pub atom_mass: f64,
    /// omega in rad/s.
    pub trap_frequency: f64,
    /// epsilon in E_R.
    pub stagger: f64,
    /// J in E_R, or 0.
    pub hopping_override: f64,
    /// Omega in E_R, or 0.
    pub trap_override: f64,
    /// Delta in E_R, or 0.
    pub band_gap: f64,
}

impl From<PltLatticeParams> for LatticeParams {
    fn from(p: PltLatticeParams) -> Self {
        let opt = |v: f64| (v != 0.0).then_some(v);
        LatticeParams {
            lattice_depth: p.lattice_depth,
            lattice_constant: p.lattice_constant,
            atom_mass: p.atom_mass,
            trap_frequency: p.trap_frequency,
            stagger: p.stagger,
            hopping_override: opt(p.hopping_override),
            trap_override: opt(p.trap_override),
            band_gap: opt(p.band_gap),
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PltDerivedParams {
    pub recoil_energy_joule: f64,
    pub hopping: f64,
    pub trap_strength: f64,
    pub mathieu_q: f64,
    pub critical_eigennumber: usize,
    /// T_D in hbar/E_R.
    pub dipole_period: f64,
    /// hbar/E_R in seconds.
    pub time_unit: f64,
    /// n_max, or 0 when no band gap was given.
    pub validity_bound: f64,
}

/// Opaque lattice: physical inputs plus derived constants.
pub struct PltLattice {
    params: LatticeParams,
    derived: DerivedParams,
}

/// Opaque annotated eigen-decomposition.
pub struct PltSpectrum {
    derived: DerivedParams,
    inner: Spectrum,
}

/// Opaque propagated wave packet.
pub struct PltTrajectory {
    derived: DerivedParams,
    inner: Trajectory,
}

#[no_mangle]
pub unsafe extern "C" fn plt_lattice_new(params: *const PltLatticeParams, out: *mut *mut PltLattice) -> PltStatus {
    guard(|| {
        let params: LatticeParams = (*deref(params, "params")?).into();
        let derived = derive_params(&params).or_status()?;
        store(out, Box::into_raw(Box::new(PltLattice { params, derived })), "out")
    })
}

/// The rubidium reference lattice (J = 0.024 E_R, Omega = 3.2e-4 E_R).
#[no_mangle]
pub unsafe extern "C" fn plt_lattice_reference(out: *mut *mut PltLattice) -> PltStatus {
    guard(|| {
        let params = LatticeParams::rubidium_reference();
        let derived = derive_params(&params).or_status()?;
        store(out, Box::into_raw(Box::new(PltLattice { params, derived })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn plt_lattice_derived(lattice: *const PltLattice, out: *mut PltDerivedParams) -> PltStatus {
    guard(|| {
        let d = deref(lattice, "lattice")?.derived;
        let value = PltDerivedParams {
            recoil_energy_joule: d.recoil_energy,
            hopping: d.hopping,
            trap_strength: d.trap_strength,
            mathieu_q: d.mathieu_q,
            critical_eigennumber: d.critical_eigennumber,
            dipole_period: d.dipole_period,
            time_unit: d.time_unit,
            validity_bound: d.validity_bound.unwrap_or(0.0),
        };
        store(out, value, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn plt_lattice_free(lattice: *mut PltLattice) {
    if !lattice.is_null() {
        drop(Box::from_raw(lattice));
    }
}

/// Lowest `count` eigenstates on sites [-N, N] with stagger `stagger`,
/// classified against the band edge and paired.
#[no_mangle]
pub unsafe extern "C" fn plt_spectrum_new(
    lattice: *const PltLattice,
    half_width: usize,
    stagger: f64,
    count: usize,
    out: *mut *mut PltSpectrum,
) -> PltStatus {
    guard(|| {
        let lattice = deref(lattice, "lattice")?;
        let h = build_hamiltonian(&lattice.derived, half_width, stagger).or_status()?;
        let mut inner = eigendecompose(&h, count).or_status()?;
        inner.annotate(&lattice.derived, ClassifyOptions::default());
        let spectrum = PltSpectrum {
            derived: lattice.derived,
            inner,
        };
        store(out, Box::into_raw(Box::new(spectrum)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn plt_spectrum_free(spectrum: *mut PltSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Number of computed states; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn plt_spectrum_len(spectrum: *const PltSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.inner.len())
}

/// Lattice dimension 2N+1; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn plt_spectrum_dim(spectrum: *const PltSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.inner.hamiltonian().dim())
}

#[no_mangle]
pub unsafe extern "C" fn plt_spectrum_energies(spectrum: *const PltSpectrum, buffer: *mut f64, len: usize) -> PltStatus {
    guard(|| {
        let s = &deref(spectrum, "spectrum")?.inner;
        let out = out_slice(buffer, len, s.len(), "buffer")?;
        for (o, st) in out.iter_mut().zip(&s.states) {
            *o = st.energy;
        }
        Ok(())
    })
}

/// Site amplitudes of state `r`, ordered from n = -N to n = N.
#[no_mangle]
pub unsafe extern "C" fn plt_spectrum_state(
    spectrum: *const PltSpectrum,
    r: usize,
    buffer: *mut f64,
    len: usize,
) -> PltStatus {
    guard(|| {
        let s = &deref(spectrum, "spectrum")?.inner;
        let state = state_at(s, r)?;
        out_slice(buffer, len, state.amplitudes.len(), "buffer")?.copy_from_slice(&state.amplitudes);
        Ok(())
    })
}

fn state_at(s: &Spectrum, r: usize) -> Result<&plt_core::spectrum::EigenState, PltStatus> {
    s.states
        .get(r)
        .ok_or_else(|| fail(PltStatus::InvalidArgument, format!("state {r} not computed ({} available)", s.len())))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PltStateClass {
    OscillatorLike = 0,
    Intermediate = 1,
    StarkLocalizedPair = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PltStateInfo {
    pub energy: f64,
    /// +1 even, -1 odd under n -> -n.
    pub parity: i32,
    pub state_class: PltStateClass,
    /// <|n|> in sites.
    pub arm_center: f64,
    pub ipr: f64,
    /// Index of the mirrored partner, or -1.
    pub pair_partner: i64,
    /// |E_partner - E_r|, or 0 without a partner.
    pub pair_splitting: f64,
}

#[no_mangle]
pub unsafe extern "C" fn plt_spectrum_state_info(
    spectrum: *const PltSpectrum,
    r: usize,
    out: *mut PltStateInfo,
) -> PltStatus {
    guard(|| {
        let s = &deref(spectrum, "spectrum")?.inner;
        let st = state_at(s, r)?;
        let pair = s.pair_of(r);
        let info = PltStateInfo {
            energy: st.energy,
            parity: match st.parity {
                Parity::Even => 1,
                Parity::Odd => -1,
            },
            state_class: match st.class {
                Some(StateClass::OscillatorLike) => PltStateClass::OscillatorLike,
                Some(StateClass::Intermediate) => PltStateClass::Intermediate,
                Some(StateClass::StarkLocalizedPair) | None => PltStateClass::StarkLocalizedPair,
            },
            arm_center: st.arm_center,
            ipr: st.ipr,
            pair_partner: pair.map_or(-1, |p| if p.lower == r { p.upper as i64 } else { p.lower as i64 }),
            pair_splitting: pair.map_or(0.0, |p| p.splitting),
        };
        store(out, info, "out")
    })
}

/// Husimi Q of state `r` on an `x_points` x `k_points` grid over
/// x in [-x_max, x_max], ka in [-pi, pi], x-major. `sigma <= 0` selects the
/// default width (J/Omega)^(1/4).
#[no_mangle]
pub unsafe extern "C" fn plt_spectrum_husimi(
    spectrum: *const PltSpectrum,
    r: usize,
    x_max: f64,
    x_points: usize,
    k_points: usize,
    sigma: f64,
    buffer: *mut f64,
    len: usize,
) -> PltStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        let st = state_at(&s.inner, r)?;
        if !(x_max > 0.0) || x_points == 0 || k_points == 0 {
            return Err(fail(PltStatus::InvalidArgument, "empty Husimi grid"));
        }
        let sigma = if sigma > 0.0 { sigma } else { s.derived.oscillator_length() };
        let grid = HusimiGrid::uniform(x_max, x_points, k_points, sigma);
        let out = out_slice(buffer, len, x_points * k_points, "buffer")?;
        let q = husimi(&st.to_complex(), &grid, Normalization::Raw).or_status()?;
        out.copy_from_slice(&q.values);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PltPacketSpec {
    pub n0: f64,
    pub k0a: f64,
    pub sigma0: f64,
}

impl From<PltPacketSpec> for PacketSpec {
    fn from(p: PltPacketSpec) -> Self {
        PacketSpec {
            n0: p.n0,
            k0a: p.k0a,
            sigma0: p.sigma0,
        }
    }
}

/// Propagates a Gaussian packet over `horizon_td` dipole periods, sampled at
/// `samples` uniform times, in the full eigenbasis of the lattice with
/// stagger `stagger`.
#[no_mangle]
pub unsafe extern "C" fn plt_trajectory_new(
    lattice: *const PltLattice,
    half_width: usize,
    stagger: f64,
    packet: *const PltPacketSpec,
    horizon_td: f64,
    samples: usize,
    out: *mut *mut PltTrajectory,
) -> PltStatus {
    guard(|| {
        let lattice = deref(lattice, "lattice")?;
        let spec: PacketSpec = (*deref(packet, "packet")?).into();
        if !(horizon_td > 0.0) || samples < 2 {
            return Err(fail(PltStatus::InvalidArgument, "need horizon_td > 0 and samples >= 2"));
        }
        let d = lattice.derived;
        let h = build_hamiltonian(&d, half_width, stagger).or_status()?;
        let spectrum = eigendecompose(&h, h.dim()).or_status()?;
        let psi0 = gaussian_packet(spec, half_width).or_status()?;
        let times = dipole_time_grid(&d, horizon_td, samples);
        let inner = propagate_spectral(&psi0, &spectrum, &times).or_status()?;
        store(out, Box::into_raw(Box::new(PltTrajectory { derived: d, inner })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn plt_trajectory_free(trajectory: *mut PltTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of stored times; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn plt_trajectory_len(trajectory: *const PltTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.inner.len())
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PltObservables {
    /// hbar/E_R.
    pub time: f64,
    pub time_ms: f64,
    pub norm: f64,
    /// <H> in E_R.
    pub energy: f64,
    pub mean_n: f64,
    pub var_n: f64,
    pub p_left: f64,
    pub p_right: f64,
}

#[no_mangle]
pub unsafe extern "C" fn plt_trajectory_observables(
    trajectory: *const PltTrajectory,
    buffer: *mut PltObservables,
    len: usize,
) -> PltStatus {
    guard(|| {
        let t = deref(trajectory, "trajectory")?;
        let out = out_slice(buffer, len, t.inner.len(), "buffer")?;
        for (o, obs) in out.iter_mut().zip(&t.inner.observables) {
            *o = PltObservables {
                time: obs.time,
                time_ms: t.derived.to_millis(obs.time),
                norm: obs.norm,
                energy: obs.energy,
                mean_n: obs.mean_n,
                var_n: obs.var_n,
                p_left: obs.p_left,
                p_right: obs.p_right,
            };
        }
        Ok(())
    })
}

/// Amplitudes at time index `i` as interleaved (re, im) pairs, 2(2N+1)
/// values ordered from n = -N.
#[no_mangle]
pub unsafe extern "C" fn plt_trajectory_packet(
    trajectory: *const PltTrajectory,
    i: usize,
    buffer: *mut f64,
    len: usize,
) -> PltStatus {
    guard(|| {
        let t = &deref(trajectory, "trajectory")?.inner;
        let packet = t.packets.get(i).ok_or_else(|| {
            fail(PltStatus::InvalidArgument, format!("time index {i} out of range ({} stored)", t.len()))
        })?;
        let out = out_slice(buffer, len, 2 * packet.len(), "buffer")?;
        for (pair, z) in out.chunks_exact_mut(2).zip(packet) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PltInversion {
    Inverted = 0,
    NotInverted = 1,
    NotApplicable = 2,
}

/// Tunneling measurement. Times are in hbar/E_R; absent values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PltTunnelingResult {
    pub transferred: bool,
    pub tunneling_time: f64,
    pub tunneling_time_ms: f64,
    pub dipole_periods: f64,
    /// pi hbar / epsilon.
    pub stagger_prediction: f64,
    /// pi hbar / Delta E of the most populated pair.
    pub splitting_prediction: f64,
    pub transfer_completeness: f64,
    pub inversion: PltInversion,
}

/// Propagates `packet` over `horizon_td` dipole periods and measures the
/// time of the first transfer to the opposite arm.
#[no_mangle]
pub unsafe extern "C" fn plt_tunneling_measure(
    lattice: *const PltLattice,
    half_width: usize,
    stagger: f64,
    packet: *const PltPacketSpec,
    horizon_td: f64,
    samples: usize,
    out: *mut PltTunnelingResult,
) -> PltStatus {
    guard(|| {
        let lattice = deref(lattice, "lattice")?;
        let spec: PacketSpec = (*deref(packet, "packet")?).into();
        let scenario = Scenario {
            name: "ffi".to_owned(),
            lattice: LatticeParams {
                stagger,
                ..lattice.params.clone()
            },
            packets: vec![NamedPacket {
                label: "ffi".to_owned(),
                spec,
            }],
            horizon_td,
            outputs: vec![],
            states: vec![],
        };
        let settings = RunSettings {
            half_width,
            samples,
            ..RunSettings::default()
        };
        if samples < 2 {
            return Err(fail(PltStatus::InvalidArgument, "samples must be at least 2"));
        }
        let a = analyze_tunneling(&scenario, &settings).or_status()?;
        let r = &a.report;
        let result = PltTunnelingResult {
            transferred: r.transferred,
            tunneling_time: r.tunneling_time.unwrap_or(f64::NAN),
            tunneling_time_ms: r.tunneling_time_ms.unwrap_or(f64::NAN),
            dipole_periods: r.dipole_periods.unwrap_or(f64::NAN),
            stagger_prediction: r.stagger_prediction.unwrap_or(f64::NAN),
            splitting_prediction: r.splitting_prediction.unwrap_or(f64::NAN),
            transfer_completeness: r.transfer_completeness,
            inversion: match a.inversion.verdict {
                InversionVerdict::Inverted => PltInversion::Inverted,
                InversionVerdict::NotInverted => PltInversion::NotInverted,
                InversionVerdict::NotApplicable => PltInversion::NotApplicable,
            },
        };
        store(out, result, "out")
    })
}
