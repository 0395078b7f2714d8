//! Wave-packet preparation, time propagation and observables.
//!
//! Two propagators are provided. [`propagate_spectral`] expands the initial
//! state in the eigenbasis and is exact for the time-independent
//! Hamiltonian; it is the production path. [`propagate_direct`] integrates
//! the amplitude equations step by step and serves as an independent check.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedParams, TridiagonalHamiltonian};
use crate::spectrum::{edge_weight, Spectrum};

/// Completeness the eigenbasis must reach on the initial state.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-6;
/// Largest tolerated boundary weight of a prepared packet.
pub const PACKET_BOUNDARY_TOLERANCE: f64 = 1e-8;
/// Stability bound on the direct step: |dt|·‖H‖ ≤ this.
pub const MAX_STEP_NORM: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    /// Mean position n₀ in sites.
    pub n0: f64,
    /// Mean quasimomentum k₀a.
    pub k0a: f64,
    /// Width σ₀ in sites.
    pub sigma0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub amplitudes: Vec<Complex64>,
    /// Time in ħ/E_R.
    pub time: f64,
}

impl WavePacket {
    pub fn new(amplitudes: Vec<Complex64>, time: f64) -> Self {
        WavePacket { amplitudes, time }
    }

    pub fn half_width(&self) -> usize {
        self.amplitudes.len() / 2
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn conj(&self) -> WavePacket {
        WavePacket {
            amplitudes: self.amplitudes.iter().map(|z| z.conj()).collect(),
            time: self.time,
        }
    }
}

/// φ_n ∝ exp(−(n−n₀)²/2σ₀²) exp(−ik₀a(n−n₀)), normalized on [−N, N].
pub fn gaussian_packet(spec: PacketSpec, half_width: usize) -> Result<WavePacket> {
    if !(spec.sigma0 > 0.0 && spec.sigma0.is_finite()) {
        return Err(Error::domain("sigma0", spec.sigma0, "must be positive"));
    }
    let first = -(half_width as i64);
    let mut amplitudes: Vec<Complex64> = (0..2 * half_width + 1)
        .map(|i| {
            let dn = (first + i as i64) as f64 - spec.n0;
            Complex64::from_polar(
                (-dn * dn / (2.0 * spec.sigma0 * spec.sigma0)).exp(),
                -spec.k0a * dn,
            )
        })
        .collect();
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::BoundaryWeight { weight: 1.0 });
    }
    amplitudes.iter_mut().for_each(|z| *z /= norm);
    let weight = edge_weight(amplitudes.len(), |i| amplitudes[i].norm_sqr());
    if weight >= PACKET_BOUNDARY_TOLERANCE {
        return Err(Error::BoundaryWeight { weight });
    }
    Ok(WavePacket::new(amplitudes, 0.0))
}

/// Scalar observables of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub time: f64,
    pub norm: f64,
    /// ⟨H⟩ in E_R.
    pub energy: f64,
    pub mean_n: f64,
    pub var_n: f64,
    /// Weight on n < 0 plus half of n = 0.
    pub p_left: f64,
    pub p_right: f64,
}

pub fn observables(psi: &[Complex64], time: f64, h: &TridiagonalHamiltonian) -> Observables {
    let half = (psi.len() / 2) as i64;
    let (mut norm, mut first, mut second, mut left, mut right) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, z) in psi.iter().enumerate() {
        let n = i as i64 - half;
        let w = z.norm_sqr();
        norm += w;
        first += n as f64 * w;
        second += (n * n) as f64 * w;
        match n.cmp(&0) {
            std::cmp::Ordering::Less => left += w,
            std::cmp::Ordering::Greater => right += w,
            std::cmp::Ordering::Equal => {
                left += 0.5 * w;
                right += 0.5 * w;
            }
        }
    }
    let mean = first / norm;
    Observables {
        time,
        norm,
        energy: h.expectation(psi) / norm,
        mean_n: mean,
        var_n: second / norm - mean * mean,
        p_left: left,
        p_right: right,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn weight(self, o: &Observables) -> f64 {
        match self {
            Side::Left => o.p_left,
            Side::Right => o.p_right,
        }
    }
}

/// Time-ordered packets with their observables.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub packets: Vec<Vec<Complex64>>,
    pub observables: Vec<Observables>,
}

impl Trajectory {
    /// Computes observables for recorded packets; times must increase strictly.
    pub fn new(times: Vec<f64>, packets: Vec<Vec<Complex64>>, h: &TridiagonalHamiltonian) -> Result<Self> {
        check_times(&times)?;
        if times.len() != packets.len() || packets.iter().any(|p| p.len() != h.dim()) {
            return Err(Error::Config("packets do not match the times or the lattice".into()));
        }
        Ok(Trajectory::from_packets(times, packets, h))
    }

    fn from_packets(times: Vec<f64>, packets: Vec<Vec<Complex64>>, h: &TridiagonalHamiltonian) -> Self {
        let observables = packets
            .par_iter()
            .zip(&times)
            .map(|(p, &t)| observables(p, t, h))
            .collect();
        Trajectory {
            times,
            packets,
            observables,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    /// max_t |norm(t) − norm(0)|.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.observables[0].norm;
        self.observables.iter().map(|o| (o.norm - n0).abs()).fold(0.0, f64::max)
    }

    /// max_t |E(t) − E(0)| / max(|E(0)|, J).
    ///
    /// The floor at J keeps the measure meaningful for packets whose mean
    /// energy is close to zero.
    pub fn energy_drift(&self, hopping: f64) -> f64 {
        let e0 = self.observables[0].energy;
        let scale = e0.abs().max(hopping);
        self.observables
            .iter()
            .map(|o| (o.energy - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Largest |Δφ_n| between two trajectories sampled at the same times.
    pub fn max_amplitude_difference(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.len(), other.len(), "trajectories differ in length");
        self.packets
            .iter()
            .zip(&other.packets)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// |ψ(k, t)|² for every stored time.
    pub fn k_distribution(&self, k_grid: &[f64]) -> Vec<Vec<f64>> {
        let table = FourierTable::new(self.packets[0].len(), k_grid);
        self.packets.par_iter().map(|p| table.density(p)).collect()
    }

    /// The same motion played backwards: conj ψ(T − t), itself a solution of
    /// the Schrödinger equation for a real Hamiltonian.
    pub fn time_reversed(&self, h: &TridiagonalHamiltonian) -> Trajectory {
        let end = self.times.last().copied().unwrap_or(0.0);
        let start = self.times.first().copied().unwrap_or(0.0);
        let times: Vec<f64> = self.times.iter().rev().map(|t| start + end - t).collect();
        let packets = self
            .packets
            .iter()
            .rev()
            .map(|p| p.iter().map(|z| z.conj()).collect())
            .collect();
        Trajectory::from_packets(times, packets, h)
    }
}

/// `samples` uniform times over [0, periods·T_D].
pub fn dipole_time_grid(d: &DerivedParams, periods: f64, samples: usize) -> Vec<f64> {
    let end = periods * d.dipole_period;
    (0..samples)
        .map(|i| end * i as f64 / (samples - 1) as f64)
        .collect()
}

/// Overlaps ⟨φʳ|ψ⟩ for every state in the spectrum.
fn projections(psi: &[Complex64], spectrum: &Spectrum) -> Vec<Complex64> {
    spectrum
        .states
        .iter()
        .map(|s| s.amplitudes.iter().zip(psi).map(|(a, z)| z * *a).sum())
        .collect()
}

/// ψ(t) = Σ_r e^{−iE_r t} ⟨φʳ|ψ₀⟩ φʳ at each requested time.
pub fn propagate_spectral(psi0: &WavePacket, spectrum: &Spectrum, times: &[f64]) -> Result<Trajectory> {
    let h = spectrum.hamiltonian();
    if psi0.amplitudes.len() != h.dim() {
        return Err(Error::Config("packet and spectrum use different lattices".into()));
    }
    check_times(times)?;
    let coefficients = projections(&psi0.amplitudes, spectrum);
    let covered: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    let deficit = psi0.norm() - covered;
    if deficit > COMPLETENESS_TOLERANCE {
        return Err(Error::InsufficientBasis { deficit });
    }

    let dim = h.dim();
    let packets: Vec<Vec<Complex64>> = times
        .par_iter()
        .map(|&t| {
            let mut psi = vec![Complex64::new(0.0, 0.0); dim];
            for (state, c) in spectrum.states.iter().zip(&coefficients) {
                let w = c * Complex64::from_polar(1.0, -state.energy * (t - psi0.time));
                for (z, a) in psi.iter_mut().zip(&state.amplitudes) {
                    *z += w * *a;
                }
            }
            psi
        })
        .collect();
    Ok(Trajectory::from_packets(times.to_vec(), packets, h))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Config("no output times requested".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("output times must be strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectOptions {
    /// Step in ħ/E_R; must satisfy dt·‖H‖ ≤ 0.05.
    pub dt: f64,
    pub t_end: f64,
    /// Store every n-th step (the initial state is always stored).
    pub record_every: usize,
}

impl DirectOptions {
    /// The largest admissible step for `h`, recording roughly `samples` times.
    pub fn for_hamiltonian(h: &TridiagonalHamiltonian, t_end: f64, samples: usize) -> Self {
        let dt_max = MAX_STEP_NORM / h.norm_bound();
        let steps = (t_end / dt_max).ceil().max(1.0) as usize;
        let record_every = (steps / samples.max(1)).max(1);
        let steps = steps.div_ceil(record_every) * record_every;
        DirectOptions {
            dt: t_end / steps as f64,
            t_end,
            record_every,
        }
    }
}

/// One tridiagonal factor I + βH with its Thomas elimination precomputed.
struct ShiftedFactor {
    diag: Vec<Complex64>,
    off: Complex64,
    /// Modified super-diagonal c'_i.
    sweep: Vec<Complex64>,
    /// 1 / (pivot_i).
    pivot_inv: Vec<Complex64>,
}

impl ShiftedFactor {
    fn new(h: &TridiagonalHamiltonian, beta: Complex64) -> Self {
        let diag: Vec<Complex64> = h.diagonal().iter().map(|&d| Complex64::new(1.0, 0.0) + beta * d).collect();
        let off = beta * h.off_diagonal();
        let n = diag.len();
        let mut sweep = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot_inv = vec![Complex64::new(0.0, 0.0); n];
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let pivot = diag[i] - off * prev;
            pivot_inv[i] = pivot.inv();
            prev = off * pivot_inv[i];
            sweep[i] = prev;
        }
        ShiftedFactor {
            diag,
            off,
            sweep,
            pivot_inv,
        }
    }

    fn multiply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = x.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off * x[i + 1];
            }
            out[i] = acc;
        }
    }

    fn solve_in_place(&self, y: &mut [Complex64]) {
        let n = y.len();
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..n {
            prev = (y[i] - self.off * prev) * self.pivot_inv[i];
            y[i] = prev;
        }
        for i in (0..n - 1).rev() {
            let next = y[i + 1];
            y[i] -= self.sweep[i] * next;
        }
    }
}

/// Fixed-step integration of iφ̇ = Hφ with the (2,2) Padé approximant of
/// e^{−iH dt}.
///
/// The step factors as (I+β₁H)(I+β₂H)(I+β₃H)⁻¹(I+β₄H)⁻¹ with the roots of
/// 1 ± z/2 + z²/12, so it costs two tridiagonal products and two tridiagonal
/// solves. The approximant is exactly unitary and fourth-order accurate.
pub fn propagate_direct(psi0: &WavePacket, h: &TridiagonalHamiltonian, opts: DirectOptions) -> Result<Trajectory> {
    if psi0.amplitudes.len() != h.dim() {
        return Err(Error::Config("packet and Hamiltonian use different lattices".into()));
    }
    let DirectOptions { dt, t_end, record_every } = opts;
    if !(dt > 0.0) || !(t_end >= 0.0) || record_every == 0 {
        return Err(Error::Config(format!(
            "direct propagation needs dt > 0, t_end ≥ 0 and record_every ≥ 1 (got {dt}, {t_end}, {record_every})"
        )));
    }
    if dt * h.norm_bound() > MAX_STEP_NORM * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "step dt = {dt} exceeds the stability bound {MAX_STEP_NORM}/‖H‖ = {}",
            MAX_STEP_NORM / h.norm_bound()
        )));
    }

    let r3 = 3f64.sqrt();
    // e^{z} ≈ (1 − z/a)(1 − z/b) / ((1 − z/c)(1 − z/d)) with z = −i dt H,
    // so each factor is I + (i dt / root) H.
    let factor = |root: Complex64| Complex64::new(0.0, dt) / root;
    let num_a = ShiftedFactor::new(h, factor(Complex64::new(-3.0, r3)));
    let num_b = ShiftedFactor::new(h, factor(Complex64::new(-3.0, -r3)));
    let den_c = ShiftedFactor::new(h, factor(Complex64::new(3.0, r3)));
    let den_d = ShiftedFactor::new(h, factor(Complex64::new(3.0, -r3)));

    let steps = (t_end / dt).round() as usize;
    let mut psi = psi0.amplitudes.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); psi.len()];
    let mut times = vec![psi0.time];
    let mut packets = vec![psi.clone()];
    for step in 1..=steps {
        num_a.multiply(&psi, &mut scratch);
        num_b.multiply(&scratch, &mut psi);
        den_c.solve_in_place(&mut psi);
        den_d.solve_in_place(&mut psi);
        if step % record_every == 0 || step == steps {
            times.push(psi0.time + step as f64 * dt);
            packets.push(psi.clone());
        }
    }
    Ok(Trajectory::from_packets(times, packets, h))
}

/// Precomputed phases e^{ikn}/√(2N+1) for a fixed k grid.
struct FourierTable {
    phases: Vec<Vec<Complex64>>,
}

impl FourierTable {
    fn new(dim: usize, k_grid: &[f64]) -> Self {
        let half = (dim / 2) as f64;
        let scale = 1.0 / (dim as f64).sqrt();
        let phases = k_grid
            .iter()
            .map(|&k| {
                (0..dim)
                    .map(|i| Complex64::from_polar(scale, k * (i as f64 - half)))
                    .collect()
            })
            .collect();
        FourierTable { phases }
    }

    fn density(&self, psi: &[Complex64]) -> Vec<f64> {
        self.phases
            .iter()
            .map(|row| row.iter().zip(psi).map(|(p, z)| p * z).sum::<Complex64>().norm_sqr())
            .collect()
    }
}

/// |ψ(k)|² with ψ(k) = (2N+1)^{−1/2} Σₙ φₙ e^{ikan}, the projection onto the
/// Bloch wave Σₙ e^{−ikan}|n⟩ that a packet prepared with quasimomentum k
/// carries.
pub fn k_space(psi: &[Complex64], k_grid: &[f64]) -> Vec<f64> {
    FourierTable::new(psi.len(), k_grid).density(psi)
}

/// `points` uniform values over [−π, π).
pub fn zone_grid(points: usize) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    (0..points)
        .map(|i| -pi + 2.0 * pi * i as f64 / points as f64)
        .collect()
}

/// Circular mean arg Σ w(k) e^{ik} of a zone distribution.
pub fn mean_quasimomentum(distribution: &[f64], k_grid: &[f64]) -> f64 {
    let z: Complex64 = distribution
        .iter()
        .zip(k_grid)
        .map(|(&w, &k)| Complex64::from_polar(w, k))
        .sum();
    z.arg()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupations {
    /// p_r = |⟨φʳ|ψ₀⟩|², indexed by r.
    pub probabilities: Vec<f64>,
    /// 1 − Σ p_r for a unit-norm initial state.
    pub deficit: f64,
}

impl Occupations {
    /// Indices with p_r above `threshold`.
    pub fn populated(&self, threshold: f64) -> Vec<usize> {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > threshold)
            .map(|(r, _)| r)
            .collect()
    }
}

pub fn occupations(psi0: &WavePacket, spectrum: &Spectrum) -> Occupations {
    let probabilities: Vec<f64> = projections(&psi0.amplitudes, spectrum)
        .iter()
        .map(|c| c.norm_sqr())
        .collect();
    let deficit = psi0.norm() - probabilities.iter().sum::<f64>();
    Occupations {
        probabilities,
        deficit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, derive_params, LatticeParams};
    use crate::spectrum::eigendecompose;
    use std::f64::consts::PI;

    fn reference_lattice() -> DerivedParams {
        derive_params(&LatticeParams::rubidium_reference()).unwrap()
    }

    fn reference_spectrum(half: usize) -> (DerivedParams, Spectrum) {
        let d = reference_lattice();
        let h = build_hamiltonian(&d, half, 0.0).unwrap();
        let s = eigendecompose(&h, h.dim()).unwrap();
        (d, s)
    }

    #[test]
    fn packets_are_normalized() {
        for (n0, k0a, sigma0) in [(17.0, 0.0, 2.23), (0.0, PI, 2.23), (-3.5, 1.0, 0.7)] {
            let p = gaussian_packet(PacketSpec { n0, k0a, sigma0 }, 64).unwrap();
            assert!((p.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zone_edge_packet_alternates_sign() {
        let p = gaussian_packet(PacketSpec { n0: 0.0, k0a: PI, sigma0: 2.23 }, 20).unwrap();
        let n = p.amplitudes.len();
        for i in 0..n {
            let site = i as i64 - 20;
            let z = p.amplitudes[i];
            let sign = if site % 2 == 0 { 1.0 } else { -1.0 };
            assert!(z.im.abs() < 1e-15 && z.re * sign >= 0.0);
            assert!((z.norm_sqr() - p.amplitudes[n - 1 - i].norm_sqr()).abs() < 1e-16);
        }
    }

    #[test]
    fn packet_rejects_boundary_weight_and_bad_width() {
        assert!(matches!(
            gaussian_packet(PacketSpec { n0: 18.0, k0a: 0.0, sigma0: 2.0 }, 20),
            Err(Error::BoundaryWeight { .. })
        ));
        assert!(gaussian_packet(PacketSpec { n0: 0.0, k0a: 0.0, sigma0: 0.0 }, 20).is_err());
    }

    #[test]
    fn diagonal_hamiltonian_only_rotates_phases() {
        let w = 3.2e-4;
        let diag: Vec<f64> = (-8i64..=8).map(|n| w * (n * n) as f64).collect();
        let h = TridiagonalHamiltonian::from_parts(diag, 0.0).unwrap();
        let s = eigendecompose(&h, h.dim()).unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); 17];
        amps[8 + 5] = Complex64::new(1.0, 0.0);
        let psi0 = WavePacket::new(amps, 0.0);
        let times = [0.0, 100.0, 1234.5];
        let traj = propagate_spectral(&psi0, &s, &times).unwrap();
        for (t, p) in times.iter().zip(&traj.packets) {
            let z = p[8 + 5];
            assert!((z.norm() - 1.0).abs() < 1e-14);
            let expected = Complex64::from_polar(1.0, -w * 25.0 * t);
            assert!((z - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn eigenstates_are_stationary() {
        let (_, s) = reference_spectrum(64);
        let psi0 = WavePacket::new(s.states[7].to_complex(), 0.0);
        let traj = propagate_spectral(&psi0, &s, &[0.0, 500.0, 5000.0]).unwrap();
        for p in &traj.packets {
            for (z, a) in p.iter().zip(&s.states[7].amplitudes) {
                assert!((z.norm() - a.abs()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn incomplete_basis_is_rejected() {
        let d = reference_lattice();
        let h = build_hamiltonian(&d, 64, 0.0).unwrap();
        let s = eigendecompose(&h, 10).unwrap();
        let psi0 = gaussian_packet(PacketSpec { n0: 17.0, k0a: 0.0, sigma0: 2.23 }, 64).unwrap();
        assert!(matches!(
            propagate_spectral(&psi0, &s, &[0.0]),
            Err(Error::InsufficientBasis { .. })
        ));
        assert!(propagate_spectral(&psi0, &eigendecompose(&h, h.dim()).unwrap(), &[1.0, 0.5]).is_err());
    }

    #[test]
    fn spectral_and_direct_agree_on_a_small_lattice() {
        let (d, s) = reference_spectrum(48);
        let psi0 = gaussian_packet(PacketSpec { n0: 10.0, k0a: 0.4, sigma0: 2.0 }, 48).unwrap();
        let opts = DirectOptions::for_hamiltonian(s.hamiltonian(), 2.0 * d.dipole_period, 40);
        let direct = propagate_direct(&psi0, s.hamiltonian(), opts).unwrap();
        let spectral = propagate_spectral(&psi0, &s, &direct.times).unwrap();
        assert!(direct.max_amplitude_difference(&spectral) < 1e-8);
        assert!(direct.norm_drift() < 1e-12);
    }

    #[test]
    fn direct_step_is_bounded_and_reversible() {
        let (d, s) = reference_spectrum(32);
        let h = s.hamiltonian();
        let psi0 = gaussian_packet(PacketSpec { n0: 5.0, k0a: 0.0, sigma0: 2.0 }, 32).unwrap();
        let too_big = DirectOptions {
            dt: 0.06 / h.norm_bound(),
            t_end: 1.0,
            record_every: 1,
        };
        assert!(matches!(propagate_direct(&psi0, h, too_big), Err(Error::Config(_))));

        let opts = DirectOptions::for_hamiltonian(h, d.dipole_period, 4);
        let forward = propagate_direct(&psi0, h, opts).unwrap();
        let end = WavePacket::new(forward.packets.last().unwrap().clone(), 0.0);
        // U(−T) = K U(T) K for the real Hamiltonian.
        let back = propagate_direct(&end.conj(), h, opts).unwrap();
        let recovered = back.packets.last().unwrap();
        for (z, a) in recovered.iter().zip(&psi0.amplitudes) {
            assert!((z.conj() - a).norm() < 1e-8);
        }
    }

    #[test]
    fn k_space_peak_and_parseval() {
        let psi = gaussian_packet(PacketSpec { n0: 0.0, k0a: PI / 2.0, sigma0: 12.0 }, 128).unwrap();
        let grid = zone_grid(256);
        let dist = k_space(&psi.amplitudes, &grid);
        let (imax, _) = dist
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        assert!((grid[imax] - PI / 2.0).abs() < 2.0 * PI / 256.0 + 1e-12);
        let dk = 2.0 * PI / 256.0;
        let total: f64 = dist.iter().sum::<f64>() * dk * 257.0 / (2.0 * PI);
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert!((mean_quasimomentum(&dist, &grid) - PI / 2.0).abs() < 1e-6);
    }

    #[test]
    fn occupations_of_an_eigenstate() {
        let (_, s) = reference_spectrum(64);
        let psi0 = WavePacket::new(s.states[12].to_complex(), 0.0);
        let occ = occupations(&psi0, &s);
        for (r, p) in occ.probabilities.iter().enumerate() {
            let expected = if r == 12 { 1.0 } else { 0.0 };
            assert!((p - expected).abs() < 1e-12);
        }
        assert!(occ.deficit.abs() < 1e-12);
    }

    #[test]
    fn small_dipole_oscillation_follows_harmonic_law() {
        let (d, s) = reference_spectrum(128);
        let omega = d.harmonic_quantum();
        for n0 in [1.0, 2.0, 3.0] {
            let psi0 = gaussian_packet(PacketSpec { n0, k0a: 0.0, sigma0: 2.23 }, 128).unwrap();
            let times = dipole_time_grid(&d, 1.0, 401);
            let traj = propagate_spectral(&psi0, &s, &times).unwrap();
            let mean: Vec<f64> = traj.observables.iter().map(|o| o.mean_n).collect();
            let (amp, freq) = fit_cosine(&times, &mean, n0, omega);
            assert!((amp / n0 - 1.0).abs() <= 0.03, "n0={n0} amplitude {amp}");
            assert!((freq / omega - 1.0).abs() <= 0.03, "n0={n0} frequency {freq}");
        }
    }

    /// Least-squares fit of A cos(wt) by a coarse frequency scan and
    /// closed-form amplitude, refined by golden-section search.
    fn fit_cosine(t: &[f64], y: &[f64], _a0: f64, w0: f64) -> (f64, f64) {
        let cost = |w: f64| {
            let (mut cy, mut cc) = (0.0, 0.0);
            for (&ti, &yi) in t.iter().zip(y) {
                let c = (w * ti).cos();
                cy += c * yi;
                cc += c * c;
            }
            let a = cy / cc;
            let sse: f64 = t.iter().zip(y).map(|(&ti, &yi)| (yi - a * (w * ti).cos()).powi(2)).sum();
            (sse, a)
        };
        let (mut lo, mut hi) = (0.8 * w0, 1.2 * w0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if cost(m1).0 < cost(m2).0 {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let w = 0.5 * (lo + hi);
        (cost(w).1, w)
    }
}
