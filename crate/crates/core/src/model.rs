//! Physical parameters, the dimensionless model constants derived from
//! them, and the (optionally staggered) tight-binding Hamiltonian.
//!
//! Internal units: energies in recoil energies E_R, times in ħ/E_R,
//! positions in lattice sites, quasimomentum as the dimensionless `ka`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic mass constant, kg (CODATA 2018).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of ⁸⁷Rb, kg.
pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;

/// Physical inputs of a parabolic lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// V₀ in units of E_R.
    pub lattice_depth: f64,
    /// a in meters.
    pub lattice_constant: f64,
    /// m in kilograms.
    pub atom_mass: f64,
    /// ω in rad/s.
    pub trap_frequency: f64,
    /// Binary-lattice energy mismatch ε in units of E_R.
    pub stagger: f64,
    /// Explicit J in E_R; supersedes the deep-lattice asymptote.
    pub hopping_override: Option<f64>,
    /// Explicit Ω in E_R; supersedes mω²a²/2.
    pub trap_override: Option<f64>,
    /// Gap Δ to the first excited band in E_R, for the single-band bound.
    pub band_gap: Option<f64>,
}

impl LatticeParams {
    /// ⁸⁷Rb in a 10 E_R lattice with a = 397.5 nm and ω = 2π·36 Hz, with
    /// the quoted working values J = 2.4e-2 E_R and Ω = 3.2e-4 E_R pinned.
    pub fn rubidium_reference() -> Self {
        LatticeParams {
            lattice_depth: 10.0,
            lattice_constant: 397.5e-9,
            atom_mass: RB87_MASS,
            trap_frequency: 2.0 * PI * 36.0,
            stagger: 0.0,
            hopping_override: Some(2.4e-2),
            trap_override: Some(3.2e-4),
            band_gap: None,
        }
    }

    pub fn with_stagger(mut self, stagger: f64) -> Self {
        self.stagger = stagger;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lattice_depth", self.lattice_depth),
            ("lattice_constant", self.lattice_constant),
            ("atom_mass", self.atom_mass),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::domain(name, value, "must be positive"));
            }
        }
        if !(self.trap_frequency >= 0.0 && self.trap_frequency.is_finite()) {
            return Err(Error::domain(
                "trap_frequency",
                self.trap_frequency,
                "must be non-negative",
            ));
        }
        if !(self.stagger >= 0.0 && self.stagger.is_finite()) {
            return Err(Error::domain("stagger", self.stagger, "must be non-negative"));
        }
        let optional = [
            ("hopping_override", self.hopping_override),
            ("trap_override", self.trap_override),
            ("band_gap", self.band_gap),
        ];
        for (name, value) in optional {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::domain(name, v, "must be positive when given"));
                }
            }
        }
        Ok(())
    }
}

/// Dimensionless constants of the tight-binding model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// E_R in joules.
    pub recoil_energy: f64,
    /// J in E_R.
    pub hopping: f64,
    /// Ω in E_R.
    pub trap_strength: f64,
    /// q = 4J/Ω.
    pub mathieu_q: f64,
    /// r_c = nearest integer to √(2q).
    pub critical_eigennumber: usize,
    /// T_D = π/√(JΩ) in ħ/E_R.
    pub dipole_period: f64,
    /// ħ/E_R in seconds.
    pub time_unit: f64,
    pub band_gap: Option<f64>,
    /// n_max = √(Δ/Ω), present only when Δ is known.
    pub validity_bound: Option<f64>,
}

/// Deep-lattice hopping asymptote J ≈ (4/√π) V^{3/4} exp(−2√V), V in E_R.
pub fn asymptotic_hopping(lattice_depth: f64) -> f64 {
    4.0 / PI.sqrt() * lattice_depth.powf(0.75) * (-2.0 * lattice_depth.sqrt()).exp()
}

pub fn recoil_energy(lattice_constant: f64, atom_mass: f64) -> f64 {
    let k = HBAR * PI / lattice_constant;
    k * k / (2.0 * atom_mass)
}

pub fn mathieu_q(hopping: f64, trap: f64) -> f64 {
    4.0 * hopping / trap
}

pub fn critical_eigennumber(hopping: f64, trap: f64) -> usize {
    (2.0 * mathieu_q(hopping, trap)).sqrt().round() as usize
}

pub fn dipole_period(hopping: f64, trap: f64) -> f64 {
    PI / (hopping * trap).sqrt()
}

pub fn derive_params(p: &LatticeParams) -> Result<DerivedParams> {
    p.validate()?;
    let recoil = recoil_energy(p.lattice_constant, p.atom_mass);
    let hopping = p
        .hopping_override
        .unwrap_or_else(|| asymptotic_hopping(p.lattice_depth));
    let trap = match p.trap_override {
        Some(t) => t,
        None => {
            let w = p.trap_frequency;
            p.atom_mass * w * w * p.lattice_constant * p.lattice_constant / 2.0 / recoil
        }
    };
    if !(trap > 0.0) {
        return Err(Error::domain(
            "trap_strength",
            trap,
            "Ω = 0 leaves q, r_c and T_D undefined",
        ));
    }
    if !(hopping > 0.0 && hopping.is_finite()) {
        return Err(Error::domain("hopping", hopping, "must be positive"));
    }
    Ok(DerivedParams {
        recoil_energy: recoil,
        hopping,
        trap_strength: trap,
        mathieu_q: mathieu_q(hopping, trap),
        critical_eigennumber: critical_eigennumber(hopping, trap),
        dipole_period: dipole_period(hopping, trap),
        time_unit: HBAR / recoil,
        band_gap: p.band_gap,
        validity_bound: p.band_gap.map(|gap| (gap / trap).sqrt()),
    })
}

impl DerivedParams {
    /// One harmonic quantum at the trap bottom, 2√(JΩ).
    pub fn harmonic_quantum(&self) -> f64 {
        2.0 * (self.hopping * self.trap_strength).sqrt()
    }

    /// Pendulum separatrix energy, the band edge 2J.
    pub fn band_edge(&self) -> f64 {
        2.0 * self.hopping
    }

    /// Ground-state length (J/Ω)^{1/4} of the harmonic approximation, in sites.
    pub fn oscillator_length(&self) -> f64 {
        (self.hopping / self.trap_strength).powf(0.25)
    }

    pub fn to_seconds(&self, t: f64) -> f64 {
        t * self.time_unit
    }

    pub fn to_millis(&self, t: f64) -> f64 {
        t * self.time_unit * 1e3
    }

    pub fn from_seconds(&self, seconds: f64) -> f64 {
        seconds / self.time_unit
    }
}

/// Bloch period πħ/(Ω|n₀|) for the local force 2Ωn₀/a at site n₀.
///
/// A diagnostic for the one-sided oscillations above the separatrix, not an
/// exact period: the force varies across the packet.
pub fn local_bloch_period(d: &DerivedParams, n0: f64) -> Result<f64> {
    if n0 == 0.0 {
        return Err(Error::UndefinedPeriod);
    }
    Ok(PI / (d.trap_strength * n0.abs()))
}

/// Real symmetric tridiagonal operator on sites n ∈ [−N, N] with a uniform
/// off-diagonal −J.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalHamiltonian {
    half_width: usize,
    diagonal: Vec<f64>,
    hopping: f64,
}

pub fn build_hamiltonian(d: &DerivedParams, half_width: usize, stagger: f64) -> Result<TridiagonalHamiltonian> {
    if half_width < 1 {
        return Err(Error::domain("half_width", half_width as f64, "must be at least 1"));
    }
    if !(stagger >= 0.0 && stagger.is_finite()) {
        return Err(Error::domain("stagger", stagger, "must be non-negative"));
    }
    let n_max = half_width as i64;
    let diagonal = (-n_max..=n_max)
        .map(|n| {
            // Built from |n| so the n → −n symmetry is exact in floating point.
            let m = n.unsigned_abs();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            d.trap_strength * (m * m) as f64 + 0.5 * stagger * sign
        })
        .collect();
    Ok(TridiagonalHamiltonian {
        half_width,
        diagonal,
        hopping: d.hopping,
    })
}

impl TridiagonalHamiltonian {
    /// Arbitrary diagonal of odd length 2N+1 with off-diagonal −`hopping`.
    pub fn from_parts(diagonal: Vec<f64>, hopping: f64) -> Result<Self> {
        if diagonal.len() < 3 || diagonal.len() % 2 == 0 {
            return Err(Error::Config(format!(
                "diagonal length {} is not 2N+1 with N ≥ 1",
                diagonal.len()
            )));
        }
        Ok(TridiagonalHamiltonian {
            half_width: diagonal.len() / 2,
            diagonal,
            hopping,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// J; the matrix off-diagonal is −J.
    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn off_diagonal(&self) -> f64 {
        -self.hopping
    }

    /// Site label n of storage index i.
    pub fn site(&self, i: usize) -> i64 {
        i as i64 - self.half_width as i64
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.dim()).map(|i| self.site(i))
    }

    /// Gershgorin bound on ‖H‖₂.
    pub fn norm_bound(&self) -> f64 {
        let t = self.hopping.abs();
        self.diagonal
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let links = usize::from(i > 0) + usize::from(i + 1 < self.dim());
                d.abs() + links as f64 * t
            })
            .fold(0.0, f64::max)
    }

    pub fn is_reflection_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n / 2).all(|i| self.diagonal[i] == self.diagonal[n - 1 - i])
    }

    /// Max-entry norm of HP − PH, P the site reflection n → −n.
    pub fn reflection_commutator_norm(&self) -> f64 {
        // The off-diagonal is uniform, so only the diagonal can break symmetry.
        let n = self.dim();
        (0..n)
            .map(|i| (self.diagonal[i] - self.diagonal[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(psi.len(), n, "state length does not match the lattice");
        let off = self.off_diagonal();
        (0..n)
            .map(|i| {
                let mut acc = psi[i] * self.diagonal[i];
                if i > 0 {
                    acc += psi[i - 1] * off;
                }
                if i + 1 < n {
                    acc += psi[i + 1] * off;
                }
                acc
            })
            .collect()
    }

    pub fn apply_real(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(phi.len(), n, "state length does not match the lattice");
        let off = self.off_diagonal();
        (0..n)
            .map(|i| {
                let mut acc = phi[i] * self.diagonal[i];
                if i > 0 {
                    acc += phi[i - 1] * off;
                }
                if i + 1 < n {
                    acc += phi[i + 1] * off;
                }
                acc
            })
            .collect()
    }

    /// ⟨ψ|H|ψ⟩ (real for Hermitian H).
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let h_psi = self.apply(psi);
        psi.iter().zip(&h_psi).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_lattice() -> DerivedParams {
        derive_params(&LatticeParams::rubidium_reference()).unwrap()
    }

    #[test]
    fn asymptotic_hopping_at_ten_recoils() {
        let mut p = LatticeParams::rubidium_reference();
        p.hopping_override = None;
        let d = derive_params(&p).unwrap();
        // (4/√π)·10^{3/4}·e^{−2√10}
        let expected = 4.0 / PI.sqrt() * 10f64.powf(0.75) * (-2.0 * 10f64.sqrt()).exp();
        assert_eq!(d.hopping, expected);
        assert!((d.hopping - 2.2739e-2).abs() < 1e-6, "J = {}", d.hopping);
    }

    #[test]
    fn reference_constants() {
        let d = reference_lattice();
        assert!((d.mathieu_q - 300.0).abs() < 1e-9);
        assert_eq!(d.critical_eigennumber, 24);
        assert!((d.time_unit - 43.8e-6).abs() < 0.05e-6, "ħ/E_R = {}", d.time_unit);
        assert!((d.dipole_period - 1133.6).abs() < 0.5, "T_D = {}", d.dipole_period);
        assert!((d.to_millis(d.dipole_period) - 49.7).abs() < 0.1);
        // 7.7 dipole periods ≈ 381 ms
        assert!((d.to_millis(7.7 * d.dipole_period) - 382.0).abs() < 2.0);
    }

    #[test]
    fn trap_strength_from_frequency() {
        let mut p = LatticeParams::rubidium_reference();
        p.trap_override = None;
        let d = derive_params(&p).unwrap();
        let w = p.trap_frequency;
        let expected = RB87_MASS * w * w * 397.5e-9 * 397.5e-9 / 2.0 / d.recoil_energy;
        assert!((d.trap_strength - expected).abs() < 1e-18);
        assert!((d.trap_strength - 2.42e-4).abs() < 0.01e-4);
    }

    #[test]
    fn validity_bound_from_gap() {
        let mut p = LatticeParams::rubidium_reference();
        p.band_gap = Some(3.2e-4 * 129.0 * 129.0);
        let d = derive_params(&p).unwrap();
        assert!((d.validity_bound.unwrap() - 129.0).abs() < 1e-9);
        assert!(reference_lattice().validity_bound.is_none());
    }

    #[test]
    fn derived_fields_recompute_bit_for_bit() {
        let d = reference_lattice();
        assert_eq!(d.mathieu_q, mathieu_q(d.hopping, d.trap_strength));
        assert_eq!(d.critical_eigennumber, critical_eigennumber(d.hopping, d.trap_strength));
        assert_eq!(d.dipole_period, dipole_period(d.hopping, d.trap_strength));
    }

    #[test]
    fn unit_round_trip() {
        let d = reference_lattice();
        for s in [1e-6, 0.381, 12.0] {
            let back = d.to_seconds(d.from_seconds(s));
            assert!(((back - s) / s).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let base = LatticeParams::rubidium_reference();
        let cases: Vec<Box<dyn Fn(&mut LatticeParams)>> = vec![
            Box::new(|p| p.lattice_depth = 0.0),
            Box::new(|p| p.lattice_constant = -1.0),
            Box::new(|p| p.atom_mass = 0.0),
            Box::new(|p| p.trap_frequency = -1.0),
            Box::new(|p| p.stagger = -1e-4),
            Box::new(|p| p.hopping_override = Some(0.0)),
            Box::new(|p| {
                p.trap_override = None;
                p.trap_frequency = 0.0;
            }),
        ];
        for mutate in cases {
            let mut p = base.clone();
            mutate(&mut p);
            assert!(matches!(derive_params(&p), Err(Error::Domain { .. })), "{p:?}");
        }
    }

    #[test]
    fn small_hamiltonian_diagonals() {
        let d = reference_lattice();
        let w = d.trap_strength;
        let h = build_hamiltonian(&d, 2, 0.0).unwrap();
        assert_eq!(h.diagonal(), &[4.0 * w, w, 0.0, w, 4.0 * w]);
        assert_eq!(h.off_diagonal(), -d.hopping);

        let eps = 3.6e-4;
        let h = build_hamiltonian(&d, 2, eps).unwrap();
        let expected = [4.0 * w + eps / 2.0, w - eps / 2.0, eps / 2.0, w - eps / 2.0, 4.0 * w + eps / 2.0];
        for (a, b) in h.diagonal().iter().zip(expected) {
            assert!((a - b).abs() < 1e-18);
        }
        assert!(build_hamiltonian(&d, 0, 0.0).is_err());
    }

    #[test]
    fn hamiltonian_commutes_with_reflection() {
        let d = reference_lattice();
        for n in [1, 7, 64, 128] {
            for eps in [0.0, 3.6e-4, 1e-2] {
                let h = build_hamiltonian(&d, n, eps).unwrap();
                assert!(h.is_reflection_symmetric());
                assert_eq!(h.reflection_commutator_norm(), 0.0);
            }
        }
    }

    #[test]
    fn bloch_period() {
        let d = reference_lattice();
        let t30 = local_bloch_period(&d, 30.0).unwrap();
        assert!((t30 - 327.25).abs() < 0.1, "{t30}");
        let t60 = local_bloch_period(&d, -60.0).unwrap();
        assert!((t60 - t30 / 2.0).abs() < 1e-9);
        assert!(matches!(local_bloch_period(&d, 0.0), Err(Error::UndefinedPeriod)));
    }
}
