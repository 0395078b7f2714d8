//! Stationary states of the tridiagonal Hamiltonian: eigendecomposition in
//! the even/odd reflection sectors, classification against the band edge,
//! near-degenerate pair detection and a Mathieu-equation cross-check.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedParams, TridiagonalHamiltonian};
use crate::tridiag::symmetric_tridiagonal_eigen;

/// Sites at each lattice end used for truncation checks.
pub const BOUNDARY_SITES: usize = 5;
/// Largest tolerated weight of the top requested state on the boundary sites.
pub const TRUNCATION_TOLERANCE: f64 = 1e-10;
/// Reflection overlap above which two states count as a mirrored pair.
pub const PAIR_OVERLAP_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateClass {
    OscillatorLike,
    Intermediate,
    StarkLocalizedPair,
}

impl StateClass {
    pub fn label(self) -> &'static str {
        match self {
            StateClass::OscillatorLike => "oscillator",
            StateClass::Intermediate => "intermediate",
            StateClass::StarkLocalizedPair => "stark_pair",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenState {
    pub index: usize,
    pub energy: f64,
    /// Real site amplitudes, unit norm, indexed like the Hamiltonian.
    pub amplitudes: Vec<f64>,
    pub parity: Parity,
    /// Set by [`Spectrum::annotate`].
    pub class: Option<StateClass>,
    /// ⟨n⟩; zero up to rounding for parity-definite states.
    pub center_of_mass: f64,
    /// ⟨|n|⟩, the distance of the density from the trap center.
    pub arm_center: f64,
    pub ipr: f64,
}

impl EigenState {
    pub fn density(&self) -> impl Iterator<Item = f64> + '_ {
        self.amplitudes.iter().map(|a| a * a)
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePair {
    pub lower: usize,
    pub upper: usize,
    /// E_upper − E_lower, never negative.
    pub splitting: f64,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub states: Vec<EigenState>,
    pub pairs: Vec<StatePair>,
    /// First index r whose (r, r+1) neighbours form a mirrored pair.
    pub r_c_observed: Option<usize>,
    hamiltonian: TridiagonalHamiltonian,
}

/// Lowest `count` eigenpairs of a reflection-symmetric tridiagonal
/// Hamiltonian, energy ordered.
///
/// The matrix is split into the even and odd sectors under n → −n and each
/// sector is diagonalized separately, so every eigenvector is exactly
/// parity-definite even where the two sectors are degenerate to machine
/// precision. Sign convention: the largest-magnitude amplitude on n ≥ 0 is
/// positive.
pub fn eigendecompose(h: &TridiagonalHamiltonian, count: usize) -> Result<Spectrum> {
    let dim = h.dim();
    if count < 1 || count > dim {
        return Err(Error::Config(format!(
            "requested {count} eigenstates from a {dim}-site lattice"
        )));
    }
    if !h.is_reflection_symmetric() {
        return Err(Error::Config(
            "Hamiltonian diagonal is not symmetric under n -> -n".into(),
        ));
    }

    let half = h.half_width();
    let center = half;
    let d = h.diagonal();
    let t = h.off_diagonal();

    // Even sector: |0⟩ and (|j⟩ + |−j⟩)/√2.
    let even_diag: Vec<f64> = (0..=half).map(|j| d[center + j]).collect();
    let mut even_off = vec![t; half];
    even_off[0] = t * SQRT_2;
    // Odd sector: (|j⟩ − |−j⟩)/√2, j ≥ 1.
    let odd_diag: Vec<f64> = (1..=half).map(|j| d[center + j]).collect();
    let odd_off = vec![t; half - 1];

    let even = symmetric_tridiagonal_eigen(&even_diag, &even_off)?;
    let odd = symmetric_tridiagonal_eigen(&odd_diag, &odd_off)?;

    let mut raw: Vec<(f64, Parity, Vec<f64>)> = Vec::with_capacity(dim);
    for (value, u) in even.values.into_iter().zip(even.vectors) {
        let mut phi = vec![0.0; dim];
        phi[center] = u[0];
        for j in 1..=half {
            let a = u[j] * FRAC_1_SQRT_2;
            phi[center + j] = a;
            phi[center - j] = a;
        }
        raw.push((value, Parity::Even, phi));
    }
    for (value, v) in odd.values.into_iter().zip(odd.vectors) {
        let mut phi = vec![0.0; dim];
        for j in 1..=half {
            let a = v[j - 1] * FRAC_1_SQRT_2;
            phi[center + j] = a;
            phi[center - j] = -a;
        }
        raw.push((value, Parity::Odd, phi));
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.sign().cmp(&b.1.sign()).reverse()));
    raw.truncate(count);

    let states = raw
        .into_iter()
        .enumerate()
        .map(|(index, (energy, parity, mut amplitudes))| {
            fix_sign(&mut amplitudes, center);
            let (mut com, mut arm, mut ipr) = (0.0, 0.0, 0.0);
            for (i, a) in amplitudes.iter().enumerate() {
                let n = h.site(i) as f64;
                let w = a * a;
                com += n * w;
                arm += n.abs() * w;
                ipr += w * w;
            }
            EigenState {
                index,
                energy,
                amplitudes,
                parity,
                class: None,
                center_of_mass: com,
                arm_center: arm,
                ipr,
            }
        })
        .collect();

    Ok(Spectrum {
        states,
        pairs: Vec::new(),
        r_c_observed: None,
        hamiltonian: h.clone(),
    })
}

fn fix_sign(amplitudes: &mut [f64], center: usize) {
    let pivot = amplitudes[center..]
        .iter()
        .copied()
        .fold(0.0f64, |best, a| if a.abs() > best.abs() { a } else { best });
    if pivot < 0.0 {
        amplitudes.iter_mut().for_each(|a| *a = -*a);
    }
}

/// Classification options; `margin` defaults to one harmonic quantum 2√(JΩ).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub margin: Option<f64>,
}

impl ClassifyOptions {
    pub fn margin(&self, d: &DerivedParams) -> f64 {
        self.margin.unwrap_or_else(|| d.harmonic_quantum())
    }
}

/// Places a state below, at, or above the band edge 2J.
pub fn classify(s: &EigenState, d: &DerivedParams, opts: ClassifyOptions) -> StateClass {
    let edge = d.band_edge();
    let margin = opts.margin(d);
    if s.energy < edge - margin {
        StateClass::OscillatorLike
    } else if s.energy > edge + margin {
        StateClass::StarkLocalizedPair
    } else {
        StateClass::Intermediate
    }
}

/// Σₙ |a_n| |b_{−n}|: 1 when b's density is the mirror image of a's.
pub fn mirror_overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter().rev()).map(|(x, y)| (x * y).abs()).sum()
}

fn is_mirrored_pair(a: &EigenState, b: &EigenState) -> bool {
    a.parity != b.parity && mirror_overlap(&a.amplitudes, &b.amplitudes) > PAIR_OVERLAP_THRESHOLD
}

/// Near-degenerate pairs (r, r+1) above the critical eigennumber.
///
/// Pairing uses opposite parity plus mirrored densities, not an energy
/// threshold: at ε = 0 the splittings fall below double precision.
pub fn find_pairs(spec: &Spectrum, d: &DerivedParams) -> Vec<StatePair> {
    let states = &spec.states;
    let mut pairs = Vec::new();
    let mut r = d.critical_eigennumber + 1;
    while r + 1 < states.len() {
        let (a, b) = (&states[r], &states[r + 1]);
        if is_mirrored_pair(a, b) {
            pairs.push(StatePair {
                lower: r,
                upper: r + 1,
                splitting: b.energy - a.energy,
            });
            r += 2;
        } else {
            r += 1;
        }
    }
    pairs
}

impl Spectrum {
    pub fn hamiltonian(&self) -> &TridiagonalHamiltonian {
        &self.hamiltonian
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }

    /// Classifies every state, finds pairs and the observed onset of pairing.
    pub fn annotate(&mut self, d: &DerivedParams, opts: ClassifyOptions) {
        for s in &mut self.states {
            s.class = Some(classify(s, d, opts));
        }
        self.pairs = find_pairs(self, d);
        self.r_c_observed = self
            .states
            .windows(2)
            .position(|w| is_mirrored_pair(&w[0], &w[1]));
    }

    pub fn pair_of(&self, r: usize) -> Option<&StatePair> {
        self.pairs.iter().find(|p| p.lower == r || p.upper == r)
    }

    /// Largest ‖Hφ − Eφ‖ over the computed states.
    pub fn max_residual(&self) -> f64 {
        self.states
            .iter()
            .map(|s| {
                let h_phi = self.hamiltonian.apply_real(&s.amplitudes);
                h_phi
                    .iter()
                    .zip(&s.amplitudes)
                    .map(|(hp, p)| (hp - s.energy * p).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Weight of the highest computed state on the outermost sites.
    pub fn boundary_weight(&self) -> f64 {
        self.states.last().map_or(0.0, |s| boundary_weight(&s.amplitudes))
    }

    pub fn check_truncation(&self) -> Result<()> {
        let weight = self.boundary_weight();
        if weight >= TRUNCATION_TOLERANCE {
            return Err(Error::Truncation {
                index: self.states.len() - 1,
                weight,
            });
        }
        Ok(())
    }
}

pub(crate) fn boundary_weight(amplitudes: &[f64]) -> f64 {
    edge_weight(amplitudes.len(), |i| amplitudes[i] * amplitudes[i])
}

/// Total of `weight(i)` over the outermost [`BOUNDARY_SITES`] at each end.
pub(crate) fn edge_weight(len: usize, weight: impl Fn(usize) -> f64) -> f64 {
    let k = BOUNDARY_SITES.min(len / 2);
    (0..k).chain(len - k..len).map(weight).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MathieuCheck {
    pub r: usize,
    /// α_r = 4E_r/Ω.
    pub alpha: f64,
    /// ‖defect‖ / ‖ψ‖ on the θ grid.
    pub residual: f64,
}

/// Checks an eigenpair against the Mathieu equation of the pendulum.
///
/// Builds ψ(θ) = Σₙ φₙ e^{2inθ} on a uniform grid over [0, π) and applies
/// ψ'' + α ψ + (8J/Ω) cos 2θ ψ − (2ε/Ω) ψ(θ + π/2) with a spectral second
/// derivative. The last term is the binary-lattice stagger and vanishes at
/// ε = 0. The grid is enlarged when `grid_points` would alias the modes.
pub fn mathieu_residual(s: &EigenState, d: &DerivedParams, stagger: f64, grid_points: usize) -> Result<MathieuCheck> {
    if grid_points < 64 {
        return Err(Error::domain(
            "grid_points",
            grid_points as f64,
            "must be at least 64",
        ));
    }
    let half = s.amplitudes.len() / 2;
    let alias_free = 2 * (half + 1) + 2;
    let m = grid_points.max(alias_free);
    let m = m + m % 2;

    let omega = d.trap_strength;
    let alpha = 4.0 * s.energy / omega;

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(m);
    let inverse = planner.plan_fft_inverse(m);

    let mode = |k: usize| -> i64 {
        if k <= m / 2 {
            k as i64
        } else {
            k as i64 - m as i64
        }
    };

    let mut psi = vec![Complex64::new(0.0, 0.0); m];
    for (i, &a) in s.amplitudes.iter().enumerate() {
        let n = i as i64 - half as i64;
        psi[n.rem_euclid(m as i64) as usize] = Complex64::new(a, 0.0);
    }
    inverse.process(&mut psi);

    let mut second = psi.clone();
    forward.process(&mut second);
    for (k, c) in second.iter_mut().enumerate() {
        let n = mode(k) as f64;
        *c *= -4.0 * n * n / m as f64;
    }
    inverse.process(&mut second);

    let coupling = 8.0 * d.hopping / omega;
    let shift = 2.0 * stagger / omega;
    let (mut defect, mut norm) = (0.0, 0.0);
    for j in 0..m {
        let theta = PI * j as f64 / m as f64;
        let shifted = psi[(j + m / 2) % m];
        let r = second[j] + psi[j] * (alpha + coupling * (2.0 * theta).cos()) - shifted * shift;
        defect += r.norm_sqr();
        norm += psi[j].norm_sqr();
    }
    Ok(MathieuCheck {
        r: s.index,
        alpha,
        residual: (defect / norm).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, derive_params, LatticeParams};

    fn reference_lattice() -> DerivedParams {
        derive_params(&LatticeParams::rubidium_reference()).unwrap()
    }

    fn annotated(n: usize, eps: f64, count: usize) -> (DerivedParams, Spectrum) {
        let d = reference_lattice();
        let h = build_hamiltonian(&d, n, eps).unwrap();
        let mut s = eigendecompose(&h, count).unwrap();
        s.annotate(&d, ClassifyOptions::default());
        (d, s)
    }

    #[test]
    fn zero_hopping_is_the_sorted_diagonal() {
        let w = 3.2e-4;
        let diag: Vec<f64> = (-6i64..=6).map(|n| w * (n * n) as f64).collect();
        let h = TridiagonalHamiltonian::from_parts(diag, 0.0).unwrap();
        let s = eigendecompose(&h, 13).unwrap();
        let expected = [0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0];
        for (e, x) in s.energies().iter().zip(expected) {
            assert!((e - w * x).abs() < 1e-18);
        }
    }

    #[test]
    fn open_chain_closed_form() {
        let half = 20;
        let j = 2.4e-2;
        let h = TridiagonalHamiltonian::from_parts(vec![0.0; 2 * half + 1], j).unwrap();
        let s = eigendecompose(&h, 2 * half + 1).unwrap();
        let mut expected: Vec<f64> = (1..=2 * half + 1)
            .map(|m| -2.0 * j * (m as f64 * PI / (2 * half + 2) as f64).cos())
            .collect();
        expected.sort_by(f64::total_cmp);
        for (e, x) in s.energies().iter().zip(expected) {
            assert!((e - x).abs() < 1e-15);
        }
    }

    #[test]
    fn ground_state_near_harmonic_estimate() {
        let (d, s) = annotated(128, 0.0, 100);
        let estimate = -2.0 * d.hopping + (d.hopping * d.trap_strength).sqrt();
        assert!((s.states[0].energy - estimate).abs() < 0.02 * estimate.abs());
        assert!(s.max_residual() <= 1e-11 * s.hamiltonian().norm_bound());
        s.check_truncation().unwrap();
    }

    #[test]
    fn states_are_normalized_parity_definite_and_sign_fixed() {
        for eps in [0.0, 3.6e-4] {
            let (_, s) = annotated(128, eps, 100);
            for st in &s.states {
                let norm: f64 = st.density().sum();
                assert!((norm - 1.0).abs() < 1e-12);
                let p = st.parity.sign() as f64;
                let n = st.amplitudes.len();
                for i in 0..n {
                    assert!((st.amplitudes[n - 1 - i] - p * st.amplitudes[i]).abs() < 1e-10);
                }
                let right = &st.amplitudes[n / 2..];
                let pivot = right.iter().copied().fold(0.0f64, |b, a| if a.abs() > b.abs() { a } else { b });
                assert!(pivot > 0.0);
            }
            for w in s.states.windows(2) {
                assert!(w[0].energy <= w[1].energy);
            }
        }
    }

    #[test]
    fn classification_examples() {
        let (_, s) = annotated(128, 0.0, 100);
        assert_eq!(s.states[0].class, Some(StateClass::OscillatorLike));
        assert_eq!(s.states[20].class, Some(StateClass::Intermediate));
        assert_eq!(s.states[80].class, Some(StateClass::StarkLocalizedPair));
        // r = 80 sits on both arms near n = ±40.
        assert!((s.states[80].arm_center - 40.0).abs() < 2.0);
        // Loosening the margin to zero leaves only the sharp band-edge rule.
        let d = reference_lattice();
        let sharp = ClassifyOptions { margin: Some(0.0) };
        assert_eq!(classify(&s.states[20], &d, sharp), StateClass::OscillatorLike);
        assert_eq!(classify(&s.states[22], &d, sharp), StateClass::StarkLocalizedPair);
    }

    #[test]
    fn pairs_above_critical_number_only() {
        let (d, s) = annotated(128, 0.0, 100);
        assert!(!s.pairs.is_empty());
        for p in &s.pairs {
            assert!(p.lower > d.critical_eigennumber);
            assert_eq!(p.upper, p.lower + 1);
            assert!(p.splitting >= 0.0);
            assert_ne!(s.states[p.lower].parity, s.states[p.upper].parity);
        }
        // The pair holding r = 40 is numerically degenerate at ε = 0.
        let pair = s.pair_of(40).expect("r = 40 is paired");
        assert!(pair.splitting < 1e-13, "{pair:?}");
        // Pairing sets in right after the last state below the separatrix.
        assert_eq!(s.r_c_observed, Some(23));
    }

    #[test]
    fn pairs_survive_the_stagger() {
        let (_, s) = annotated(128, 3.6e-4, 100);
        let pair = s.pair_of(40).expect("r = 40 stays paired");
        let (a, b) = (&s.states[pair.lower], &s.states[pair.upper]);
        assert!(mirror_overlap(&a.amplitudes, &b.amplitudes) > 0.99);
    }

    #[test]
    fn splittings_shrink_with_r_until_the_floor() {
        let (_, s) = annotated(128, 0.0, 100);
        let splittings: Vec<f64> = s.pairs.iter().map(|p| p.splitting).collect();
        for w in splittings.windows(2) {
            if w[0] < 1e-13 {
                break;
            }
            assert!(w[1] <= w[0], "{splittings:?}");
        }
    }

    #[test]
    fn mathieu_residual_small_for_eigenstates() {
        for eps in [0.0, 3.6e-4] {
            let (d, s) = annotated(128, eps, 100);
            for st in &s.states {
                let check = mathieu_residual(st, &d, eps, 256).unwrap();
                assert!(check.residual <= 1e-8, "r={} eps={eps} {}", st.index, check.residual);
            }
        }
    }

    #[test]
    fn mathieu_alpha_of_ground_state() {
        let (d, s) = annotated(128, 0.0, 1);
        let check = mathieu_residual(&s.states[0], &d, 0.0, 64).unwrap();
        assert_eq!(check.alpha, 4.0 * s.states[0].energy / d.trap_strength);
        assert!((check.alpha + 565.4).abs() < 0.02 * 565.4, "{}", check.alpha);
    }

    #[test]
    fn mathieu_rejects_coarse_grids_and_flags_non_eigenvectors() {
        let (d, s) = annotated(32, 0.0, 3);
        assert!(mathieu_residual(&s.states[0], &d, 0.0, 32).is_err());
        let mut bogus = s.states[0].clone();
        bogus.amplitudes = (0..bogus.amplitudes.len())
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 10.0)
            .collect();
        let check = mathieu_residual(&bogus, &d, 0.0, 128).unwrap();
        assert!(check.residual > 1e-2);
    }

    #[test]
    fn bad_requests() {
        let d = reference_lattice();
        let h = build_hamiltonian(&d, 4, 0.0).unwrap();
        assert!(eigendecompose(&h, 0).is_err());
        assert!(eigendecompose(&h, 10).is_err());
        let lopsided = TridiagonalHamiltonian::from_parts(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        assert!(eigendecompose(&lopsided, 1).is_err());
    }

    #[test]
    fn truncation_flagged_for_extended_states() {
        let h = TridiagonalHamiltonian::from_parts(vec![0.0; 21], 1.0).unwrap();
        let s = eigendecompose(&h, 21).unwrap();
        assert!(matches!(s.check_truncation(), Err(Error::Truncation { .. })));
    }
}
