//! Lattice coherent states and Husimi Q distributions on (x, ka) grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DerivedParams;
use crate::spectrum::edge_weight;

/// Boundary weight above which a coherent state is reported as truncated.
pub const COHERENT_BOUNDARY_TOLERANCE: f64 = 1e-8;
/// Gaussian tails beyond this many widths are dropped (weight < 1e-31).
const WINDOW_WIDTHS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentStateSpec {
    /// Center in units of a; need not be a lattice site.
    pub x: f64,
    pub ka: f64,
    /// σ_x in units of a.
    pub sigma: f64,
}

/// c_n ∝ exp(−(n−x)²/2σ²) exp(−ik(n−x)), normalized on sites [−N, N].
pub fn coherent_state(spec: CoherentStateSpec, half_width: usize) -> Result<Vec<Complex64>> {
    if !(spec.sigma >= 0.5) {
        return Err(Error::domain(
            "sigma_x",
            spec.sigma,
            "coherent states narrower than 0.5 sites alias on the lattice",
        ));
    }
    let n0 = -(half_width as i64);
    let mut c: Vec<Complex64> = (0..2 * half_width + 1)
        .map(|i| {
            let dn = (n0 + i as i64) as f64 - spec.x;
            Complex64::from_polar((-dn * dn / (2.0 * spec.sigma * spec.sigma)).exp(), -spec.ka * dn)
        })
        .collect();
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::domain("x", spec.x, "coherent state lies outside the lattice"));
    }
    c.iter_mut().for_each(|z| *z /= norm);
    let edge = edge_weight(c.len(), |i| c[i].norm_sqr());
    if edge > COHERENT_BOUNDARY_TOLERANCE {
        log::warn!(
            "coherent state at x = {} carries {edge:e} on the lattice boundary",
            spec.x
        );
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Scaled so the largest value is 1.
    UnitMax,
    /// |⟨α|χ⟩|² as is; bounded by 1 for unit-norm states.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseField {
    /// Positions in units of a.
    pub x_grid: Vec<f64>,
    pub k_grid: Vec<f64>,
    /// Row-major with x as the slow index.
    pub values: Vec<f64>,
    pub normalization: Normalization,
    pub sigma: f64,
}

impl PhaseField {
    pub fn at(&self, ix: usize, ik: usize) -> f64 {
        self.values[ix * self.k_grid.len() + ik]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Grid node holding the maximum, as (x, ka).
    pub fn peak(&self) -> (f64, f64) {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        let nk = self.k_grid.len();
        (self.x_grid[i / nk], self.k_grid[i % nk])
    }

    /// Fraction of the summed Q on nodes where `select(x, ka)` holds.
    pub fn mass_fraction(&self, select: impl Fn(f64, f64) -> bool) -> f64 {
        let nk = self.k_grid.len();
        let (mut inside, mut total) = (0.0, 0.0);
        for (i, &q) in self.values.iter().enumerate() {
            total += q;
            if select(self.x_grid[i / nk], self.k_grid[i % nk]) {
                inside += q;
            }
        }
        inside / total
    }

    /// Q-weighted mean of `f(x, ka)` over nodes where `select` holds.
    pub fn weighted_mean(&self, f: impl Fn(f64, f64) -> f64, select: impl Fn(f64, f64) -> bool) -> f64 {
        let nk = self.k_grid.len();
        let (mut acc, mut total) = (0.0, 0.0);
        for (i, &q) in self.values.iter().enumerate() {
            let (x, k) = (self.x_grid[i / nk], self.k_grid[i % nk]);
            if select(x, k) {
                acc += q * f(x, k);
                total += q;
            }
        }
        acc / total
    }
}

/// Evaluation grid and coherent-state width for [`husimi`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub x_grid: Vec<f64>,
    pub k_grid: Vec<f64>,
    pub sigma: f64,
}

impl HusimiGrid {
    /// 201 × 201 nodes over x ∈ [−60, 60], ka ∈ [−π, π], σ_x = (J/Ω)^{1/4}.
    pub fn standard(d: &DerivedParams) -> Self {
        HusimiGrid::uniform(60.0, 201, 201, d.oscillator_length())
    }

    pub fn uniform(x_max: f64, x_points: usize, k_points: usize, sigma: f64) -> Self {
        let line = |a: f64, b: f64, n: usize| -> Vec<f64> {
            if n == 1 {
                return vec![0.5 * (a + b)];
            }
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        };
        HusimiGrid {
            x_grid: line(-x_max, x_max, x_points),
            k_grid: line(-PI, PI, k_points),
            sigma,
        }
    }
}

/// Q(x, k) = |⟨α_{x,k}|χ⟩|² at every grid node.
///
/// Direct summation over the sites inside a 12σ window around each x. The
/// k sweep reuses one phase rotation per site step.
pub fn husimi(state: &[Complex64], grid: &HusimiGrid, normalization: Normalization) -> Result<PhaseField> {
    if grid.x_grid.is_empty() || grid.k_grid.is_empty() {
        return Err(Error::Config("Husimi grid is empty".into()));
    }
    if state.len() % 2 == 0 {
        return Err(Error::Config("state length must be 2N+1".into()));
    }
    let sigma = grid.sigma;
    if !(sigma >= 0.5) {
        return Err(Error::domain("sigma_x", sigma, "must be at least 0.5"));
    }
    let half = (state.len() / 2) as i64;
    let nk = grid.k_grid.len();

    let rows: Vec<Vec<f64>> = grid
        .x_grid
        .par_iter()
        .map(|&x| {
            let lo = ((x - WINDOW_WIDTHS * sigma).floor() as i64).max(-half);
            let hi = ((x + WINDOW_WIDTHS * sigma).ceil() as i64).min(half);
            if lo > hi {
                return vec![0.0; nk];
            }
            let weights: Vec<f64> = (lo..=hi)
                .map(|n| {
                    let dn = n as f64 - x;
                    (-dn * dn / (2.0 * sigma * sigma)).exp()
                })
                .collect();
            let norm2: f64 = weights.iter().map(|w| w * w).sum();
            let terms: Vec<Complex64> = weights
                .iter()
                .zip(lo..=hi)
                .map(|(&w, n)| state[(n + half) as usize] * w)
                .collect();
            grid.k_grid
                .iter()
                .map(|&k| {
                    // Σ g_n e^{+ik(n−x)} φ_n, the conjugated coherent amplitude.
                    let step = Complex64::from_polar(1.0, k);
                    let mut phase = Complex64::from_polar(1.0, k * (lo as f64 - x));
                    let mut acc = Complex64::new(0.0, 0.0);
                    for t in &terms {
                        acc += t * phase;
                        phase *= step;
                    }
                    acc.norm_sqr() / norm2
                })
                .collect()
        })
        .collect();

    let mut values: Vec<f64> = rows.into_iter().flatten().collect();
    if normalization == Normalization::UnitMax {
        let max = values.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            values.iter_mut().for_each(|v| *v /= max);
        }
    }
    Ok(PhaseField {
        x_grid: grid.x_grid.clone(),
        k_grid: grid.k_grid.clone(),
        values,
        normalization,
        sigma,
    })
}
