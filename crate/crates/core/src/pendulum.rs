//! Classical pendulum ℋ = (Ω/4)L² − 2J cos 2θ and its phase portrait.
//!
//! Lattice coordinates map onto the pendulum through L = 2x/a and θ = ka/2,
//! so in plotting coordinates (x/a, ka) the energy reads Ωx² − 2J cos ka.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DerivedParams;

/// Levels this close to ±2J are treated as the separatrix or the minimum.
pub const LEVEL_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumPoint {
    pub theta: f64,
    pub angular_momentum: f64,
    /// Position in units of a.
    pub x: f64,
    pub ka: f64,
}

impl PendulumPoint {
    pub fn from_lattice(x: f64, ka: f64) -> Self {
        PendulumPoint {
            theta: ka / 2.0,
            angular_momentum: 2.0 * x,
            x,
            ka,
        }
    }

    pub fn from_pendulum(theta: f64, angular_momentum: f64) -> Self {
        PendulumPoint {
            theta,
            angular_momentum,
            x: angular_momentum / 2.0,
            ka: 2.0 * theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    /// Vibration below the separatrix.
    Closed,
    /// Rotation above the separatrix.
    Open,
    Separatrix,
    /// The stable equilibrium, level −2J.
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    /// Energy level in E_R.
    pub level: f64,
    pub branch: usize,
    pub topology: Topology,
    pub points: Vec<PendulumPoint>,
}

pub fn pendulum_energy(theta: f64, angular_momentum: f64, d: &DerivedParams) -> f64 {
    0.25 * d.trap_strength * angular_momentum * angular_momentum - 2.0 * d.hopping * (2.0 * theta).cos()
}

/// The same energy in lattice coordinates (x in units of a).
pub fn lattice_energy(x: f64, ka: f64, d: &DerivedParams) -> f64 {
    d.trap_strength * x * x - 2.0 * d.hopping * ka.cos()
}

pub fn topology_of(level: f64, d: &DerivedParams) -> Option<Topology> {
    let edge = d.band_edge();
    if (level + edge).abs() <= LEVEL_SNAP {
        Some(Topology::FixedPoint)
    } else if level < -edge {
        None
    } else if (level - edge).abs() <= LEVEL_SNAP {
        Some(Topology::Separatrix)
    } else if level < edge {
        Some(Topology::Closed)
    } else {
        Some(Topology::Open)
    }
}

/// Separatrix half-width x_c(ka) = √((2J/Ω)(1 + cos ka)), units of a.
pub fn separatrix_position(ka: f64, d: &DerivedParams) -> f64 {
    (2.0 * d.hopping / d.trap_strength * (1.0 + ka.cos()).max(0.0)).sqrt()
}

/// Both separatrix branches sampled on `ka_grid`: branch 0 is +x_c, 1 is −x_c.
pub fn separatrix(ka_grid: &[f64], d: &DerivedParams) -> Result<Vec<PhaseCurve>> {
    if let Some(&bad) = ka_grid.iter().find(|k| !(k.abs() <= PI)) {
        return Err(Error::domain("ka", bad, "must lie in [-pi, pi]"));
    }
    let level = d.band_edge();
    let branch = |sign: f64, id: usize| PhaseCurve {
        level,
        branch: id,
        topology: Topology::Separatrix,
        points: ka_grid
            .iter()
            .map(|&ka| PendulumPoint::from_lattice(sign * separatrix_position(ka, d), ka))
            .collect(),
    };
    Ok(vec![branch(1.0, 0), branch(-1.0, 1)])
}

/// Sampling grid for [`phase_portrait`], in (x/a, ka).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortraitGrid {
    pub x_points: usize,
    pub k_points: usize,
    /// Half-extent in x; sized to the highest level when absent.
    pub x_max: Option<f64>,
}

impl Default for PortraitGrid {
    fn default() -> Self {
        PortraitGrid {
            x_points: 241,
            k_points: 241,
            x_max: None,
        }
    }
}

/// Contours ℋ = level of the pendulum energy in lattice coordinates.
///
/// Marching squares on the analytic field, then Newton steps along the
/// gradient until every vertex lies on its level to 1e-12. The separatrix
/// and the minimum are emitted analytically.
pub fn phase_portrait(levels: &[f64], d: &DerivedParams, grid: PortraitGrid) -> Result<Vec<PhaseCurve>> {
    if grid.x_points < 64 || grid.k_points < 64 {
        return Err(Error::domain(
            "portrait_grid",
            grid.x_points.min(grid.k_points) as f64,
            "needs at least 64 points per axis",
        ));
    }
    let top = levels.iter().copied().fold(d.band_edge(), f64::max);
    let x_max = grid
        .x_max
        .unwrap_or_else(|| 1.05 * ((top + 2.0 * d.hopping) / d.trap_strength).sqrt() + 1.0);
    let xs = linspace(-x_max, x_max, grid.x_points);
    let ks = linspace(-PI, PI, grid.k_points);

    let mut curves = Vec::new();
    for &level in levels {
        match topology_of(level, d) {
            None => {}
            Some(Topology::FixedPoint) => curves.push(PhaseCurve {
                level,
                branch: 0,
                topology: Topology::FixedPoint,
                points: vec![PendulumPoint::from_lattice(0.0, 0.0)],
            }),
            Some(Topology::Separatrix) => curves.extend(separatrix(&ks, d)?),
            Some(topology) => {
                let field = |x: f64, k: f64| lattice_energy(x, k, d) - level;
                for (branch, chain) in marching_squares(&xs, &ks, &field).into_iter().enumerate() {
                    let points = chain
                        .into_iter()
                        .map(|(x, k)| {
                            let (x, k) = refine(x, k, level, d);
                            PendulumPoint::from_lattice(x, k)
                        })
                        .collect();
                    curves.push(PhaseCurve {
                        level,
                        branch,
                        topology,
                        points,
                    });
                }
            }
        }
    }
    Ok(curves)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn refine(mut x: f64, mut k: f64, level: f64, d: &DerivedParams) -> (f64, f64) {
    for _ in 0..8 {
        let f = lattice_energy(x, k, d) - level;
        if f.abs() <= 1e-13 {
            break;
        }
        let gx = 2.0 * d.trap_strength * x;
        let gk = 2.0 * d.hopping * k.sin();
        let g2 = gx * gx + gk * gk;
        if g2 < 1e-300 {
            break;
        }
        x -= f * gx / g2;
        k -= f * gk / g2;
    }
    (x, k)
}

/// Crossing edges of a cell grid, keyed so that neighbouring cells agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    /// Between (i, j) and (i+1, j).
    AlongX(usize, usize),
    /// Between (i, j) and (i, j+1).
    AlongK(usize, usize),
}

fn marching_squares(xs: &[f64], ks: &[f64], field: &dyn Fn(f64, f64) -> f64) -> Vec<Vec<(f64, f64)>> {
    let (nx, nk) = (xs.len(), ks.len());
    let values: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| ks.iter().map(|&k| field(x, k)).collect())
        .collect();

    let crossing = |e: Edge| -> (f64, f64) {
        let ((i0, j0), (i1, j1)) = match e {
            Edge::AlongX(i, j) => ((i, j), (i + 1, j)),
            Edge::AlongK(i, j) => ((i, j), (i, j + 1)),
        };
        let (v0, v1) = (values[i0][j0], values[i1][j1]);
        let t = if v0 == v1 { 0.5 } else { v0 / (v0 - v1) };
        (
            xs[i0] + t * (xs[i1] - xs[i0]),
            ks[j0] + t * (ks[j1] - ks[j0]),
        )
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..nk - 1 {
            let corners = [
                values[i][j],
                values[i + 1][j],
                values[i + 1][j + 1],
                values[i][j + 1],
            ];
            let edges = [
                Edge::AlongX(i, j),
                Edge::AlongK(i + 1, j),
                Edge::AlongX(i, j + 1),
                Edge::AlongK(i, j),
            ];
            let cut: Vec<Edge> = (0..4)
                .filter(|&e| (corners[e] > 0.0) != (corners[(e + 1) % 4] > 0.0))
                .map(|e| edges[e])
                .collect();
            match cut.len() {
                2 => segments.push((cut[0], cut[1])),
                4 => {
                    // Saddle cell: the center value picks the connection.
                    let center = field(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ks[j] + ks[j + 1]));
                    if (center > 0.0) == (corners[0] > 0.0) {
                        segments.push((cut[0], cut[1]));
                        segments.push((cut[2], cut[3]));
                    } else {
                        segments.push((cut[0], cut[3]));
                        segments.push((cut[1], cut[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut chains = Vec::new();

    // Open chains start at edges touched by a single segment.
    let mut starts: Vec<usize> = (0..segments.len())
        .filter(|&s| {
            let (a, b) = segments[s];
            by_edge[&a].len() == 1 || by_edge[&b].len() == 1
        })
        .collect();
    starts.extend(0..segments.len());

    for s in starts {
        if used[s] {
            continue;
        }
        used[s] = true;
        let (a, b) = segments[s];
        let (mut tail, head) = if by_edge[&b].len() == 1 { (a, b) } else { (b, a) };
        let mut chain = vec![head, tail];
        while let Some(&next) = by_edge[&tail].iter().find(|&&n| !used[n]) {
            used[next] = true;
            let (p, q) = segments[next];
            tail = if p == tail { q } else { p };
            chain.push(tail);
        }
        chains.push(chain.into_iter().map(crossing).collect());
    }
    chains
}
