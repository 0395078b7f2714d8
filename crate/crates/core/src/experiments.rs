//! Scenario catalog, tunneling-time measurement and the file-producing runs
//! behind the command-line tool.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Config;
use crate::dynamics::{
    self, dipole_time_grid, gaussian_packet, mean_quasimomentum, occupations, propagate_spectral, zone_grid,
    Occupations, PacketSpec, Side, Trajectory, WavePacket,
};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, derive_params, DerivedParams, LatticeParams};
use crate::output::{real, write_json, write_pgm, CsvTable};
use crate::pendulum::{lattice_energy, phase_portrait, separatrix, PortraitGrid};
use crate::phasespace::{husimi, HusimiGrid, Normalization};
use crate::spectrum::{self, eigendecompose, ClassifyOptions, Spectrum, StatePair};

/// P_opposite must exceed this at the peak that counts as a transfer.
pub const TRANSFER_THRESHOLD: f64 = 0.5;
/// Required horizon in units of the stagger prediction πħ/ε.
pub const HORIZON_FACTOR: f64 = 1.5;
/// Arm weight that marks a sample as belonging to one side.
pub const ARM_WINDOW_WEIGHT: f64 = 0.9;
/// Minimum consecutive-sample steps on each side for a drift estimate.
pub const MIN_DRIFT_STEPS: usize = 8;
/// Weight threshold for "populated" eigenstates.
pub const POPULATION_THRESHOLD: f64 = 0.01;
/// Stagger of the binary-lattice scenarios, E_R.
pub const REFERENCE_STAGGER: f64 = 3.6e-4;
/// Packet width of the dynamics scenarios, sites.
pub const REFERENCE_WIDTH: f64 = 2.23;
pub const REFERENCE_HUSIMI_STATES: [usize; 8] = [0, 1, 15, 20, 24, 25, 35, 80];
pub const BUILTIN_NAMES: [&str; 9] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Spectrum,
    Pendulum,
    Husimi,
    Evolve,
    Tunneling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPacket {
    pub label: String,
    pub spec: PacketSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Physical parameters; `lattice.stagger` is the binary-lattice ε.
    pub lattice: LatticeParams,
    /// Initial states. Dynamics runs use the first; occupation tables list all.
    pub packets: Vec<NamedPacket>,
    /// Propagation horizon in dipole periods.
    pub horizon_td: f64,
    pub outputs: Vec<OutputKind>,
    /// Eigenstates singled out for Husimi maps.
    pub states: Vec<usize>,
}

impl Scenario {
    pub fn stagger(&self) -> f64 {
        self.lattice.stagger
    }

    pub fn packet(&self) -> Result<&PacketSpec> {
        self.packets
            .first()
            .map(|p| &p.spec)
            .ok_or_else(|| Error::Config(format!("scenario `{}` defines no wave packet", self.name)))
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        if !(self.horizon_td > 0.0) {
            return Err(Error::domain("horizon_TD", self.horizon_td, "must be positive"));
        }
        Ok(())
    }

    /// Replaces the stagger, keeping everything else.
    pub fn with_stagger(mut self, stagger: f64) -> Self {
        self.lattice.stagger = stagger;
        self
    }

    /// Built-in scenario `name` on the given lattice. The packet, stagger and
    /// horizon are fixed per scenario; the lattice's own stagger is replaced.
    pub fn builtin(name: &str, lattice: LatticeParams) -> Result<Scenario> {
        let packet = |label: &str, n0: f64, k0a: f64| NamedPacket {
            label: label.to_owned(),
            spec: PacketSpec {
                n0,
                k0a,
                sigma0: REFERENCE_WIDTH,
            },
        };
        let (packets, stagger, outputs, states) = match name {
            "fig1" => (vec![], 0.0, vec![OutputKind::Spectrum], vec![]),
            "fig2" => (
                vec![],
                0.0,
                vec![OutputKind::Husimi, OutputKind::Pendulum],
                REFERENCE_HUSIMI_STATES.to_vec(),
            ),
            "fig3" => (vec![packet("fig3", 17.0, 0.0)], 0.0, vec![OutputKind::Evolve], vec![]),
            "fig4" => (vec![packet("fig4", 17.0, PI)], 0.0, vec![OutputKind::Evolve], vec![]),
            "fig5" => (vec![packet("fig5", 0.0, PI)], 0.0, vec![OutputKind::Evolve], vec![]),
            "fig6" => (vec![packet("fig6", 0.0, PI / 2.0)], 0.0, vec![OutputKind::Evolve], vec![]),
            "fig7" => (
                vec![
                    packet("fig3", 17.0, 0.0),
                    packet("fig4", 17.0, PI),
                    packet("fig5", 0.0, PI),
                    packet("fig6", 0.0, PI / 2.0),
                ],
                0.0,
                vec![OutputKind::Spectrum],
                vec![],
            ),
            "fig8" => (vec![], REFERENCE_STAGGER, vec![OutputKind::Spectrum], vec![40, 41]),
            "fig9" => (
                vec![packet("fig9", 30.0, 0.0)],
                REFERENCE_STAGGER,
                vec![OutputKind::Tunneling],
                vec![],
            ),
            other => return Err(Error::UnknownScenario(other.to_owned())),
        };
        Ok(Scenario {
            name: name.to_owned(),
            lattice: LatticeParams { stagger, ..lattice },
            packets,
            horizon_td: crate::config::DEFAULT_HORIZON_TD,
            outputs,
            states,
        })
    }

    /// The named built-in on the config's lattice, or the config's own
    /// `scenario` block when no name is given.
    pub fn from_config(config: &Config, name: Option<&str>) -> Result<Scenario> {
        if let Some(name) = name {
            return Scenario::builtin(name, config.lattice());
        }
        let packets = config
            .scenario
            .map(|s| {
                vec![NamedPacket {
                    label: "custom".to_owned(),
                    spec: s.packet(),
                }]
            })
            .unwrap_or_default();
        Ok(Scenario {
            name: "custom".to_owned(),
            lattice: config.lattice(),
            packets,
            horizon_td: config.scenario.map_or(crate::config::DEFAULT_HORIZON_TD, |s| s.horizon_td),
            outputs: vec![
                OutputKind::Spectrum,
                OutputKind::Pendulum,
                OutputKind::Husimi,
                OutputKind::Evolve,
                OutputKind::Tunneling,
            ],
            states: vec![],
        })
    }
}

/// Numerical settings shared by every run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub half_width: usize,
    pub samples: usize,
    pub k_points: usize,
    pub eigenstates: usize,
    /// Husimi coherent-state width; (J/Ω)^{1/4} when absent.
    pub husimi_sigma: Option<f64>,
    pub classify: ClassifyOptions,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings::from_config(&Config::reference())
    }
}

impl RunSettings {
    pub fn from_config(c: &Config) -> Self {
        RunSettings {
            half_width: c.half_width,
            samples: c.samples,
            k_points: c.k_points,
            eigenstates: c.eigenstates,
            husimi_sigma: c.husimi_sigma,
            classify: ClassifyOptions::default(),
        }
    }
}

/// Everything computed for one packet in one scenario.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub derived: DerivedParams,
    /// Full eigenbasis, annotated.
    pub spectrum: Spectrum,
    pub initial: WavePacket,
    pub trajectory: Trajectory,
    pub occupations: Occupations,
}

/// Propagates the scenario's first packet over its horizon on the default
/// time grid, using the complete eigenbasis.
pub fn simulate(scenario: &Scenario, settings: &RunSettings) -> Result<Simulation> {
    let inner = || {
        scenario.validate()?;
        let d = derive_params(&scenario.lattice)?;
        let spectrum = full_spectrum(&d, scenario.stagger(), settings)?;
        let initial = gaussian_packet(*scenario.packet()?, settings.half_width)?;
        let times = dipole_time_grid(&d, scenario.horizon_td, settings.samples);
        let trajectory = propagate_spectral(&initial, &spectrum, &times)?;
        let occupations = occupations(&initial, &spectrum);
        Ok(Simulation {
            derived: d,
            spectrum,
            initial,
            trajectory,
            occupations,
        })
    };
    inner().map_err(|e: Error| e.in_scenario(&scenario.name))
}

fn full_spectrum(d: &DerivedParams, stagger: f64, settings: &RunSettings) -> Result<Spectrum> {
    let h = build_hamiltonian(d, settings.half_width, stagger)?;
    let mut s = eigendecompose(&h, h.dim())?;
    s.annotate(d, settings.classify);
    Ok(s)
}

/// The pair carrying the largest combined occupation.
pub fn dominant_pair(spectrum: &Spectrum, occupations: &Occupations) -> Option<StatePair> {
    let weight = |p: &StatePair| occupations.probabilities[p.lower] + occupations.probabilities[p.upper];
    spectrum
        .pairs
        .iter()
        .filter(|p| p.upper < occupations.probabilities.len())
        .max_by(|a, b| weight(a).total_cmp(&weight(b)))
        .copied()
}

/// Predictions and bookkeeping the tunneling measurement reports against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelingContext {
    pub derived: DerivedParams,
    pub stagger: f64,
    pub dominant_pair: Option<StatePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelingReport {
    pub start_side: Side,
    /// False when P_opposite never peaks above the threshold within the horizon.
    pub transferred: bool,
    /// Measured T_tun in ħ/E_R.
    pub tunneling_time: Option<f64>,
    pub tunneling_time_ms: Option<f64>,
    /// T_tun / T_D.
    pub dipole_periods: Option<f64>,
    /// πħ/ε in ħ/E_R; absent for ε = 0.
    pub stagger_prediction: Option<f64>,
    pub stagger_prediction_ms: Option<f64>,
    pub dominant_pair: Option<StatePair>,
    /// πħ/ΔE of the dominant pair; absent when ΔE is not positive.
    pub splitting_prediction: Option<f64>,
    pub splitting_prediction_ms: Option<f64>,
    /// max_t P_opposite(t).
    pub transfer_completeness: f64,
    pub horizon: f64,
}

impl TunnelingReport {
    /// |T(ΔE) − T(ε)| / T(ε), when both predictions exist.
    pub fn prediction_mismatch(&self) -> Option<f64> {
        match (self.splitting_prediction, self.stagger_prediction) {
            (Some(a), Some(b)) => Some((a - b).abs() / b),
            _ => None,
        }
    }
}

/// Locates the first local maximum of P_opposite above 0.5 and refines it
/// with a parabola through the three samples around it.
pub fn measure_tunneling_time(traj: &Trajectory, start_side: Side, ctx: &TunnelingContext) -> Result<TunnelingReport> {
    let d = &ctx.derived;
    let horizon = traj.horizon();
    let stagger_prediction = (ctx.stagger > 0.0).then(|| PI / ctx.stagger);
    if let Some(t) = stagger_prediction {
        if horizon < HORIZON_FACTOR * t {
            return Err(Error::domain(
                "horizon",
                horizon,
                "shorter than 1.5 times the stagger prediction",
            ));
        }
    }
    let opposite: Vec<f64> = traj.observables.iter().map(|o| start_side.opposite().weight(o)).collect();
    let completeness = opposite.iter().copied().fold(0.0, f64::max).clamp(0.0, 1.0);

    let peak = (1..opposite.len().saturating_sub(1)).find(|&i| {
        opposite[i] > TRANSFER_THRESHOLD && opposite[i] >= opposite[i - 1] && opposite[i] > opposite[i + 1]
    });
    let tunneling_time = peak.map(|i| {
        let (t0, t1, t2) = (traj.times[i - 1], traj.times[i], traj.times[i + 1]);
        let (y0, y1, y2) = (opposite[i - 1], opposite[i], opposite[i + 1]);
        parabola_vertex(t0, t1, t2, y0, y1, y2)
    });

    let splitting_prediction = ctx
        .dominant_pair
        .and_then(|p| (p.splitting > 0.0).then(|| PI / p.splitting));
    Ok(TunnelingReport {
        start_side,
        transferred: tunneling_time.is_some(),
        tunneling_time,
        tunneling_time_ms: tunneling_time.map(|t| d.to_millis(t)),
        dipole_periods: tunneling_time.map(|t| t / d.dipole_period),
        stagger_prediction,
        stagger_prediction_ms: stagger_prediction.map(|t| d.to_millis(t)),
        dominant_pair: ctx.dominant_pair,
        splitting_prediction,
        splitting_prediction_ms: splitting_prediction.map(|t| d.to_millis(t)),
        transfer_completeness: completeness,
        horizon,
    })
}

/// Abscissa of the vertex of the parabola through three points.
fn parabola_vertex(t0: f64, t1: f64, t2: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let num = (t1 - t0).powi(2) * (y1 - y2) - (t1 - t2).powi(2) * (y1 - y0);
    let den = (t1 - t0) * (y1 - y2) - (t1 - t2) * (y1 - y0);
    if den == 0.0 {
        return t1;
    }
    (t1 - 0.5 * num / den).clamp(t0, t2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionVerdict {
    Inverted,
    NotInverted,
    /// The packet never settles on the opposite arm.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionCheck {
    pub verdict: InversionVerdict,
    /// Mean d⟨ka⟩/dt while the packet sits on the starting arm.
    pub drift_before: Option<f64>,
    /// The same once it sits on the opposite arm.
    pub drift_after: Option<f64>,
    pub steps_before: usize,
    pub steps_after: usize,
}

/// Compares the quasimomentum drift direction on the starting arm with the
/// drift after the packet has moved to the other arm.
///
/// The drift is the slope of the unwrapped circular-mean quasimomentum,
/// accumulated over consecutive samples that both carry more than 90% of
/// the weight on the arm in question.
pub fn momentum_inversion_check(
    traj: &Trajectory,
    k_grid: &[f64],
    k_distribution: &[Vec<f64>],
    start_side: Side,
) -> InversionCheck {
    let means: Vec<f64> = k_distribution.iter().map(|w| mean_quasimomentum(w, k_grid)).collect();
    let drift = |side: Side| {
        let on_side = |i: usize| side.weight(&traj.observables[i]) > ARM_WINDOW_WEIGHT;
        let (mut dk, mut dt, mut steps) = (0.0, 0.0, 0);
        for i in 1..means.len() {
            if on_side(i - 1) && on_side(i) {
                dk += wrap(means[i] - means[i - 1]);
                dt += traj.times[i] - traj.times[i - 1];
                steps += 1;
            }
        }
        ((steps >= MIN_DRIFT_STEPS).then(|| dk / dt), steps)
    };
    let (before, steps_before) = drift(start_side);
    let (after, steps_after) = drift(start_side.opposite());
    let verdict = match (before, after) {
        (Some(b), Some(a)) if b * a < 0.0 => InversionVerdict::Inverted,
        (Some(_), Some(_)) => InversionVerdict::NotInverted,
        _ => InversionVerdict::NotApplicable,
    };
    InversionCheck {
        verdict,
        drift_before: before,
        drift_after: after,
        steps_before,
        steps_after,
    }
}

/// Maps an angle difference into (−π, π].
fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Side of the trap the packet starts on.
pub fn start_side(packet: &PacketSpec) -> Result<Side> {
    if packet.n0 > 0.0 {
        Ok(Side::Right)
    } else if packet.n0 < 0.0 {
        Ok(Side::Left)
    } else {
        Err(Error::domain("n0", packet.n0, "a tunneling run needs a packet off the trap center"))
    }
}

/// A tunneling run with its measurement and momentum check.
#[derive(Debug, Clone)]
pub struct TunnelingAnalysis {
    pub simulation: Simulation,
    pub k_grid: Vec<f64>,
    pub k_distribution: Vec<Vec<f64>>,
    pub report: TunnelingReport,
    pub inversion: InversionCheck,
}

pub fn analyze_tunneling(scenario: &Scenario, settings: &RunSettings) -> Result<TunnelingAnalysis> {
    let simulation = simulate(scenario, settings)?;
    let inner = || {
        let side = start_side(scenario.packet()?)?;
        let ctx = TunnelingContext {
            derived: simulation.derived,
            stagger: scenario.stagger(),
            dominant_pair: dominant_pair(&simulation.spectrum, &simulation.occupations),
        };
        let report = measure_tunneling_time(&simulation.trajectory, side, &ctx)?;
        let k_grid = zone_grid(settings.k_points);
        let k_distribution = simulation.trajectory.k_distribution(&k_grid);
        let inversion = momentum_inversion_check(&simulation.trajectory, &k_grid, &k_distribution, side);
        Ok((k_grid, k_distribution, report, inversion))
    };
    let (k_grid, k_distribution, report, inversion) = inner().map_err(|e: Error| e.in_scenario(&scenario.name))?;
    Ok(TunnelingAnalysis {
        simulation,
        k_grid,
        k_distribution,
        report,
        inversion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    /// Data rows for CSV files; absent for other formats.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

/// Everything needed to reproduce a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub commands: Vec<OutputKind>,
    pub scenario: Scenario,
    pub derived: DerivedParams,
    pub settings: RunSettings,
    pub conventions: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
    pub diagnostics: BTreeMap<String, Value>,
    pub files: Vec<FileRecord>,
}

fn conventions() -> BTreeMap<String, String> {
    [
        ("units", "energies in E_R, times in hbar/E_R (t_ms via hbar/E_R in seconds), positions in lattice sites"),
        ("hamiltonian", "H = -J sum(|n+1><n| + h.c.) + sum(Omega n^2 + (epsilon/2)(-1)^n)|n><n|, n in [-N, N]"),
        ("eigenstate_sign", "largest-magnitude amplitude on n >= 0 is positive"),
        ("eigenstate_order", "ascending energy, even parity first on exact ties; r counts from 0"),
        ("packet", "phi_n ~ exp(-(n-n0)^2/(2 sigma0^2)) exp(-i k0a (n-n0)), normalized"),
        ("k_space", "psi(k) = (2N+1)^(-1/2) sum_n phi_n exp(+i k n); a packet prepared with k0a peaks at ka = k0a"),
        ("arms", "P_left = sum_{n<0} |phi_n|^2 + |phi_0|^2/2, P_right likewise"),
        ("classification", "oscillator below 2J - margin, stark_pair above 2J + margin, intermediate between"),
        ("com_sites", "<|n|>, the distance of the density from the trap center"),
        ("tunneling_time", "first local maximum of P_opposite above 0.5, vertex of the parabola through the three samples around it"),
        ("momentum_inversion", "sign of d<ka>/dt (circular mean) over samples with >90% weight on the starting arm versus the opposite arm"),
        ("time_grid", "samples uniform times over [0, horizon_TD * T_D]"),
        ("k_grid", "k_points uniform values over [-pi, pi)"),
        ("husimi", "Q(x,k) = |<alpha_{x,k}|chi>|^2 with coherent states of width husimi_sigma on a 201 x 201 grid, x in [-60, 60]"),
        ("csv", "RFC 4180, CRLF, reals with 17 significant digits"),
        ("pgm", "binary P5, 8 bit, maximum scaled to 255, first row on top"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v.to_owned()))
    .collect()
}

fn tolerances(d: &DerivedParams, settings: &RunSettings) -> BTreeMap<String, f64> {
    [
        ("truncation_boundary_weight", spectrum::TRUNCATION_TOLERANCE),
        ("boundary_sites", spectrum::BOUNDARY_SITES as f64),
        ("pair_mirror_overlap", spectrum::PAIR_OVERLAP_THRESHOLD),
        ("classification_margin_Er", settings.classify.margin(d)),
        ("packet_boundary_weight", dynamics::PACKET_BOUNDARY_TOLERANCE),
        ("completeness_deficit", dynamics::COMPLETENESS_TOLERANCE),
        ("transfer_threshold", TRANSFER_THRESHOLD),
        ("horizon_factor", HORIZON_FACTOR),
        ("arm_window_weight", ARM_WINDOW_WEIGHT),
        ("min_drift_steps", MIN_DRIFT_STEPS as f64),
        ("population_threshold", POPULATION_THRESHOLD),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect()
}

/// State shared by the writers of one run.
struct Run<'a> {
    scenario: &'a Scenario,
    settings: &'a RunSettings,
    derived: DerivedParams,
    dir: &'a Path,
    files: Vec<FileRecord>,
    diagnostics: BTreeMap<String, Value>,
}

impl Run<'_> {
    fn csv(&mut self, name: &str, header: &[&str], fill: impl FnOnce(&mut CsvTable) -> Result<()>) -> Result<()> {
        let mut table = CsvTable::create(&self.dir.join(name), header)?;
        fill(&mut table)?;
        let rows = table.finish()?;
        self.files.push(FileRecord {
            name: name.to_owned(),
            rows: Some(rows),
        });
        Ok(())
    }

    fn pgm(&mut self, name: &str, width: usize, height: usize, values: &[f64]) -> Result<()> {
        write_pgm(&self.dir.join(name), width, height, values)?;
        self.files.push(FileRecord {
            name: name.to_owned(),
            rows: None,
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.dir.join(name), value)?;
        self.files.push(FileRecord {
            name: name.to_owned(),
            rows: None,
        });
        Ok(())
    }

    fn note(&mut self, key: &str, value: Value) {
        self.diagnostics.insert(key.to_owned(), value);
    }

    fn spectrum(&mut self) -> Result<()> {
        let d = self.derived;
        let h = build_hamiltonian(&d, self.settings.half_width, self.scenario.stagger())?;
        let mut s = eigendecompose(&h, self.settings.eigenstates)?;
        s.annotate(&d, self.settings.classify);
        s.check_truncation()?;
        self.note("max_eigen_residual_Er", json!(s.max_residual()));
        self.note("top_state_boundary_weight", json!(s.boundary_weight()));
        self.note("r_c_observed", json!(s.r_c_observed));
        self.note("pairs_found", json!(s.pairs.len()));

        let spec = &s;
        self.csv(
            "spectrum.csv",
            &["r", "E_r_in_Er", "parity", "class", "com_sites", "ipr", "pair_partner", "delta_E_in_Er"],
            |t| {
                for st in &spec.states {
                    let pair = spec.pair_of(st.index);
                    let partner = pair.map(|p| if p.lower == st.index { p.upper } else { p.lower });
                    t.row([
                        st.index.to_string(),
                        real(st.energy),
                        st.parity.label().to_owned(),
                        st.class.map_or("", |c| c.label()).to_owned(),
                        real(st.arm_center),
                        real(st.ipr),
                        partner.map_or(String::new(), |p| p.to_string()),
                        pair.map_or(String::new(), |p| real(p.splitting)),
                    ])?;
                }
                Ok(())
            },
        )?;
        self.csv("states.csv", &["r", "n", "phi"], |t| {
            for st in &spec.states {
                for (n, a) in h.sites().zip(&st.amplitudes) {
                    t.row([st.index.to_string(), n.to_string(), real(*a)])?;
                }
            }
            Ok(())
        })?;
        self.csv("states_offset.csv", &["n", "r", "abs_phi_sq_plus_r"], |t| {
            for st in &spec.states {
                for (n, a) in h.sites().zip(&st.amplitudes) {
                    t.row([n.to_string(), st.index.to_string(), real(a * a + st.index as f64)])?;
                }
            }
            Ok(())
        })?;

        if !self.scenario.packets.is_empty() {
            let mut header = vec!["r".to_owned(), "E_r_in_Er".to_owned(), "class".to_owned()];
            let mut columns = Vec::new();
            for p in &self.scenario.packets {
                header.push(format!("p_{}", p.label));
                let psi = gaussian_packet(p.spec, self.settings.half_width)?;
                let occ = occupations(&psi, spec);
                self.note(&format!("occupation_deficit_{}", p.label), json!(occ.deficit));
                self.note(
                    &format!("populated_states_{}", p.label),
                    json!(occ.populated(POPULATION_THRESHOLD)),
                );
                columns.push(occ.probabilities);
            }
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            self.csv("occupations.csv", &header, |t| {
                for st in &spec.states {
                    let mut row = vec![
                        st.index.to_string(),
                        real(st.energy),
                        st.class.map_or("", |c| c.label()).to_owned(),
                    ];
                    row.extend(columns.iter().map(|c| real(c[st.index])));
                    t.row(row)?;
                }
                Ok(())
            })?;
        }
        Ok(())
    }

    fn separatrix_csv(&mut self) -> Result<()> {
        let d = self.derived;
        let ka: Vec<f64> = (0..=400).map(|i| -PI + 2.0 * PI * i as f64 / 400.0).collect();
        let branches = separatrix(&ka, &d)?;
        self.csv("separatrix.csv", &["ka", "x_over_a_plus", "x_over_a_minus"], |t| {
            for ((k, p), m) in ka.iter().zip(&branches[0].points).zip(&branches[1].points) {
                t.row([real(*k), real(p.x), real(m.x)])?;
            }
            Ok(())
        })
    }

    fn pendulum(&mut self) -> Result<()> {
        let d = self.derived;
        self.separatrix_csv()?;
        let edge = d.band_edge();
        let levels: Vec<f64> = [-0.75, -0.5, -0.25, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0]
            .iter()
            .map(|f| f * edge)
            .collect();
        let curves = phase_portrait(&levels, &d, PortraitGrid::default())?;
        self.note("portrait_curves", json!(curves.len()));
        self.csv("portrait.csv", &["level_Er", "branch_id", "ka", "x_over_a"], |t| {
            for c in &curves {
                for p in &c.points {
                    t.row([real(c.level), c.branch.to_string(), real(p.ka), real(p.x)])?;
                }
            }
            Ok(())
        })
    }

    fn husimi(&mut self) -> Result<()> {
        let d = self.derived;
        let states = if self.scenario.states.is_empty() {
            REFERENCE_HUSIMI_STATES.to_vec()
        } else {
            self.scenario.states.clone()
        };
        let top = states.iter().copied().max().unwrap_or(0);
        let h = build_hamiltonian(&d, self.settings.half_width, self.scenario.stagger())?;
        if top >= h.dim() {
            return Err(Error::Config(format!("state {top} exceeds the lattice dimension {}", h.dim())));
        }
        let s = eigendecompose(&h, top + 1)?;
        s.check_truncation()?;
        let mut grid = HusimiGrid::standard(&d);
        if let Some(sigma) = self.settings.husimi_sigma {
            grid.sigma = sigma;
        }
        self.note("husimi_sigma_sites", json!(grid.sigma));
        let edge = d.band_edge();
        for r in states {
            let q = husimi(&s.states[r].to_complex(), &grid, Normalization::Raw)?;
            let inside = q.mass_fraction(|x, k| lattice_energy(x, k, &d) < edge);
            self.note(&format!("husimi_r{r}_fraction_inside_separatrix"), json!(inside));
            let nk = q.k_grid.len();
            self.csv(&format!("husimi_r{r}.csv"), &["x_over_a", "ka", "Q"], |t| {
                for (i, x) in q.x_grid.iter().enumerate() {
                    for (j, k) in q.k_grid.iter().enumerate() {
                        t.row([real(*x), real(*k), real(q.values[i * nk + j])])?;
                    }
                }
                Ok(())
            })?;
            // Image rows run from ka = +π at the top to −π at the bottom.
            let nx = q.x_grid.len();
            let image: Vec<f64> = (0..nk).rev().flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| q.at(i, j)).collect();
            self.pgm(&format!("husimi_r{r}.pgm"), nx, nk, &image)?;
        }
        self.separatrix_csv()
    }

    fn evolve(&mut self, sim: &Simulation, k_grid: &[f64], k_dist: &[Vec<f64>]) -> Result<()> {
        let d = self.derived;
        let traj = &sim.trajectory;
        self.note("norm_drift", json!(traj.norm_drift()));
        self.note("energy_drift_relative", json!(traj.energy_drift(d.hopping)));
        self.note("completeness_deficit", json!(sim.occupations.deficit));
        self.note(
            "populated_states",
            json!(sim.occupations.populated(POPULATION_THRESHOLD)),
        );
        self.csv(
            "trajectory.csv",
            &["t_hbar_over_Er", "t_ms", "norm", "energy_Er", "mean_n", "var_n", "P_left", "P_right"],
            |t| {
                for o in &traj.observables {
                    t.row([
                        real(o.time),
                        real(d.to_millis(o.time)),
                        real(o.norm),
                        real(o.energy),
                        real(o.mean_n),
                        real(o.var_n),
                        real(o.p_left),
                        real(o.p_right),
                    ])?;
                }
                Ok(())
            },
        )?;
        let h = sim.spectrum.hamiltonian();
        self.csv("density_xt.csv", &["t", "n", "abs_phi"], |t| {
            for (time, p) in traj.times.iter().zip(&traj.packets) {
                for (n, z) in h.sites().zip(p) {
                    t.row([real(*time), n.to_string(), real(z.norm())])?;
                }
            }
            Ok(())
        })?;
        self.csv("density_kt.csv", &["t", "ka", "abs_psi_k"], |t| {
            for (time, w) in traj.times.iter().zip(k_dist) {
                for (k, v) in k_grid.iter().zip(w) {
                    t.row([real(*time), real(*k), real(v.sqrt())])?;
                }
            }
            Ok(())
        })?;
        let xt: Vec<f64> = traj.packets.iter().flat_map(|p| p.iter().map(|z| z.norm())).collect();
        self.pgm("density_xt.pgm", h.dim(), traj.len(), &xt)?;
        let kt: Vec<f64> = k_dist.iter().flat_map(|w| w.iter().map(|v| v.sqrt())).collect();
        self.pgm("density_kt.pgm", k_grid.len(), traj.len(), &kt)?;
        self.csv("occupations.csv", &["r", "E_r_in_Er", "class", "p_r"], |t| {
            for (st, p) in sim.spectrum.states.iter().zip(&sim.occupations.probabilities) {
                t.row([
                    st.index.to_string(),
                    real(st.energy),
                    st.class.map_or("", |c| c.label()).to_owned(),
                    real(*p),
                ])?;
            }
            Ok(())
        })
    }

    fn dynamics(&mut self, tunneling: bool) -> Result<()> {
        if tunneling {
            let a = analyze_tunneling(self.scenario, self.settings)?;
            self.evolve(&a.simulation, &a.k_grid, &a.k_distribution)?;
            self.json(
                "tunneling.json",
                &json!({ "report": a.report, "momentum_inversion": a.inversion }),
            )?;
            self.note("tunneling_transferred", json!(a.report.transferred));
        } else {
            let sim = simulate(self.scenario, self.settings)?;
            let k_grid = zone_grid(self.settings.k_points);
            let k_dist = sim.trajectory.k_distribution(&k_grid);
            self.evolve(&sim, &k_grid, &k_dist)?;
        }
        Ok(())
    }
}

/// Runs the given commands for one scenario into `dir` and writes
/// `manifest.json` there.
pub fn run(commands: &[OutputKind], scenario: &Scenario, settings: &RunSettings, dir: &Path) -> Result<Manifest> {
    let inner = || -> Result<Manifest> {
        scenario.validate()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let derived = derive_params(&scenario.lattice)?;
        let mut run = Run {
            scenario,
            settings,
            derived,
            dir,
            files: Vec::new(),
            diagnostics: BTreeMap::new(),
        };
        for &kind in commands {
            match kind {
                OutputKind::Spectrum => run.spectrum()?,
                OutputKind::Pendulum => run.pendulum()?,
                OutputKind::Husimi => run.husimi()?,
                OutputKind::Evolve => run.dynamics(false)?,
                OutputKind::Tunneling => run.dynamics(true)?,
            }
        }
        let manifest = Manifest {
            tool: "plt".to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            commands: commands.to_vec(),
            scenario: scenario.clone(),
            derived,
            settings: *settings,
            conventions: conventions(),
            tolerances: tolerances(&derived, settings),
            diagnostics: run.diagnostics,
            files: run.files,
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        Ok(manifest)
    };
    inner().map_err(|e| match e {
        Error::Scenario { .. } => e,
        other => other.in_scenario(&scenario.name),
    })
}

/// Runs every output the scenario requests.
pub fn run_scenario(scenario: &Scenario, settings: &RunSettings, dir: &Path) -> Result<Manifest> {
    run(&scenario.outputs, scenario, settings, dir)
}
