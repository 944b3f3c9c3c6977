//! ε-sweeps: configuration, execution, convergence metrics and reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ac::{global_energy_check, simulate_from_velocity, whole_ratio, AcParams, EnergyReport, Trajectory};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::init::{initial_velocity, InitSpec};
use crate::norms::{l2_norm, lp_norm};
use crate::ns::simulate_ns;
use crate::ops::{leray_p, leray_q};
use crate::quadrature::time_lp;
use crate::snapshot::write_trajectory;
use crate::spacetime::monitors::{
    forcing_term_norm, energy_bound_suite, modal_residual_check, nonlinear_term_norm, pressure_estimate_suite,
    velocity_estimate_suite, ModalResidual, MonitorIndices, MonitorReport,
};
use crate::spacetime::{extend_trajectory, spacetime_norm, FieldSeries, NormSpec};
use crate::suitability::{
    default_bumps, make_bump, suitability_sweep, vanishing_bound_factors, Balance, Quadrature,
    SuitabilityVerdict, SweepInputs, TestFunction, VanishingTerm,
};

/// Overrides the configured worker count.
pub const WORKERS_ENV: &str = "ACNS_WORKERS";

/// Lower bound on the energy deficit of the relaxed system.
pub const ENERGY_DEFICIT_FLOOR: f64 = -1e-10;

fn two_pi() -> f64 {
    2.0 * std::f64::consts::PI
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_dt() -> f64 {
    1.0 / 1024.0
}
fn default_dt_rec() -> f64 {
    1.0 / 256.0
}
fn default_eps_list() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}
fn default_output() -> PathBuf {
    PathBuf::from("acns-out")
}
fn default_band() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorToggles {
    #[serde(default = "yes")]
    pub energy: bool,
    #[serde(default = "yes")]
    pub uniform_bounds: bool,
    #[serde(default = "yes")]
    pub modal_residual: bool,
    #[serde(default = "yes")]
    pub suitability: bool,
    /// Repeat each run with `dt` and `dt_rec` doubled to size tolerances.
    #[serde(default = "yes")]
    pub refinement: bool,
}

impl Default for MonitorToggles {
    fn default() -> Self {
        Self { energy: true, uniform_bounds: true, modal_residual: true, suitability: true, refinement: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub t0: f64,
    pub rx: f64,
    pub rt: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BumpSuite {
    /// The eight built-in bumps, scaled to the box.
    #[default]
    Default,
    Custom { bumps: Vec<BumpSpec> },
}

impl BumpSuite {
    pub fn build(&self, grid: &TorusGrid, t_end: f64) -> Result<Vec<TestFunction>> {
        match self {
            BumpSuite::Default => default_bumps(grid, t_end),
            BumpSuite::Custom { bumps } => bumps
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let mut c = [0.0; 3];
                    for (slot, v) in c.iter_mut().zip(&b.center) {
                        *slot = *v;
                    }
                    Ok(make_bump(c, b.t0, (b.rx, b.rt), grid, t_end)?.with_id(format!("bump{i}")))
                })
                .collect(),
        }
    }
}

/// Everything a sweep needs. Only `dim` and `n` are required in the JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dim: usize,
    pub n: usize,
    #[serde(rename = "L", default = "two_pi")]
    pub length: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(rename = "T", default = "one")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_dt_rec")]
    pub dt_rec: f64,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    /// Keep the advective nonlinearity (switch off for linear acoustic runs).
    #[serde(default = "yes")]
    pub nonlinear: bool,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub monitors: MonitorToggles,
    #[serde(default)]
    pub indices: MonitorIndices,
    #[serde(default)]
    pub bumps: BumpSuite,
    #[serde(default)]
    pub quadrature: Quadrature,
    /// Time-frequency band of the modal identity check.
    #[serde(default = "default_band")]
    pub modal_band: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Also write every trajectory under `output_dir`.
    #[serde(default)]
    pub save_trajectories: bool,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.to_string(), message: message.into() }
}

impl SweepConfig {
    /// Smallest useful configuration; everything else takes its default.
    pub fn minimal(dim: usize, n: usize) -> Self {
        serde_json::from_value(serde_json::json!({ "dim": dim, "n": n })).expect("defaults are valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(schema("dim", format!("must be 2 or 3, got {}", self.dim)));
        }
        if self.n < 8 || self.n % 2 != 0 {
            return Err(schema("n", format!("must be even and at least 8, got {}", self.n)));
        }
        for (name, v) in [("L", self.length), ("nu", self.nu), ("T", self.t_end), ("dt", self.dt), ("dt_rec", self.dt_rec)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(schema(name, format!("must be positive and finite, got {v}")));
            }
        }
        whole_ratio(self.dt_rec, self.dt, "dt_rec / dt").map_err(|e| schema("dt_rec", e.to_string()))?;
        whole_ratio(self.t_end, self.dt_rec, "T / dt_rec").map_err(|e| schema("T", e.to_string()))?;
        if self.monitors.refinement {
            whole_ratio(self.t_end, 2.0 * self.dt_rec, "T / (2 dt_rec)")
                .map_err(|e| schema("monitors.refinement", e.to_string()))?;
        }
        if self.eps_list.is_empty() {
            return Err(schema("eps_list", "must not be empty"));
        }
        for (i, e) in self.eps_list.iter().enumerate() {
            if !(e.is_finite() && *e > 0.0) {
                return Err(schema(&format!("eps_list[{i}]"), format!("must be positive, got {e}")));
            }
            if i > 0 && !(*e < self.eps_list[i - 1]) {
                return Err(schema(&format!("eps_list[{i}]"), "eps_list must be strictly decreasing"));
            }
        }
        if self.workers == Some(0) {
            return Err(schema("workers", "must be at least 1"));
        }
        if !(self.modal_band > 0.0) {
            return Err(schema("modal_band", "must be positive"));
        }
        if self.quadrature.pad == 0 || self.quadrature.radial_nodes == 0 {
            return Err(schema("quadrature", "pad and radial_nodes must be positive"));
        }
        self.indices.validate().map_err(|e| schema("indices", e.to_string()))?;
        if let BumpSuite::Custom { bumps } = &self.bumps {
            for (i, b) in bumps.iter().enumerate() {
                if b.center.len() != self.dim {
                    return Err(schema(&format!("bumps.bumps[{i}].center"), format!("needs {} coordinates", self.dim)));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn grid(&self) -> Result<Arc<TorusGrid>> {
        TorusGrid::with_length(self.dim, self.n, self.length)
    }

    /// Worker count: environment override, then the config, then rayon's default.
    pub fn resolved_workers(&self) -> Option<usize> {
        std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|w| *w > 0).or(self.workers)
    }
}

pub fn parse_config(path: &Path) -> Result<SweepConfig> {
    SweepConfig::from_json_str(&fs::read_to_string(path)?)
}

/// Convergence metrics of one relaxed run against the reference.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// `‖Qu‖_{L²(0,T;L⁴)}`
    pub qu_l2l4: f64,
    /// `‖Pu − u_ref‖_{L²(0,T;L²)}`
    pub pu_error_l2l2: f64,
    /// `√ε ‖p‖_{L^∞(0,T;L²)}`
    pub sqrt_eps_p_linf_l2: f64,
    /// `‖p̄ − p_ref‖_{L²L²}` with `p̄` the moving average of `p` over one
    /// acoustic period `2π√ε`.
    pub pressure_filtered_l2l2: f64,
    /// `‖p − p_ref‖_{H^{−r}(H^{−s})}` over the recorded window (no extension).
    pub pressure_neg: f64,
}

impl ConvergenceRow {
    pub fn as_pairs(&self) -> [(&'static str, f64); 5] {
        [
            ("qu_l2l4", self.qu_l2l4),
            ("pu_error_l2l2", self.pu_error_l2l2),
            ("sqrt_eps_p_linf_l2", self.sqrt_eps_p_linf_l2),
            ("pressure_filtered_l2l2", self.pressure_filtered_l2l2),
            ("pressure_neg", self.pressure_neg),
        ]
    }
}

/// Centered moving average over a window of length `width`, truncated at
/// the ends of the record. `width ≤ 0` returns the samples unchanged.
pub fn moving_average(samples: &[SpectralField], h: f64, width: f64) -> Vec<SpectralField> {
    if width <= 0.0 {
        return samples.to_vec();
    }
    let half = (0.5 * width / h).floor() as usize;
    (0..samples.len())
        .map(|j| {
            let lo = j.saturating_sub(half);
            let hi = (j + half).min(samples.len() - 1);
            let mut acc = samples[lo].scaled(0.0);
            for s in &samples[lo..=hi] {
                acc.axpy(1.0, s);
            }
            acc.scale(1.0 / (hi - lo + 1) as f64);
            acc
        })
        .collect()
}

pub fn convergence_metrics(ac: &Trajectory, reference: &Trajectory, idx: &MonitorIndices) -> Result<ConvergenceRow> {
    if ac.grid != reference.grid || ac.len() != reference.len() {
        return Err(Error::Mismatch("relaxed and reference runs differ in grid or sample count".into()));
    }
    if ac.samples.iter().zip(&reference.samples).any(|(a, b)| (a.t - b.t).abs() > 1e-9 * ac.dt_rec) {
        return Err(Error::Mismatch("relaxed and reference runs are sampled at different times".into()));
    }
    let h = ac.dt_rec;
    let mut qu = Vec::with_capacity(ac.len());
    let mut pu = Vec::with_capacity(ac.len());
    let mut p2 = Vec::with_capacity(ac.len());
    for (a, r) in ac.samples.iter().zip(&reference.samples) {
        qu.push(lp_norm(&leray_q(&a.u)?, 4.0)?);
        pu.push(l2_norm(&leray_p(&a.u)?.sub(&r.u)));
        p2.push(l2_norm(&a.p));
    }
    let eps = ac.eps;
    let p: Vec<SpectralField> = ac.samples.iter().map(|s| s.p.clone()).collect();
    let filtered = moving_average(&p, h, 2.0 * std::f64::consts::PI * eps.sqrt());
    let dp: Vec<f64> = filtered.iter().zip(&reference.samples).map(|(f, r)| l2_norm(&f.sub(&r.p))).collect();
    let diff: Vec<SpectralField> = ac.samples.iter().zip(&reference.samples).map(|(a, r)| a.p.sub(&r.p)).collect();
    let series = FieldSeries::new(ac.t0(), h, diff)?;
    let pressure_neg = spacetime_norm(&series, &NormSpec::new(-idx.r(), -idx.s, false, false))?;
    Ok(ConvergenceRow {
        eps,
        qu_l2l4: time_lp(&qu, 2.0, h),
        pu_error_l2l2: time_lp(&pu, 2.0, h),
        sqrt_eps_p_linf_l2: eps.sqrt() * time_lp(&p2, f64::INFINITY, h),
        pressure_filtered_l2l2: time_lp(&dp, 2.0, h),
        pressure_neg,
    })
}

/// Energy bookkeeping of one run, reduced to what the checks need.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub initial_energy: f64,
    pub min_deficit: f64,
    pub max_deficit: f64,
    /// `max_j |deficit_dt(t_j) − deficit_2dt(t_j)|` over shared sample times,
    /// plus a round-off allowance of `1e-13·E(0)`.
    pub budget: Option<f64>,
    /// `max_t ε‖p(t)‖²`
    pub max_eps_p_sq: f64,
}

impl EnergySummary {
    pub fn of(traj: &Trajectory, coarse: Option<&Trajectory>) -> Self {
        let rep = global_energy_check(traj);
        let budget = coarse.map(|c| refinement_budget(&rep, &global_energy_check(c)));
        let max_eps_p_sq = traj
            .samples
            .iter()
            .map(|s| s.eps * crate::norms::l2_norm_sq(&s.p))
            .fold(0.0, f64::max);
        Self {
            initial_energy: rep.initial_energy(),
            min_deficit: rep.min_deficit(),
            max_deficit: rep.max_deficit(),
            budget,
            max_eps_p_sq,
        }
    }

    /// The three energy requirements of the relaxed system.
    pub fn passes(&self) -> bool {
        self.min_deficit >= ENERGY_DEFICIT_FLOOR
            && self.budget.is_none_or(|b| self.max_deficit <= b)
            && self.max_eps_p_sq <= 2.0 * self.initial_energy
    }
}

pub fn refinement_budget(fine: &EnergyReport, coarse: &EnergyReport) -> f64 {
    let mut worst = 0.0f64;
    for (t, d) in coarse.times.iter().zip(&coarse.deficit) {
        if let Some(j) = fine.times.iter().position(|s| (s - t).abs() < 1e-9) {
            worst = worst.max((fine.deficit[j] - d).abs());
        }
    }
    worst + 1e-13 * fine.initial_energy()
}

/// Per-ε outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub eps: f64,
    /// `None` when the run completed; otherwise the failure message.
    pub error: Option<String>,
    pub metrics: ConvergenceRow,
    pub energy: Option<EnergySummary>,
    pub monitors: Vec<MonitorReport>,
    pub modal: Option<ModalResidual>,
    pub vanishing: Vec<VanishingTerm>,
    /// Inequality slack per bump.
    pub slacks: Vec<(String, f64)>,
    /// `‖P(u_dt − u_2dt)‖_{L²L²}` over shared sample times: the time-step
    /// uncertainty of `pu_error_l2l2`, when a coarsened twin exists.
    pub pu_step_error: Option<f64>,
}

impl EpsRow {
    fn failed(eps: f64, err: &Error) -> Self {
        Self {
            eps,
            error: Some(err.to_string()),
            metrics: ConvergenceRow { eps, ..Default::default() },
            energy: None,
            monitors: Vec::new(),
            modal: None,
            vanishing: Vec::new(),
            slacks: Vec::new(),
            pu_step_error: None,
        }
    }

    /// Every scalar of the row as `(metric, value)`, in a fixed order.
    pub fn flatten(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self.metrics.as_pairs().iter().map(|(k, v)| (k.to_string(), *v)).collect();
        if let Some(e) = &self.energy {
            out.push(("energy_min_deficit".into(), e.min_deficit));
            out.push(("energy_max_deficit".into(), e.max_deficit));
            out.push(("energy_max_eps_p_sq".into(), e.max_eps_p_sq));
        }
        for m in &self.monitors {
            out.push((format!("monitor_{}", m.label), m.value));
        }
        if let Some(m) = &self.modal {
            out.push(("modal_relative".into(), m.relative));
        }
        for v in &self.vanishing {
            out.push((format!("vanishing_value_{}", v.id), v.value));
            out.push((format!("vanishing_bound_{}", v.id), v.bound));
        }
        for (id, s) in &self.slacks {
            out.push((format!("slack_{id}"), *s));
        }
        out
    }
}

/// Houses the per-ε rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<EpsRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub config: SweepConfig,
    pub config_hash: String,
    pub report: ConvergenceReport,
    pub reference_energy: Option<EnergySummary>,
    pub suitability: Option<SuitabilityVerdict>,
    pub checks: Vec<Check>,
}

impl SweepOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// The computed family: trajectories kept so callers can inspect them.
pub struct SweepRuns {
    pub reference: Arc<Trajectory>,
    pub runs: Vec<Result<Arc<Trajectory>>>,
    pub coarse: Vec<Option<Arc<Trajectory>>>,
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Runs the reference and one relaxed simulation per ε (plus coarsened twins
/// when refinement is on), concurrently over ε.
pub fn simulate_family(cfg: &SweepConfig, u0: &SpectralField) -> Result<SweepRuns> {
    let reference = Arc::new(simulate_ns(u0, cfg.nu, cfg.t_end, cfg.dt, cfg.dt_rec)?);
    let params = |eps: f64| if cfg.nonlinear { AcParams::new(eps, cfg.nu) } else { AcParams::linear(eps, cfg.nu) };
    let pairs: Vec<(Result<Arc<Trajectory>>, Option<Arc<Trajectory>>)> = with_pool(cfg.resolved_workers(), || {
        cfg.eps_list
            .par_iter()
            .map(|&eps| {
                let fine = simulate_from_velocity(u0, &params(eps), cfg.t_end, cfg.dt, cfg.dt_rec).map(Arc::new);
                let coarse = if cfg.monitors.refinement && fine.is_ok() {
                    simulate_from_velocity(u0, &params(eps), cfg.t_end, 2.0 * cfg.dt, 2.0 * cfg.dt_rec).ok().map(Arc::new)
                } else {
                    None
                };
                (fine, coarse)
            })
            .collect()
    })?;
    let (runs, coarse) = pairs.into_iter().unzip();
    Ok(SweepRuns { reference, runs, coarse })
}

/// `‖P(u_fine − u_coarse)‖_{L²L²}` over the coarse run's sample times.
pub fn projected_step_error(fine: &Trajectory, coarse: &Trajectory) -> Result<f64> {
    let mut vals = Vec::with_capacity(coarse.len());
    for c in &coarse.samples {
        let f = fine
            .samples
            .iter()
            .find(|f| (f.t - c.t).abs() < 1e-9 * fine.dt_rec)
            .ok_or_else(|| Error::Mismatch(format!("no fine sample at t = {}", c.t)))?;
        vals.push(l2_norm(&leray_p(&f.u.sub(&c.u))?));
    }
    Ok(time_lp(&vals, 2.0, coarse.dt_rec))
}

fn analyse_run(
    cfg: &SweepConfig,
    traj: &Arc<Trajectory>,
    coarse: Option<&Trajectory>,
    reference: &Trajectory,
    u0: &SpectralField,
) -> Result<(EpsRow, Option<(f64, f64)>)> {
    let idx = &cfg.indices;
    let metrics = convergence_metrics(traj, reference, idx)?;
    let energy = cfg.monitors.energy.then(|| EnergySummary::of(traj, coarse));
    let needs_ext = cfg.monitors.uniform_bounds || cfg.monitors.modal_residual || cfg.monitors.suitability;
    let ext = if needs_ext { Some(extend_trajectory(traj, u0)?) } else { None };
    let mut monitors = Vec::new();
    let mut modal = None;
    let mut factors = None;
    if let Some(ext) = &ext {
        if cfg.monitors.uniform_bounds {
            let groups: Vec<Result<Vec<MonitorReport>>> = (0..5usize)
                .into_par_iter()
                .map(|g| match g {
                    0 => nonlinear_term_norm(ext, idx).map(|m| vec![m]),
                    1 => forcing_term_norm(ext, idx).map(|m| vec![m]),
                    2 => velocity_estimate_suite(ext, idx),
                    3 => pressure_estimate_suite(ext, idx),
                    _ => energy_bound_suite(ext),
                })
                .collect();
            for g in groups {
                monitors.extend(g?);
            }
        }
        if cfg.monitors.modal_residual {
            modal = Some(modal_residual_check(ext, cfg.modal_band)?);
        }
        if cfg.monitors.suitability {
            factors = Some(vanishing_bound_factors(ext, idx)?);
        }
    }
    let pu_step_error = match coarse {
        Some(c) => Some(projected_step_error(traj, c)?),
        None => None,
    };
    let row = EpsRow {
        eps: traj.eps,
        error: None,
        metrics,
        energy,
        monitors,
        modal,
        vanishing: Vec::new(),
        slacks: Vec::new(),
        pu_step_error,
    };
    Ok((row, factors))
}

/// Full sweep: simulations, metrics, monitors, suitability and checks.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let u0 = initial_velocity(&cfg.init, &grid)?;
    let fam = simulate_family(cfg, &u0)?;
    let analysed: Vec<std::result::Result<(EpsRow, Option<(f64, f64)>), Error>> = with_pool(cfg.resolved_workers(), || {
        fam.runs
            .par_iter()
            .zip(&fam.coarse)
            .map(|(run, coarse)| {
                let traj = run.as_ref().map_err(|e| Error::InvalidParameter(e.to_string()))?;
                analyse_run(cfg, traj, coarse.as_deref(), &fam.reference, &u0)
            })
            .collect()
    })?;
    let mut rows = Vec::with_capacity(cfg.eps_list.len());
    let mut factors = Vec::with_capacity(cfg.eps_list.len());
    for (eps, a) in cfg.eps_list.iter().zip(analysed) {
        match a {
            Ok((row, f)) => {
                rows.push(row);
                factors.push(f);
            }
            Err(e) => {
                log::warn!("ε = {eps:e}: {e}");
                rows.push(EpsRow::failed(*eps, &e));
                factors.push(None);
            }
        }
    }

    let mut checks = Vec::new();
    let mut suitability = None;
    if cfg.monitors.suitability {
        let family: Vec<Arc<Trajectory>> = fam.runs.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
        let outcome = cfg.bumps.build(&grid, cfg.t_end).and_then(|bumps| {
            let last = fam.runs.iter().rposition(|r| r.is_ok());
            let coarse = last.and_then(|i| fam.coarse[i].as_deref());
            let verdict = suitability_sweep(&SweepInputs {
                family: &family,
                coarse,
                reference: Some(&fam.reference),
                bumps: &bumps,
                quad: cfg.quadrature,
                term_tolerance: 0.02,
            })?;
            Ok(verdict)
        });
        match outcome {
            Ok(v) => {
                for (row, f) in rows.iter_mut().zip(&factors) {
                    let mine = v.reports.iter().filter(|r| r.eps == row.eps);
                    for r in mine {
                        match r.balance {
                            Balance::Inequality => row.slacks.push((r.id.clone(), r.slack)),
                            Balance::Identity => {
                                if let Some(f) = f {
                                    row.vanishing.push(VanishingTerm::from_parts(
                                        &r.id,
                                        row.eps,
                                        r.terms.pressure_divergence,
                                        *f,
                                    ));
                                }
                            }
                        }
                    }
                }
                suitability = Some(v);
            }
            Err(e) => checks.push(Check::new("suitability", false, format!("not evaluated: {e}"))),
        }
    }

    let reference_energy = cfg.monitors.energy.then(|| EnergySummary::of(&fam.reference, None));
    if cfg.save_trajectories {
        write_trajectory(&cfg.output_dir.join("trajectories").join("reference"), &fam.reference)?;
        for (run, eps) in fam.runs.iter().zip(&cfg.eps_list) {
            if let Ok(t) = run {
                write_trajectory(&cfg.output_dir.join("trajectories").join(format!("eps_{eps:e}")), t)?;
            }
        }
    }
    let report = ConvergenceReport { rows };
    checks.extend(sweep_checks(cfg, &report, suitability.as_ref()));
    Ok(SweepOutcome {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        report,
        reference_energy,
        suitability,
        checks,
    })
}

/// The pass/fail verdicts of a sweep; only enabled parts are checked.
pub fn sweep_checks(cfg: &SweepConfig, report: &ConvergenceReport, suit: Option<&SuitabilityVerdict>) -> Vec<Check> {
    let rows = &report.rows;
    let mut out = Vec::new();
    let failed: Vec<String> = rows.iter().filter_map(|r| r.error.as_ref().map(|e| format!("{:e}: {e}", r.eps))).collect();
    out.push(Check::new("runs_completed", failed.is_empty(), failed.join("; ")));
    let ok: Vec<&EpsRow> = rows.iter().filter(|r| r.error.is_none()).collect();

    if cfg.monitors.energy {
        let bad: Vec<String> = ok
            .iter()
            .filter_map(|r| r.energy.as_ref().filter(|e| !e.passes()).map(|e| format!("{:e}: {e:?}", r.eps)))
            .collect();
        out.push(Check::new("energy", bad.is_empty(), bad.join("; ")));
    }

    if ok.len() >= 2 {
        let qu: Vec<f64> = ok.iter().map(|r| r.metrics.qu_l2l4).collect();
        let strictly = qu.windows(2).all(|w| w[1] < w[0]);
        let span = ok[0].eps / ok[ok.len() - 1].eps;
        let ratio = qu[qu.len() - 1] / qu[0];
        let ratio_ok = span < 1e3 || ratio <= 0.1;
        out.push(Check::new(
            "qu_decreasing",
            strictly && ratio_ok,
            format!("values {qu:?}, last/first {ratio:.3e}"),
        ));
        // the projected error decreases until it reaches the time-step floor,
        // estimated from the coarsened twins (zero when there are none)
        let pu: Vec<f64> = ok.iter().map(|r| r.metrics.pu_error_l2l2).collect();
        let floor = 10.0 * ok.iter().filter_map(|r| r.pu_step_error).fold(0.0, f64::max);
        let mono = pu.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor);
        out.push(Check::new("pu_decreasing", mono, format!("values {pu:?}, floor {floor:.3e}")));
    }

    if cfg.monitors.uniform_bounds && ok.len() >= 2 {
        let (first, last) = (ok[0], ok[ok.len() - 1]);
        let mut bad = Vec::new();
        for m in &last.monitors {
            if let Some(f) = first.monitors.iter().find(|f| f.label == m.label) {
                if m.value > 2.0 * f.value {
                    bad.push(format!("{}: {:.4e} > 2×{:.4e}", m.label, m.value, f.value));
                }
            }
        }
        out.push(Check::new("uniform_bounds", bad.is_empty(), bad.join("; ")));
    }

    if cfg.monitors.modal_residual && !cfg.nonlinear {
        let bad: Vec<String> = ok
            .iter()
            .filter_map(|r| r.modal.as_ref().filter(|m| m.relative > 1e-6).map(|m| format!("{:e}: {:.3e}", r.eps, m.relative)))
            .collect();
        out.push(Check::new("modal_residual", bad.is_empty(), bad.join("; ")));
    }

    if let Some(v) = suit {
        let red: Vec<String> = v
            .bumps
            .iter()
            .filter(|b| !b.suitable)
            .map(|b| format!("{}: slack {:.3e} < −tol {:.3e}", b.id, b.slack, -b.tol))
            .collect();
        out.push(Check::new("suitability_slack", v.suitable, red.join("; ")));
        if let Some(conv) = v.terms_converged {
            let worst = v.bumps.iter().filter_map(|b| b.max_term_deviation).fold(0.0, f64::max);
            out.push(Check::new(
                "suitability_terms",
                conv,
                format!("largest term deviation {worst:.3e} (tolerance {})", v.term_tolerance),
            ));
        }
        if let (Some(first), Some(last)) = (ok.first(), ok.last()) {
            let mut bad = Vec::new();
            for r in &ok {
                for t in r.vanishing.iter().filter(|t| !t.holds()) {
                    bad.push(format!("{:e} {}: |{:.3e}| > {:.3e}", r.eps, t.id, t.value, t.bound));
                }
            }
            if ok.len() >= 2 {
                for (a, b) in first.vanishing.iter().zip(&last.vanishing) {
                    if b.value.abs() > 0.2 * a.value.abs() {
                        bad.push(format!("{}: {:.3e} not ≤ 0.2×{:.3e}", a.id, b.value, a.value));
                    }
                }
            }
            out.push(Check::new("vanishing_term", bad.is_empty(), bad.join("; ")));
        }
    }
    out
}

/// Files written by [`emit_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub config_hash: String,
    pub metrics: Vec<String>,
    pub files: Vec<String>,
}

fn metric_names(report: &ConvergenceReport) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in &report.rows {
        for (k, _) in r.flatten() {
            if !names.contains(&k) {
                names.push(k);
            }
        }
    }
    names
}

/// Writes `metrics.csv` (one row per ε per metric), `metrics_wide.csv` (one
/// row per ε, one column per metric), `summary.json`, `manifest.json` and a
/// two-column `plot/<metric>.dat` per metric. No timestamps: identical
/// inputs give identical bytes.
pub fn emit_report(outcome: &SweepOutcome, dir: &Path) -> Result<ReportManifest> {
    fs::create_dir_all(dir.join("plot"))?;
    let names = metric_names(&outcome.report);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut files = Vec::new();

    let mut long = csv::Writer::from_path(dir.join("metrics.csv")).map_err(csv_err)?;
    long.write_record(["eps", "metric", "value"]).map_err(csv_err)?;
    let mut per_metric: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    let flat: Vec<(f64, Vec<(String, f64)>)> = outcome.report.rows.iter().map(|r| (r.eps, r.flatten())).collect();
    for (eps, pairs) in &flat {
        for (k, v) in pairs {
            long.write_record([format!("{eps:e}"), k.clone(), format!("{v:e}")]).map_err(csv_err)?;
            per_metric.entry(k.as_str()).or_default().push((*eps, *v));
        }
    }
    long.flush()?;
    files.push("metrics.csv".to_string());

    let mut wide = csv::Writer::from_path(dir.join("metrics_wide.csv")).map_err(csv_err)?;
    let mut header = vec!["eps".to_string()];
    header.extend(names.iter().cloned());
    wide.write_record(&header).map_err(csv_err)?;
    for (eps, pairs) in &flat {
        let mut rec = vec![format!("{eps:e}")];
        for n in &names {
            rec.push(pairs.iter().find(|(k, _)| k == n).map(|(_, v)| format!("{v:e}")).unwrap_or_default());
        }
        wide.write_record(&rec).map_err(csv_err)?;
    }
    wide.flush()?;
    files.push("metrics_wide.csv".to_string());

    for (name, pts) in &per_metric {
        let mut text = String::from("# eps value\n");
        for (e, v) in pts {
            text.push_str(&format!("{e:e} {v:e}\n"));
        }
        let file = format!("plot/{name}.dat");
        fs::write(dir.join(&file), text)?;
        files.push(file);
    }

    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(outcome)?)?;
    files.push("summary.json".to_string());
    let manifest = ReportManifest { config_hash: outcome.config_hash.clone(), metrics: names, files };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
