//! Parameter sweeps and iterated time-reversal engineering of the incoming
//! photon pair.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{symmetrized_amplitude_view, SectorBasis, TwoPhotonGrid};
use crate::bic::{single_qubit_bic, BicState};
use crate::error::{Error, Result};
use crate::model::{from_delay_and_coupling, Geometry, ModelSpec, ParamMap, BAND_CENTER_VELOCITY};
use crate::observables::{bic_channel_amplitudes, measure, ObservableSeries, RegionSpec};
use crate::propagator::{evolve, EvolutionPlan, Method};
use crate::scenario::{
    required_sites, run_bosonic_point, run_two_photon_scattering, run_two_photon_with_input, run_two_qubit,
    run_vacuum_decay, RunReport, ScenarioKind, ScenarioSpec,
};
use crate::wavepacket::{mode_amplitudes, time_reverse, WavepacketSpec};
use crate::hamiltonian::build_sector_hamiltonian;

/// Weight of the outgoing two-photon component below which engineering
/// stalls.
pub const STALL_WEIGHT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// `Δk` in units of `Γ/v`.
    Bandwidth,
    GammaTau,
    /// `δ` in units of `Γ`.
    Detuning,
    /// `U` in units of `Γ`.
    Nonlinearity,
    /// `γ_a` in units of `Γ`.
    Loss,
}

impl SweepVariable {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "dk" | "bandwidth" => SweepVariable::Bandwidth,
            "gamma_tau" | "delay" => SweepVariable::GammaTau,
            "detuning" | "delta" => SweepVariable::Detuning,
            "u" | "nonlinearity" => SweepVariable::Nonlinearity,
            "gamma_loss" | "loss" => SweepVariable::Loss,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::Bandwidth => "dk",
            SweepVariable::GammaTau => "gamma_tau",
            SweepVariable::Detuning => "detuning",
            SweepVariable::Nonlinearity => "u",
            SweepVariable::Loss => "gamma_loss",
        }
    }

    fn log_scale(&self) -> bool {
        matches!(self, SweepVariable::Bandwidth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    PTrInf,
    PEInf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub objective: Objective,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.grid.len() < 3 {
            errs.push(format!("sweep grid needs at least 3 points, got {}", self.grid.len()));
        }
        if !self.grid.windows(2).all(|w| w[1] > w[0]) {
            errs.push("sweep grid must be strictly increasing".into());
        }
        if self.variable.log_scale() && self.grid.iter().any(|x| !(*x > 0.0)) {
            errs.push("bandwidth grid values must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// `points_per_decade` geometric points covering `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points_per_decade: usize) -> Vec<f64> {
    let step = 1.0 / points_per_decade as f64;
    let (a, b) = (lo.log10(), hi.log10());
    let n = ((b - a) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| 10f64.powf(a + k as f64 * step)).collect()
}

/// Default bandwidth grid: 12 points per decade over `[0.02, 2] Γ/v`.
pub fn default_bandwidth_grid() -> Vec<f64> {
    log_grid(0.02, 2.0, 12)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    pub value: f64,
    pub p_tr_inf: f64,
    pub p_e_inf: f64,
    pub settled: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub objective: Objective,
    pub points: Vec<SweepPoint>,
    pub best_index: usize,
    pub optimum_x: f64,
    pub optimum_value: f64,
    /// The best grid point is an endpoint, so no interior maximum was found.
    pub boundary_optimum: bool,
}

fn apply_variable(base: &ScenarioSpec, var: SweepVariable, x: f64) -> ScenarioSpec {
    let mut s = base.clone();
    match var {
        SweepVariable::Bandwidth => s.dk_over_gamma_v = x,
        SweepVariable::GammaTau => s.gamma_tau = x,
        SweepVariable::Detuning => s.detuning_over_gamma = x,
        SweepVariable::Nonlinearity => s.kind = ScenarioKind::BosonicUStudy,
        SweepVariable::Loss => s.gamma_loss = x,
    }
    s
}

fn run_point(base: &ScenarioSpec, var: SweepVariable, x: f64) -> Result<RunReport> {
    let s = apply_variable(base, var, x);
    match (var, s.kind) {
        (SweepVariable::Nonlinearity, _) => run_bosonic_point(&s, x),
        (_, ScenarioKind::VacuumDecay) => run_vacuum_decay(&s),
        (_, ScenarioKind::TwoQubitScattering) => run_two_qubit(&s),
        _ => {
            let mut s = s;
            s.kind = ScenarioKind::TwoPhotonScattering;
            run_two_photon_scattering(&s)
        }
    }
}

/// Vertex of the parabola through three points.
fn parabola_vertex(p: [(f64, f64); 3]) -> Option<(f64, f64)> {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let d = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
    let c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / d;
    if !(a < 0.0) {
        return None;
    }
    let xv = -b / (2.0 * a);
    Some((xv, c - b * b / (4.0 * a)))
}

/// Locate the maximum of sampled values with quadratic interpolation
/// around the best grid point (in `ln x` when `log_scale`).
pub fn interpolate_optimum(xs: &[f64], ys: &[f64], log_scale: bool) -> (usize, f64, f64, bool) {
    let best = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if best == 0 || best + 1 >= xs.len() {
        return (best, xs[best], ys[best], true);
    }
    let u = |x: f64| if log_scale { x.ln() } else { x };
    let pts = [
        (u(xs[best - 1]), ys[best - 1]),
        (u(xs[best]), ys[best]),
        (u(xs[best + 1]), ys[best + 1]),
    ];
    match parabola_vertex(pts) {
        Some((uv, yv)) => {
            let uv = uv.clamp(pts[0].0, pts[2].0);
            let xv = if log_scale { uv.exp() } else { uv };
            (best, xv, yv.max(ys[best]), false)
        }
        None => (best, xs[best], ys[best], false),
    }
}

/// Run `base` at every grid value and locate the optimum of the objective.
pub fn sweep(spec: &SweepSpec, base: &ScenarioSpec) -> Result<SweepResult> {
    spec.validate()?;
    let reports: Vec<Result<RunReport>> = spec
        .grid
        .par_iter()
        .map(|&x| {
            let r = run_point(base, spec.variable, x);
            if let Ok(r) = &r {
                log::info!("{} = {x}: P_tr(∞) = {:.6}", spec.variable.name(), r.steady.p_tr);
            }
            r
        })
        .collect();
    let mut points = Vec::with_capacity(reports.len());
    for (x, r) in spec.grid.iter().zip(reports) {
        let r = r?;
        let value = match spec.objective {
            Objective::PTrInf => r.steady.p_tr,
            Objective::PEInf => r.steady.p_e,
        };
        points.push(SweepPoint {
            x: *x,
            value,
            p_tr_inf: r.steady.p_tr,
            p_e_inf: r.steady.p_e,
            settled: r.steady.settled,
        });
    }
    let ys: Vec<f64> = points.iter().map(|p| p.value).collect();
    let (best_index, optimum_x, optimum_value, boundary_optimum) =
        interpolate_optimum(&spec.grid, &ys, spec.variable.log_scale());
    if boundary_optimum {
        log::warn!("sweep maximum at the grid edge ({} = {optimum_x})", spec.variable.name());
    }
    Ok(SweepResult {
        variable: spec.variable,
        objective: spec.objective,
        points,
        best_index,
        optimum_x,
        optimum_value,
        boundary_optimum,
    })
}

/// Settings of the time-reversal procedure. Times in `1/Γ`, widths in
/// `v/Γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineerSpec {
    pub gamma_tau: f64,
    pub gamma_over_4j: f64,
    pub iterations: usize,
    pub dx0: f64,
    /// Initial probe centre, in widths beyond the emitter.
    pub offset: f64,
    /// Time allowed after the probe reaches the emitter.
    pub settle: f64,
    pub sample_dt: f64,
    pub tolerance: f64,
    pub steady_window: f64,
    /// Exponential-pulse widths (units of `Γ/v`) tried for the baseline.
    pub baseline_dk: Vec<f64>,
    pub max_dim: usize,
}

impl EngineerSpec {
    pub fn new(gamma_tau: f64, gamma_over_4j: f64) -> Self {
        EngineerSpec {
            gamma_tau,
            gamma_over_4j,
            iterations: 2,
            dx0: 2.0,
            offset: 4.0,
            settle: 30.0,
            sample_dt: 0.25,
            tolerance: 1e-9,
            steady_window: crate::observables::STEADY_WINDOW,
            baseline_dk: Vec::new(),
            max_dim: crate::scenario::DEFAULT_MAX_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.iterations == 0 {
            errs.push("iterations must be at least 1".into());
        }
        if !(self.dx0 > 0.0) {
            errs.push(format!("dx0 must be positive, got {}", self.dx0));
        }
        if !(self.offset >= 3.0) {
            errs.push(format!("offset must be at least 3 widths, got {}", self.offset));
        }
        if !(self.settle > 0.0) {
            errs.push(format!("settle must be positive, got {}", self.settle));
        }
        if !(self.steady_window > 0.0 && self.steady_window <= self.settle) {
            errs.push("steady_window must lie in (0, settle]".into());
        }
        if !(self.sample_dt > 0.0) || !(self.tolerance > 0.0) {
            errs.push("sample_dt and tolerance must be positive".into());
        }
        if self.baseline_dk.iter().any(|x| !(*x > 0.0)) {
            errs.push("baseline_dk values must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EngineeringState {
    pub iteration: usize,
    /// Incoming two-photon amplitude handed to the scoring run.
    #[serde(skip)]
    pub grid: TwoPhotonGrid,
    /// Weight of the outgoing two-photon component before normalization.
    pub outgoing_weight: f64,
    /// Emitter population left after the probe, i.e. unreleased bound state.
    pub residual_p_tr: f64,
    /// `P_tr(∞)` of the scoring run.
    pub p_bic: f64,
    /// Direct projection onto the bound-state channel.
    pub p_bic_projection: Option<f64>,
    pub identity_residual: Option<f64>,
    pub forward_series: ObservableSeries,
    pub score: RunReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct EngineeringResult {
    pub params: ParamMap,
    pub states: Vec<EngineeringState>,
    pub baseline: Option<SweepResult>,
    /// Best `P_tr(∞)` of the exponential baseline.
    pub baseline_p_tr: Option<f64>,
    /// Last engineered `P_BIC` over the best exponential baseline.
    pub ratio_to_baseline: Option<f64>,
}

fn centroid(mode: &[Complex64]) -> f64 {
    let w: f64 = mode.iter().map(|a| a.norm_sqr()).sum();
    mode.iter().enumerate().map(|(i, a)| (i + 1) as f64 * a.norm_sqr()).sum::<f64>() / w
}

fn mode_far(mode: &[Complex64]) -> f64 {
    let total: f64 = mode.iter().map(|a| a.norm_sqr()).sum();
    let mut tail = 0.0;
    for (i, a) in mode.iter().enumerate().rev() {
        tail += a.norm_sqr();
        if tail > 1e-12 * total {
            return (i + 1) as f64;
        }
    }
    0.0
}

struct ForwardRun {
    grid: TwoPhotonGrid,
    outgoing_weight: f64,
    residual_p_tr: f64,
    series: ObservableSeries,
    t_fwd: f64,
}

/// Bound state ⊗ incoming probe, evolved until the probe has passed; the
/// outgoing two-photon part is normalized and time reversed.
fn release_run(params: &ParamMap, probe: &[Complex64], spec: &EngineerSpec) -> Result<ForwardRun> {
    let d = params.d;
    let v = BAND_CENTER_VELOCITY;
    let t_fwd = (centroid(probe) - d as f64).max(0.0) / v + spec.settle / params.gamma;
    let sizing = ModelSpec::mirror_qubit(d + 1, params.g, d)?;
    let n = required_sites(&sizing, mode_far(probe), t_fwd);
    let model = ModelSpec::mirror_qubit(n.max(probe.len()), params.g, d)?;
    let mut mode = vec![Complex64::new(0.0, 0.0); model.n_sites];
    mode[..probe.len()].copy_from_slice(probe);
    let bic = single_qubit_bic(&model)?;
    let b1 = SectorBasis::shared(&model, 1)?;
    let b2 = SectorBasis::shared(&model, 2)?;
    if b2.dim() > spec.max_dim {
        return Err(Error::Resource(format!(
            "release run needs dimension {} above the budget {}",
            b2.dim(),
            spec.max_dim
        )));
    }
    let mut psi0 = bic.to_state(&b1)?.apply_creation(&mode, &b2)?;
    psi0.normalize();
    let h = build_sector_hamiltonian(&model, &b2)?;
    let plan = EvolutionPlan::new(t_fwd, spec.sample_dt / params.gamma, Method::PolynomialHermitian, spec.tolerance);
    let region = RegionSpec::for_model(&model);
    let mut series = ObservableSeries::new(false, false);
    let psi = evolve(&h, &psi0, &plan, |t, s| series.push(t * params.gamma, &measure(s, &region), None))?;
    let residual_p_tr = measure(&psi, &region).p_tr();
    let mut out = psi.clone();
    let mut weight = 0.0;
    for (c, a) in b2.configs().iter().zip(out.amps_mut()) {
        let keep = c.total_emitter_occ() == 0 && c.photons.iter().all(|&x| !region.trapped.contains(x as usize));
        if keep {
            weight += a.norm_sqr();
        } else {
            *a = Complex64::new(0.0, 0.0);
        }
    }
    if weight < STALL_WEIGHT {
        return Err(Error::Stall(format!(
            "outgoing two-photon weight {weight:.3e} is below {STALL_WEIGHT:e}"
        )));
    }
    let reversed = time_reverse(&out, &model, true)?;
    Ok(ForwardRun {
        grid: symmetrized_amplitude_view(&reversed)?,
        outgoing_weight: weight,
        residual_p_tr,
        series,
        t_fwd,
    })
}

/// Normalized, time-reversed outgoing single photon accompanying the bound
/// state in a scoring run.
fn next_probe(score: &RunReport, bic_model: &ModelSpec, bic: &BicState) -> Result<Vec<Complex64>> {
    let psi = score
        .final_state
        .as_ref()
        .ok_or_else(|| Error::Consistency("scoring run kept no final state".into()))?;
    let _ = bic_model;
    let mut xi = bic_channel_amplitudes(psi, bic, &score.model)?;
    for (i, a) in xi.iter_mut().enumerate() {
        if bic.region.contains(i + 1) {
            *a = Complex64::new(0.0, 0.0);
        }
    }
    let norm = xi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < STALL_WEIGHT.sqrt() {
        return Err(Error::Stall(format!(
            "outgoing single-photon component has weight {:.3e}",
            norm * norm
        )));
    }
    Ok(xi.iter().map(|a| a.conj() / norm).collect())
}

/// Iterated time-reversal engineering.
///
/// Iteration 1 releases the bound state with a Gaussian probe of width
/// `dx0` and sends the reversed two-photon output onto the unexcited qubit.
/// Each further iteration uses the reversed single-photon output of the
/// previous scoring run as the probe.
pub fn engineer_wavepacket(spec: &EngineerSpec) -> Result<EngineeringResult> {
    spec.validate()?;
    let (model0, params) = from_delay_and_coupling(spec.gamma_tau, spec.gamma_over_4j, Geometry::MirrorQubit, 4096)?;
    let gaussian = WavepacketSpec::gaussian(&model0, spec.dx0, spec.offset);
    let mut probe = {
        let far = gaussian.far_extent().ceil() as usize + 1;
        mode_amplitudes(&gaussian, &model0.with_sites(far)?)?
    };
    let mut states = Vec::new();
    for iteration in 1..=spec.iterations {
        let fwd = release_run(&params, &probe, spec)?;
        log::info!(
            "iteration {iteration}: outgoing two-photon weight {:.4}, unreleased {:.4}",
            fwd.outgoing_weight,
            fwd.residual_p_tr
        );
        let mut score_spec = ScenarioSpec::new(ScenarioKind::TwoPhotonScattering, spec.gamma_tau, spec.gamma_over_4j);
        score_spec.t_max = fwd.t_fwd * params.gamma + spec.settle;
        score_spec.sample_dt = spec.sample_dt;
        score_spec.tolerance = spec.tolerance;
        score_spec.steady_window = spec.steady_window;
        score_spec.max_dim = spec.max_dim;
        let score = run_two_photon_with_input(&score_spec, Some(&fwd.grid))?;
        log::info!("iteration {iteration}: P_BIC = {:.4}", score.steady.p_tr);
        let bic = single_qubit_bic(&score.model)?;
        if iteration < spec.iterations {
            probe = next_probe(&score, &score.model, &bic)?;
        }
        states.push(EngineeringState {
            iteration,
            grid: fwd.grid,
            outgoing_weight: fwd.outgoing_weight,
            residual_p_tr: fwd.residual_p_tr,
            p_bic: score.steady.p_tr,
            p_bic_projection: score.p_bic,
            identity_residual: score.identity.map(|c| c.residual),
            forward_series: fwd.series,
            score,
        });
    }
    let baseline = if spec.baseline_dk.len() >= 3 {
        let mut base = ScenarioSpec::new(ScenarioKind::TwoPhotonScattering, spec.gamma_tau, spec.gamma_over_4j);
        base.t_max = 2.0 * spec.settle;
        base.sample_dt = spec.sample_dt;
        base.tolerance = spec.tolerance;
        base.steady_window = spec.steady_window;
        base.max_dim = spec.max_dim;
        let sweep_spec = SweepSpec {
            variable: SweepVariable::Bandwidth,
            grid: spec.baseline_dk.clone(),
            objective: Objective::PTrInf,
        };
        Some(sweep(&sweep_spec, &base)?)
    } else {
        None
    };
    let baseline_p_tr = baseline
        .as_ref()
        .map(|b| b.points.iter().map(|p| p.p_tr_inf).fold(b.optimum_value, f64::max));
    let ratio_to_baseline = baseline_p_tr.and_then(|best| states.last().map(|s| s.p_bic / best));
    Ok(EngineeringResult {
        params,
        states,
        baseline,
        baseline_p_tr,
        ratio_to_baseline,
    })
}
