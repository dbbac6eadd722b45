//! End-to-end runs: configure a lattice, build the initial state, evolve,
//! stream observables and extract steady values.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{multiset_count, symmetrized_amplitude_view, SectorBasis, TwoPhotonGrid};
use crate::bic::{bic_decay_rate, bic_for_model, BicState};
use crate::error::{Error, Result};
use crate::hamiltonian::build_sector_hamiltonian;
use crate::model::{
    from_delay_and_coupling, EmitterKind, Geometry, ModelSpec, ParamMap, BAND_CENTER_VELOCITY,
    HORIZON_MARGIN,
};
use crate::observables::{
    all_trapped_prob, bic_projection, check_trapping_identity, concurrence, field_intensity, fit_log_decay,
    measure, sin2_fit, IdentityCheck, ObservableSeries, RegionSpec, SteadyValues,
};
use crate::propagator::{evolve, EvolutionPlan, Method};
use crate::state::StateVector;
use crate::wavepacket::{
    coherent_truncated, single_photon, two_photon_from_grid, two_photon_product, CoherentSpec, WavepacketSpec,
};

/// Default ceiling on a single sector's dimension.
pub const DEFAULT_MAX_DIM: usize = 3_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    VacuumDecay,
    TwoPhotonScattering,
    CoherentScattering,
    TwoQubitScattering,
    LossStudy,
    BosonicUStudy,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::VacuumDecay,
        ScenarioKind::TwoPhotonScattering,
        ScenarioKind::CoherentScattering,
        ScenarioKind::TwoQubitScattering,
        ScenarioKind::LossStudy,
        ScenarioKind::BosonicUStudy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::VacuumDecay => "vacuum_decay",
            ScenarioKind::TwoPhotonScattering => "two_photon_scattering",
            ScenarioKind::CoherentScattering => "coherent_scattering",
            ScenarioKind::TwoQubitScattering => "two_qubit_scattering",
            ScenarioKind::LossStudy => "loss_study",
            ScenarioKind::BosonicUStudy => "bosonic_u_study",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.replace('-', "_");
        Self::ALL.into_iter().find(|k| k.name() == norm)
    }
}

/// Initial condition of a two-qubit run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoQubitStart {
    /// Two-photon packet from the right, emitters unexcited.
    Scattering,
    /// One excitation in the emitter combination that overlaps the bound
    /// state, no photons.
    BoundCombination,
}

/// Scenario parameters. Rates and times are in units of `Γ` and `1/Γ`,
/// widths in `Γ/v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub gamma_tau: f64,
    pub gamma_over_4j: f64,
    pub dk_over_gamma_v: f64,
    /// Photons carry `k₀ ± δ/v`.
    pub detuning_over_gamma: f64,
    /// Number of photons in the exponential input (1 or 2).
    pub photons: usize,
    pub custom_grid: Option<PathBuf>,
    pub t_max: f64,
    pub sample_dt: f64,
    pub tolerance: f64,
    pub steady_window: f64,
    /// Fixed lattice size; sized from the horizon when absent.
    pub n_sites: Option<usize>,
    pub gamma_loss: f64,
    pub loss_rates: Vec<f64>,
    pub u_values: Vec<f64>,
    pub max_occ: usize,
    pub mean_photons: f64,
    pub n_max: usize,
    pub two_qubit_start: TwoQubitStart,
    pub max_dim: usize,
    /// Full-state snapshots at these times.
    pub snapshot_times: Vec<f64>,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, gamma_tau: f64, gamma_over_4j: f64) -> Self {
        ScenarioSpec {
            kind,
            gamma_tau,
            gamma_over_4j,
            dk_over_gamma_v: 0.5,
            detuning_over_gamma: 0.0,
            photons: 2,
            custom_grid: None,
            t_max: 80.0,
            sample_dt: 0.25,
            tolerance: 1e-9,
            steady_window: crate::observables::STEADY_WINDOW,
            n_sites: None,
            gamma_loss: 0.0,
            loss_rates: vec![0.02, 0.05, 0.1],
            u_values: vec![0.0, 1.0, 50.0],
            max_occ: 2,
            mean_photons: 1.5,
            n_max: 3,
            two_qubit_start: TwoQubitStart::Scattering,
            max_dim: DEFAULT_MAX_DIM,
            snapshot_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.gamma_tau > 0.0) {
            errs.push(format!("gamma_tau must be positive, got {}", self.gamma_tau));
        }
        if !(self.gamma_over_4j > 0.0 && self.gamma_over_4j <= crate::model::MAX_GAMMA_OVER_4J) {
            errs.push(format!(
                "gamma_over_4J = {} must satisfy 0 < Γ/(4J) ≤ {}",
                self.gamma_over_4j,
                crate::model::MAX_GAMMA_OVER_4J
            ));
        }
        if !(self.dk_over_gamma_v > 0.0) {
            errs.push(format!("dk_over_gamma must be positive, got {}", self.dk_over_gamma_v));
        }
        if !(self.t_max > 0.0) {
            errs.push(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt <= self.t_max) {
            errs.push(format!("sample_dt must lie in (0, t_max], got {}", self.sample_dt));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1e-2) {
            errs.push(format!("tolerance must lie in (0, 1e-2), got {}", self.tolerance));
        }
        if !(self.steady_window > 0.0 && self.steady_window <= self.t_max) {
            errs.push(format!("steady_window must lie in (0, t_max], got {}", self.steady_window));
        }
        if !(1..=2).contains(&self.photons) {
            errs.push(format!("photons must be 1 or 2, got {}", self.photons));
        }
        if !(0.0..=0.1).contains(&self.gamma_loss) {
            errs.push(format!("gamma_loss must lie in [0, 0.1] (units of Γ), got {}", self.gamma_loss));
        }
        if self.loss_rates.iter().any(|g| !(0.0..=0.1).contains(g)) {
            errs.push("loss_rates must lie in [0, 0.1] (units of Γ)".into());
        }
        if self.u_values.iter().any(|u| *u < 0.0) {
            errs.push("U values must be non-negative".into());
        }
        if self.n_max > crate::basis::MAX_EXCITATIONS {
            errs.push(format!("n_max must be ≤ {}, got {}", crate::basis::MAX_EXCITATIONS, self.n_max));
        }
        if !(self.mean_photons >= 0.0) {
            errs.push(format!("mean_photons must be ≥ 0, got {}", self.mean_photons));
        }
        if self.snapshot_times.iter().any(|t| !(0.0..=self.t_max).contains(t)) {
            errs.push("snapshot_times must lie in [0, t_max]".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn geometry(&self) -> Geometry {
        match self.kind {
            ScenarioKind::TwoQubitScattering => Geometry::TwoQubit,
            _ => Geometry::MirrorQubit,
        }
    }

    fn t_max_j(&self, gamma: f64) -> f64 {
        self.t_max / gamma
    }
}

/// Full state recorded at a requested time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub state: StateVector,
}

/// Everything a single evolution produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub kind: ScenarioKind,
    pub params: ParamMap,
    pub model: ModelSpec,
    pub series: ObservableSeries,
    pub steady: SteadyValues,
    pub identity: Option<IdentityCheck>,
    pub p_bic: Option<f64>,
    pub bic_overlap: Option<f64>,
    pub eps_sq: Option<f64>,
    pub both_trapped_fraction: Option<f64>,
    pub sin2_fit: Option<(f64, f64)>,
    pub norm_drift: f64,
    pub basis_digests: Vec<String>,
    pub warnings: Vec<String>,
    /// Photon intensity per site at `t_max`.
    #[serde(skip)]
    pub field: Vec<f64>,
    /// Photon intensity averaged over the steady window.
    #[serde(skip)]
    pub steady_field: Vec<f64>,
    #[serde(skip)]
    pub final_state: Option<StateVector>,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
}

impl RunReport {
    /// Symmetrized two-photon amplitude of the final state, if any.
    pub fn final_grid(&self) -> Option<TwoPhotonGrid> {
        self.final_state
            .as_ref()
            .filter(|s| s.n_exc() == 2)
            .and_then(|s| symmetrized_amplitude_view(s).ok())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LossPoint {
    pub gamma_loss: f64,
    pub fitted_rate: Option<f64>,
    pub predicted_rate: f64,
    pub relative_error: Option<f64>,
    pub inconclusive: bool,
    pub report: RunReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct UPoint {
    /// Units of `Γ`.
    pub u: f64,
    pub p_tr: f64,
    pub report: RunReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct UStudy {
    pub points: Vec<UPoint>,
    pub two_level: RunReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoherentReport {
    pub combined: RunReport,
    pub weights: Vec<f64>,
    pub deficit: f64,
    pub sector_p_tr: Vec<f64>,
    /// Steady `P_tr` of the two-photon sector alone.
    pub two_photon_p_tr: f64,
}

/// Sites needed so that no photon comes within the margin of a far wall:
/// the incoming packet extends to `packet_far`, outgoing fronts travel at
/// `2J` from the emitters.
pub fn required_sites(model: &ModelSpec, packet_far: f64, t_max_j: f64) -> usize {
    let v = BAND_CENTER_VELOCITY * model.hopping;
    let front = model.entry_site() as f64 + v * t_max_j;
    (packet_far.max(front).ceil() as usize) + HORIZON_MARGIN
}

/// Sites needed left of the first emitter on an open waveguide.
pub fn required_left_sites(model: &ModelSpec, t_max_j: f64) -> usize {
    let v = BAND_CENTER_VELOCITY * model.hopping;
    (v * t_max_j).ceil() as usize + HORIZON_MARGIN
}

/// Pre-run horizon assertion.
pub fn check_horizon(model: &ModelSpec, packet_far: f64, t_max_j: f64) -> Result<()> {
    let need = required_sites(model, packet_far, t_max_j);
    if need > model.n_sites {
        return Err(Error::Horizon(format!(
            "outgoing photons reach within {HORIZON_MARGIN} sites of the far wall before t_max; \
             need n_sites ≥ {need}, have {}",
            model.n_sites
        )));
    }
    if model.geometry() == Geometry::TwoQubit {
        let left = required_left_sites(model, t_max_j);
        if model.emitters[0].site <= left {
            return Err(Error::Horizon(format!(
                "transmitted photons reach the left wall before t_max; first emitter must sit beyond site {left}"
            )));
        }
    }
    Ok(())
}

fn dim_guard(model: &ModelSpec, n_exc: usize, max_dim: usize) -> Result<()> {
    let mut dim = 0usize;
    let n_em = model.emitters.len();
    for used in 0..=n_exc.min(n_em * 3) {
        // upper bound: every emitter pattern with `used` excitations
        let patterns = if n_em == 1 { 1 } else { used + 1 };
        dim += patterns * multiset_count(model.n_sites, n_exc - used.min(n_exc));
        if used == n_exc {
            break;
        }
    }
    if dim > max_dim {
        let mut n = model.n_sites;
        while n > 1 && multiset_count(n, n_exc) > max_dim {
            n -= 1;
        }
        return Err(Error::Resource(format!(
            "the {n_exc}-excitation sector on {} sites has dimension ≈ {dim} above the budget {max_dim}; \
             try n_sites ≤ {n} with a shorter t_max",
            model.n_sites
        )));
    }
    Ok(())
}

struct Evolution {
    series: ObservableSeries,
    steady_field: Vec<f64>,
    final_state: StateVector,
    snapshots: Vec<Snapshot>,
}

/// Evolve and measure one sector; times reported in units of `1/Γ`.
fn evolve_sector(
    model: &ModelSpec,
    psi0: &StateVector,
    spec: &ScenarioSpec,
    region: &RegionSpec,
    with_concurrence: bool,
) -> Result<Evolution> {
    let gamma = model.gamma();
    let h = build_sector_hamiltonian(model, psi0.basis())?;
    let method = if h.is_hermitian() {
        Method::PolynomialHermitian
    } else {
        Method::ExplicitStepper
    };
    let plan = EvolutionPlan::in_gamma_units(spec.t_max, spec.sample_dt, gamma, method, spec.tolerance);
    let with_bb = model.emitters.iter().any(|e| e.kind.max_occupation() > 1);
    let mut series = ObservableSeries::new(with_concurrence, with_bb);
    let mut pending: Vec<f64> = spec.snapshot_times.clone();
    pending.sort_by(|a, b| a.total_cmp(b));
    let mut snapshots = Vec::new();
    let window_start = spec.t_max - spec.steady_window;
    let mut steady_field = vec![0.0; model.n_sites];
    let mut field_samples = 0usize;
    let conc_ok = with_concurrence && psi0.n_exc() <= 2;
    let final_state = evolve(&h, psi0, &plan, |t, psi| {
        let tg = t * gamma;
        let c = if conc_ok { concurrence(psi).ok() } else { None };
        series.push(tg, &measure(psi, region), c);
        if tg >= window_start - 1e-9 {
            for (a, b) in steady_field.iter_mut().zip(field_intensity(psi)) {
                *a += b;
            }
            field_samples += 1;
        }
        while pending.first().is_some_and(|&ts| ts <= tg + 1e-9) {
            pending.remove(0);
            snapshots.push(Snapshot { t: tg, state: psi.clone() });
        }
    })?;
    steady_field.iter_mut().for_each(|f| *f /= field_samples.max(1) as f64);
    Ok(Evolution {
        series,
        steady_field,
        final_state,
        snapshots,
    })
}

fn model_for(spec: &ScenarioSpec) -> Result<(ModelSpec, ParamMap)> {
    // provisional lattice only to validate and snap parameters
    let (m, p) = from_delay_and_coupling(spec.gamma_tau, spec.gamma_over_4j, spec.geometry(), 4096)?;
    Ok((m, p))
}

fn mirror_model(spec: &ScenarioSpec, packet_far: impl Fn(&ModelSpec) -> f64) -> Result<(ModelSpec, ParamMap)> {
    let (m, p) = model_for(spec)?;
    let t_j = spec.t_max_j(p.gamma);
    let n = match spec.n_sites {
        Some(n) => n,
        None => required_sites(&m, packet_far(&m), t_j),
    };
    let mut model = m.with_sites(n.max(p.d + 1))?;
    model.emitters[0].gamma_loss = spec.gamma_loss * p.gamma;
    check_horizon(&model, packet_far(&model), t_j)?;
    Ok((model, p))
}

fn two_qubit_model(spec: &ScenarioSpec, packet_far: impl Fn(&ModelSpec) -> f64) -> Result<(ModelSpec, ParamMap)> {
    let (_, p) = model_for(spec)?;
    let t_j = spec.t_max_j(p.gamma);
    let g = p.g;
    let probe = ModelSpec::two_qubits(p.d + 2, g, 1, p.d)?;
    let left = required_left_sites(&probe, t_j) + 1;
    let model = match spec.n_sites {
        Some(n) => {
            let first = (n.saturating_sub(p.d)) / 2 + 1;
            ModelSpec::two_qubits(n, g, first.max(1), p.d)?
        }
        None => {
            let placed = ModelSpec::two_qubits(left + p.d + 1, g, left, p.d)?;
            let n = required_sites(&placed, packet_far(&placed), t_j);
            ModelSpec::two_qubits(n, g, left, p.d)?
        }
    };
    let model = model.with_loss(spec.gamma_loss * p.gamma)?;
    check_horizon(&model, packet_far(&model), t_j)?;
    let mut p = p;
    p.gamma_tau = model.param_map().gamma_tau;
    Ok((model, p))
}

fn exponential_far(spec: &ScenarioSpec) -> impl Fn(&ModelSpec) -> f64 + '_ {
    move |m: &ModelSpec| WavepacketSpec::exponential(m, spec.dk_over_gamma_v, 0.0).far_extent()
}

fn pair_specs(spec: &ScenarioSpec, model: &ModelSpec) -> (WavepacketSpec, WavepacketSpec) {
    (
        WavepacketSpec::exponential(model, spec.dk_over_gamma_v, spec.detuning_over_gamma),
        WavepacketSpec::exponential(model, spec.dk_over_gamma_v, -spec.detuning_over_gamma),
    )
}

fn grid_far(grid: &TwoPhotonGrid) -> f64 {
    let n = grid.n_sites;
    let dens = grid.density();
    let total: f64 = dens.iter().sum();
    let mut tail = 0.0;
    for x in (1..=n).rev() {
        // weight with at least one photon at x and the other at or below x
        let row: f64 = (1..=x).map(|y| dens[(x - 1) * n + (y - 1)]).sum::<f64>() * 2.0 - dens[(x - 1) * n + (x - 1)];
        tail += row;
        if tail > 1e-12 * total {
            return x as f64;
        }
    }
    0.0
}

fn load_grid(spec: &ScenarioSpec) -> Result<Option<TwoPhotonGrid>> {
    match &spec.custom_grid {
        Some(path) => Ok(Some(crate::io::read_two_photon_grid(path)?)),
        None => Ok(None),
    }
}

/// Copy a grid onto a lattice of `n_sites` sites (sites beyond the grid are
/// empty; weight beyond the lattice is an error).
pub fn embed_grid(grid: &TwoPhotonGrid, n_sites: usize) -> Result<TwoPhotonGrid> {
    let mut out = TwoPhotonGrid::zeros(n_sites);
    let mut lost = 0.0;
    for x in 1..=grid.n_sites {
        for y in x..=grid.n_sites {
            let v = grid.get(x, y);
            if x <= n_sites && y <= n_sites {
                out.set_symmetric(x, y, v);
            } else {
                lost += v.norm_sqr() * if x == y { 1.0 } else { 2.0 };
            }
        }
    }
    if lost > crate::wavepacket::CLIP_TOLERANCE * grid.norm_sqr().max(f64::MIN_POSITIVE) {
        return Err(Error::Geometry(format!(
            "custom grid carries weight {lost:e} beyond the {n_sites}-site lattice"
        )));
    }
    Ok(out)
}

fn finish_report(
    spec: &ScenarioSpec,
    model: &ModelSpec,
    params: ParamMap,
    region: &RegionSpec,
    evo: Evolution,
    bic: Option<&BicState>,
) -> Result<RunReport> {
    let steady = evo.series.steady_state(spec.steady_window);
    let mut warnings = Vec::new();
    if !steady.settled {
        warnings.push(format!(
            "outgoing flux {:.3e} per 1/Γ in the final window exceeds {:e}; steady values may be transient",
            steady.max_flux,
            crate::observables::FLUX_THRESHOLD
        ));
    }
    let psi = &evo.final_state;
    let n_exc = psi.n_exc();
    let gamma_tau = model.param_map().gamma_tau;
    let identity = (n_exc == 2).then(|| check_trapping_identity(steady.p_tr, steady.p_e, gamma_tau, model.geometry()));
    let p_bic = match (bic, n_exc) {
        (Some(b), 2) if model.emitters.iter().all(|e| e.kind.max_occupation() == 1) => {
            Some(bic_projection(psi, b, model)?)
        }
        _ => None,
    };
    let field = field_intensity(psi);
    let node = match model.geometry() {
        Geometry::MirrorQubit => 0,
        Geometry::TwoQubit => model.emitters[0].site,
    };
    let sin2 = (!region.trapped.is_empty() && n_exc >= 1).then(|| sin2_fit(&evo.steady_field, region.trapped, node));
    let both = (n_exc == 2).then(|| all_trapped_prob(psi, region) / psi.norm_sqr().max(f64::MIN_POSITIVE));
    Ok(RunReport {
        kind: spec.kind,
        params: ParamMap {
            gamma_tau_target: params.gamma_tau_target,
            ..model.param_map()
        },
        model: model.clone(),
        norm_drift: evo.series.norm_drift(),
        series: evo.series,
        steady,
        identity,
        p_bic,
        bic_overlap: None,
        eps_sq: bic.map(|b| b.epsilon_sq()),
        both_trapped_fraction: both,
        sin2_fit: sin2,
        basis_digests: vec![psi.basis().digest()],
        warnings,
        field,
        steady_field: evo.steady_field,
        final_state: Some(evo.final_state),
        snapshots: evo.snapshots,
    })
}

/// `|e, 0⟩` relaxing towards the bound state.
pub fn run_vacuum_decay(spec: &ScenarioSpec) -> Result<RunReport> {
    spec.validate()?;
    let (model, params) = mirror_model(spec, |_| 0.0)?;
    let region = RegionSpec::for_model(&model);
    let b1 = SectorBasis::shared(&model, 1)?;
    let e = b1
        .index_of(&crate::basis::BasisConfig::new(&[1], &[]))
        .expect("excited emitter config");
    let psi0 = StateVector::basis_state(b1.clone(), e);
    let evo = evolve_sector(&model, &psi0, spec, &region, false)?;
    let bic = bic_for_model(&model).ok();
    let overlap = match &bic {
        Some(b) => Some(b.to_state(&b1)?.inner(&evo.final_state)?.norm_sqr()),
        None => None,
    };
    let mut report = finish_report(spec, &model, params, &region, evo, bic.as_ref())?;
    report.bic_overlap = overlap;
    if bic.is_none() {
        report
            .warnings
            .push("odd separation: no bound state, full decay expected".into());
    }
    Ok(report)
}

fn scattering_input(spec: &ScenarioSpec, model: &ModelSpec, grid: Option<&TwoPhotonGrid>) -> Result<StateVector> {
    if let Some(g) = grid {
        let embedded = embed_grid(g, model.n_sites)?;
        return Ok(two_photon_from_grid(&embedded, model)?.0);
    }
    let (s1, s2) = pair_specs(spec, model);
    if spec.photons == 1 {
        single_photon(&s1, model)
    } else {
        two_photon_product(&s1, &s2, model)
    }
}

/// Photon-pair (or single-photon) scattering on the mirror–qubit system.
pub fn run_two_photon_scattering(spec: &ScenarioSpec) -> Result<RunReport> {
    spec.validate()?;
    let grid = load_grid(spec)?;
    run_two_photon_with_input(spec, grid.as_ref())
}

/// As [`run_two_photon_scattering`] with an in-memory custom grid.
pub fn run_two_photon_with_input(spec: &ScenarioSpec, grid: Option<&TwoPhotonGrid>) -> Result<RunReport> {
    spec.validate()?;
    let far = |m: &ModelSpec| match grid {
        Some(g) => grid_far(g),
        None => exponential_far(spec)(m),
    };
    let (model, params) = mirror_model(spec, far)?;
    dim_guard(&model, if grid.is_some() { 2 } else { spec.photons }, spec.max_dim)?;
    let region = RegionSpec::for_model(&model);
    let psi0 = scattering_input(spec, &model, grid)?;
    let evo = evolve_sector(&model, &psi0, spec, &region, false)?;
    let bic = bic_for_model(&model).ok();
    finish_report(spec, &model, params, &region, evo, bic.as_ref())
}

/// Two qubits on an open waveguide.
pub fn run_two_qubit(spec: &ScenarioSpec) -> Result<RunReport> {
    spec.validate()?;
    let start = spec.two_qubit_start;
    let (model, params) = match start {
        TwoQubitStart::Scattering => two_qubit_model(spec, exponential_far(spec))?,
        TwoQubitStart::BoundCombination => two_qubit_model(spec, |_| 0.0)?,
    };
    let region = RegionSpec::for_model(&model);
    let bic = bic_for_model(&model).ok();
    let psi0 = match start {
        TwoQubitStart::Scattering => {
            dim_guard(&model, 2, spec.max_dim)?;
            scattering_input(spec, &model, None)?
        }
        TwoQubitStart::BoundCombination => {
            let b1 = SectorBasis::shared(&model, 1)?;
            let sign = match &bic {
                Some(b) if b.emitter_amps[1].re < 0.0 => -1.0,
                _ => 1.0,
            };
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut psi = StateVector::zeros(b1.clone());
            let i1 = b1.index_of(&crate::basis::BasisConfig::new(&[1, 0], &[])).expect("config");
            let i2 = b1.index_of(&crate::basis::BasisConfig::new(&[0, 1], &[])).expect("config");
            psi.amps_mut()[i1] = Complex64::new(s, 0.0);
            psi.amps_mut()[i2] = Complex64::new(sign * s, 0.0);
            psi
        }
    };
    let evo = evolve_sector(&model, &psi0, spec, &region, true)?;
    let overlap = match (&bic, start) {
        (Some(b), TwoQubitStart::BoundCombination) => {
            Some(b.to_state(evo.final_state.basis_arc())?.inner(&evo.final_state)?.norm_sqr())
        }
        _ => None,
    };
    let mut report = finish_report(spec, &model, params, &region, evo, bic.as_ref())?;
    report.bic_overlap = overlap;
    Ok(report)
}

/// Lossy emitter: fit the long-time decay of `P_tr` for each loss rate.
pub fn run_loss_study(spec: &ScenarioSpec) -> Result<Vec<LossPoint>> {
    spec.validate()?;
    let mut out = Vec::new();
    for &gl in &spec.loss_rates {
        let mut s = spec.clone();
        s.kind = ScenarioKind::TwoPhotonScattering;
        s.gamma_loss = gl;
        let mut report = run_two_photon_scattering(&s)?;
        report.kind = ScenarioKind::LossStudy;
        let bic = bic_for_model(&report.model)?;
        let predicted = bic_decay_rate(gl, &bic);
        let fit = fit_log_decay(&report.series.t, &report.series.p_tr, spec.t_max / 2.0, spec.t_max);
        let fitted = fit.map(|(r, _)| r);
        let inconclusive = fit.is_none_or(|(_, n)| n < 10);
        let relative_error = match fitted {
            Some(f) if predicted > 0.0 => Some((f - predicted).abs() / predicted),
            _ => None,
        };
        log::info!("γ_a = {gl}Γ: fitted {fitted:?}, predicted {predicted}");
        out.push(LossPoint {
            gamma_loss: gl,
            fitted_rate: fitted,
            predicted_rate: predicted,
            relative_error,
            inconclusive,
            report,
        });
    }
    Ok(out)
}

/// Bosonic emitter with on-site repulsion `U` (units of `Γ`) against the
/// two-level reference.
pub fn run_bosonic_u_study(spec: &ScenarioSpec) -> Result<UStudy> {
    spec.validate()?;
    if spec.max_occ < 2 {
        return Err(Error::Truncation(format!(
            "bosonic emitter needs max_occ ≥ 2 in the two-photon sector, got {}",
            spec.max_occ
        )));
    }
    let mut base = spec.clone();
    base.kind = ScenarioKind::TwoPhotonScattering;
    base.photons = 2;
    let two_level = run_two_photon_scattering(&base)?;
    let mut points = Vec::new();
    for &u in &spec.u_values {
        let report = run_bosonic_point(spec, u)?;
        log::info!("U = {u}Γ: P_tr(∞) = {}", report.steady.p_tr);
        points.push(UPoint {
            u,
            p_tr: report.steady.p_tr,
            report,
        });
    }
    Ok(UStudy { points, two_level })
}

/// Photon-pair scattering off a bosonic emitter with repulsion `u` (units
/// of `Γ`).
pub fn run_bosonic_point(spec: &ScenarioSpec, u: f64) -> Result<RunReport> {
    spec.validate()?;
    if spec.max_occ < 2 {
        return Err(Error::Truncation(format!(
            "bosonic emitter needs max_occ ≥ 2 in the two-photon sector, got {}",
            spec.max_occ
        )));
    }
    let mut base = spec.clone();
    base.kind = ScenarioKind::TwoPhotonScattering;
    base.photons = 2;
    let (model, params) = mirror_model(&base, exponential_far(&base))?;
    let model = model.with_kind(EmitterKind::Bosonic {
        u: u * params.gamma,
        max_occ: spec.max_occ,
    })?;
    dim_guard(&model, 2, spec.max_dim)?;
    let region = RegionSpec::for_model(&model);
    let psi0 = scattering_input(&base, &model, None)?;
    let evo = evolve_sector(&model, &psi0, &base, &region, false)?;
    let mut report = finish_report(&base, &model, params, &region, evo, None)?;
    report.kind = ScenarioKind::BosonicUStudy;
    Ok(report)
}

/// Truncated coherent pulse, one evolution per photon-number sector.
pub fn run_coherent_scattering(spec: &ScenarioSpec) -> Result<CoherentReport> {
    spec.validate()?;
    let (model, params) = mirror_model(spec, exponential_far(spec))?;
    for n in 1..=spec.n_max {
        dim_guard(&model, n, spec.max_dim)?;
    }
    let region = RegionSpec::for_model(&model);
    let cspec = CoherentSpec {
        alpha: Complex64::new(spec.mean_photons.sqrt(), 0.0),
        shape: WavepacketSpec::exponential(&model, spec.dk_over_gamma_v, 0.0),
        n_max: spec.n_max,
    };
    let coherent = coherent_truncated(&cspec, &model)?;
    let bic = bic_for_model(&model).ok();
    let mut reports = Vec::new();
    for (n, psi0) in coherent.sectors.iter().enumerate() {
        let evo = evolve_sector(&model, psi0, spec, &region, false)?;
        log::info!("coherent sector n = {n} done");
        reports.push(finish_report(spec, &model, params, &region, evo, bic.as_ref())?);
    }
    let parts: Vec<(f64, &ObservableSeries)> = coherent.weights.iter().copied().zip(reports.iter().map(|r| &r.series)).collect();
    let series = ObservableSeries::weighted_sum(&parts)?;
    let steady = series.steady_state(spec.steady_window);
    let sector_p_tr: Vec<f64> = reports.iter().map(|r| r.steady.p_tr).collect();
    let two_photon_p_tr = sector_p_tr.get(2).copied().unwrap_or(0.0);
    let mut warnings = coherent.warnings.clone();
    for r in &reports {
        warnings.extend(r.warnings.iter().cloned());
    }
    let mut field = vec![0.0; model.n_sites];
    let mut steady_field = vec![0.0; model.n_sites];
    for (w, r) in coherent.weights.iter().zip(&reports) {
        for (f, v) in field.iter_mut().zip(&r.field) {
            *f += w * v;
        }
        for (f, v) in steady_field.iter_mut().zip(&r.steady_field) {
            *f += w * v;
        }
    }
    let combined = RunReport {
        kind: ScenarioKind::CoherentScattering,
        params: ParamMap {
            gamma_tau_target: params.gamma_tau_target,
            ..model.param_map()
        },
        model: model.clone(),
        norm_drift: series.norm_drift(),
        series,
        steady,
        identity: Some(check_trapping_identity(
            steady.p_tr,
            steady.p_e,
            model.param_map().gamma_tau,
            Geometry::MirrorQubit,
        )),
        p_bic: None,
        bic_overlap: None,
        eps_sq: bic.as_ref().map(|b| b.epsilon_sq()),
        both_trapped_fraction: None,
        sin2_fit: Some(sin2_fit(&steady_field, region.trapped, 0)),
        basis_digests: reports.iter().flat_map(|r| r.basis_digests.clone()).collect(),
        warnings,
        field,
        steady_field,
        final_state: None,
        snapshots: Vec::new(),
    };
    Ok(CoherentReport {
        combined,
        weights: coherent.weights,
        deficit: coherent.deficit,
        sector_p_tr,
        two_photon_p_tr,
    })
}

/// Result of any scenario kind, for the command line.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ScenarioOutcome {
    Single(RunReport),
    Loss(Vec<LossPoint>),
    Bosonic(UStudy),
    Coherent(CoherentReport),
}

pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioOutcome> {
    Ok(match spec.kind {
        ScenarioKind::VacuumDecay => ScenarioOutcome::Single(run_vacuum_decay(spec)?),
        ScenarioKind::TwoPhotonScattering => ScenarioOutcome::Single(run_two_photon_scattering(spec)?),
        ScenarioKind::TwoQubitScattering => ScenarioOutcome::Single(run_two_qubit(spec)?),
        ScenarioKind::LossStudy => ScenarioOutcome::Loss(run_loss_study(spec)?),
        ScenarioKind::BosonicUStudy => ScenarioOutcome::Bosonic(run_bosonic_u_study(spec)?),
        ScenarioKind::CoherentScattering => ScenarioOutcome::Coherent(run_coherent_scattering(spec)?),
    })
}

/// Separation and lattice parameters a spec resolves to, without running.
pub fn resolve_params(spec: &ScenarioSpec) -> Result<ParamMap> {
    Ok(model_for(spec)?.1)
}
