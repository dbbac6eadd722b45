use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use wqed_core::basis::symmetrized_amplitude_view;
use wqed_core::bic::bic_for_model;
use wqed_core::io::{
    format_float, write_curve, write_custom_grid, write_density, write_manifest, write_profile, write_series,
    CheckRecord, ConfigFile, CustomGrid, Header, RunManifest,
};
use wqed_core::model::{from_delay_and_coupling, Geometry};
use wqed_core::optimizer::{engineer_wavepacket, sweep as run_sweep, EngineerSpec, SweepSpec};
use wqed_core::scenario::{run_scenario, RunReport, ScenarioKind, ScenarioOutcome};
use wqed_core::state::StateVector;
use wqed_core::{Error, Result};

const NORM_DRIFT_BOUND: f64 = 1e-6;
const IDENTITY_BOUND_MIRROR: f64 = 0.02;
const IDENTITY_BOUND_TWO_QUBIT: f64 = 0.03;
const HAND_OFF_BOUND: f64 = 1e-10;

fn to_json<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn bic_info(gamma_tau: f64, gamma_over_4j: f64, geometry: Geometry, json: bool) -> Result<()> {
    let (model, mut params) = from_delay_and_coupling(gamma_tau, gamma_over_4j, geometry, 4096)?;
    params.gamma_tau = model.param_map().gamma_tau;
    let bic = bic_for_model(&model)?;
    let eps2 = bic.epsilon_sq();
    if json {
        let v = serde_json::json!({
            "params": params,
            "epsilon_sq": eps2,
            "energy": bic.energy,
            "vacuum_decay_p_e": eps2 * eps2,
            "region": [bic.region.first, bic.region.last],
        });
        println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
        return Ok(());
    }
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "geometry         {geometry:?}");
    let _ = writeln!(out, "Γτ requested     {}", params.gamma_tau_target);
    let _ = writeln!(out, "Γτ on lattice    {}", params.gamma_tau);
    let _ = writeln!(out, "Γ/(4J)           {}", params.gamma_over_4j);
    let _ = writeln!(out, "separation d     {}", params.d);
    let _ = writeln!(out, "g                {}", params.g);
    let _ = writeln!(out, "Γ                {}", params.gamma);
    let _ = writeln!(out, "k₀ (mπ/d)        {} (m = {})", params.k0, params.m);
    let _ = writeln!(out, "bound state E    {}", bic.energy);
    let _ = writeln!(out, "|ε|²             {eps2}");
    let _ = writeln!(out, "P_e(∞) from |e⟩  {}", eps2 * eps2);
    let _ = writeln!(out, "trapped sites    {}..={}", bic.region.first, bic.region.last);
    Ok(())
}

/// Writes the files of one report and records its checks.
struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
    manifest: RunManifest,
    save_states: bool,
}

impl Writer<'_> {
    fn header(&self, title: &str, r: &RunReport) -> Header {
        Header::new(title)
            .with("kind", r.kind.name())
            .with_params(&r.params)
            .with("n_sites", r.model.n_sites)
    }

    fn report(&mut self, prefix: &str, r: &RunReport, identity_bound: Option<f64>) -> Result<()> {
        let series = format!("{prefix}series.txt");
        write_series(&self.dir.join(&series), &self.header("observables", r), &r.series)?;
        self.files.push(series.clone());

        if !r.field.is_empty() {
            let name = format!("{prefix}field.txt");
            let rows: Vec<Vec<f64>> = r
                .field
                .iter()
                .zip(&r.steady_field)
                .enumerate()
                .map(|(i, (a, b))| vec![(i + 1) as f64, *a, *b])
                .collect();
            write_curve(&self.dir.join(&name), &self.header("photon intensity", r), &["x", "n_final", "n_steady"], &rows)?;
            self.files.push(name);
        }
        if let Some(grid) = r.final_grid() {
            let name = format!("{prefix}density.txt");
            let span = (4 * r.params.d + 40).min(grid.n_sites);
            write_density(&self.dir.join(&name), &self.header("two-photon density at t_max", r), &grid, span)?;
            self.files.push(name);
        }
        for (i, snap) in r.snapshots.iter().enumerate() {
            let name = format!("{prefix}snapshot_{i}.txt");
            let h = self.header("photon intensity", r).with("t", format_float(snap.t));
            write_profile(&self.dir.join(&name), &h, "n", &wqed_core::observables::field_intensity(&snap.state))?;
            self.files.push(name);
            if self.save_states {
                let name = format!("{prefix}state_{i}.bin");
                write_state(&self.dir.join(&name), &snap.state)?;
                self.files.push(name);
            }
        }

        self.manifest.params.push(r.params);
        self.manifest.basis_digests.extend(r.basis_digests.iter().cloned());
        if r.model.is_hermitian() {
            self.manifest
                .checks
                .push(CheckRecord::new(format!("{prefix}norm_drift"), r.norm_drift, NORM_DRIFT_BOUND).from_series(series));
        }
        if let (Some(bound), Some(id)) = (identity_bound, r.identity) {
            if !id.inconclusive {
                self.manifest
                    .checks
                    .push(CheckRecord::new(format!("{prefix}identity_residual"), id.residual, bound));
            }
        }
        for w in &r.warnings {
            log::warn!("{prefix}{w}");
        }
        Ok(())
    }

    fn finish(mut self, summary: serde_json::Value, started: Instant) -> Result<i32> {
        write_json(&self.dir.join("summary.json"), &summary)?;
        self.files.push("summary.json".into());
        self.manifest.wall_time_s = started.elapsed().as_secs_f64();
        let failed: Vec<&CheckRecord> = self.manifest.checks.iter().filter(|c| !c.passed).collect();
        for c in &failed {
            eprintln!("check failed: {} = {:e} exceeds {:e}", c.name, c.value, c.bound);
        }
        let code = if failed.is_empty() { 0 } else { 2 };
        write_manifest(self.dir, &mut self.manifest, &self.files)?;
        Ok(code)
    }
}

/// Amplitudes as little-endian `(re, im)` f64 pairs in basis order.
fn write_state(path: &Path, state: &StateVector) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 * state.dim());
    for a in state.amps() {
        bytes.extend_from_slice(&a.re.to_le_bytes());
        bytes.extend_from_slice(&a.im.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn writer<'a>(dir: &'a Path, command: String, cfg: &ConfigFile, tolerance: f64, save_states: bool) -> Writer<'a> {
    Writer {
        dir,
        files: Vec::new(),
        manifest: RunManifest::new(command, to_json(&cfg.scenario), tolerance),
        save_states,
    }
}

pub fn run(cfg: &ConfigFile, out: &Path, save_states: bool) -> Result<i32> {
    let started = Instant::now();
    let spec = &cfg.scenario;
    let mut w = writer(out, format!("run {}", spec.kind.name()), cfg, spec.tolerance, save_states);
    let outcome = run_scenario(spec)?;
    let summary = to_json(&outcome);
    match &outcome {
        ScenarioOutcome::Single(r) => {
            let bound = match spec.kind {
                ScenarioKind::TwoPhotonScattering if spec.gamma_loss == 0.0 => Some(IDENTITY_BOUND_MIRROR),
                ScenarioKind::TwoQubitScattering if spec.gamma_loss == 0.0 => Some(IDENTITY_BOUND_TWO_QUBIT),
                _ => None,
            };
            w.report("", r, bound)?;
        }
        ScenarioOutcome::Loss(points) => {
            let mut rows = Vec::new();
            for (i, p) in points.iter().enumerate() {
                w.report(&format!("loss{i}_"), &p.report, None)?;
                rows.push(vec![
                    p.gamma_loss,
                    p.fitted_rate.unwrap_or(f64::NAN),
                    p.predicted_rate,
                    p.relative_error.unwrap_or(f64::NAN),
                ]);
            }
            let name = "loss_fit.txt".to_string();
            let h = Header::new("decay rate of P_tr over [t_max/2, t_max]").with("units", "rates in Γ");
            write_curve(&out.join(&name), &h, &["gamma_loss", "fitted", "predicted", "relative_error"], &rows)?;
            w.files.push(name);
        }
        ScenarioOutcome::Bosonic(study) => {
            w.report("two_level_", &study.two_level, None)?;
            let mut rows = Vec::new();
            for (i, p) in study.points.iter().enumerate() {
                w.report(&format!("u{i}_"), &p.report, None)?;
                rows.push(vec![p.u, p.p_tr]);
            }
            let name = "u_curve.txt".to_string();
            let h = Header::new("steady trapping against on-site repulsion")
                .with("two_level_p_tr", format_float(study.two_level.steady.p_tr))
                .with("units", "U in Γ");
            write_curve(&out.join(&name), &h, &["U", "P_tr_inf"], &rows)?;
            w.files.push(name);
        }
        ScenarioOutcome::Coherent(c) => {
            w.report("", &c.combined, None)?;
            let name = "sectors.txt".to_string();
            let rows: Vec<Vec<f64>> = c
                .weights
                .iter()
                .zip(&c.sector_p_tr)
                .enumerate()
                .map(|(n, (wt, p))| vec![n as f64, *wt, *p])
                .collect();
            let h = Header::new("photon-number sectors").with("deficit", format_float(c.deficit));
            write_curve(&out.join(&name), &h, &["n", "weight", "P_tr_inf"], &rows)?;
            w.files.push(name);
        }
    }
    w.finish(summary, started)
}

pub fn sweep(cfg: &ConfigFile, spec: &SweepSpec, out: &Path) -> Result<i32> {
    let started = Instant::now();
    let mut w = writer(out, format!("sweep {}", spec.variable.name()), cfg, cfg.scenario.tolerance, false);
    let result = run_sweep(spec, &cfg.scenario)?;
    let rows: Vec<Vec<f64>> = result
        .points
        .iter()
        .map(|p| vec![p.x, p.value, p.p_tr_inf, p.p_e_inf, if p.settled { 1.0 } else { 0.0 }])
        .collect();
    let h = Header::new("parameter sweep")
        .with("variable", spec.variable.name())
        .with("objective", format!("{:?}", spec.objective))
        .with("optimum_x", format_float(result.optimum_x))
        .with("optimum_value", format_float(result.optimum_value))
        .with("boundary_optimum", result.boundary_optimum);
    write_curve(&out.join("curve.txt"), &h, &[spec.variable.name(), "objective", "P_tr_inf", "P_e_inf", "settled"], &rows)?;
    w.files.push("curve.txt".into());
    w.manifest.config = serde_json::json!({ "base": to_json(&cfg.scenario), "sweep": to_json(spec) });
    if result.boundary_optimum {
        log::warn!("no interior maximum on the grid");
    }
    println!(
        "optimum {} = {} with objective {}{}",
        spec.variable.name(),
        result.optimum_x,
        result.optimum_value,
        if result.boundary_optimum { " (grid edge)" } else { "" }
    );
    w.finish(to_json(&result), started)
}

pub fn engineer(cfg: &ConfigFile, spec: &EngineerSpec, out: &Path) -> Result<i32> {
    let started = Instant::now();
    let mut w = writer(out, "engineer".into(), cfg, spec.tolerance, false);
    w.manifest.config = to_json(spec);
    let result = engineer_wavepacket(spec)?;
    let mut rows = Vec::new();
    for s in &result.states {
        let k = s.iteration;
        let name = format!("iter{k}_input.txt");
        write_custom_grid(&out.join(&name), &CustomGrid::Two(s.grid.clone()))?;
        w.files.push(name);
        w.manifest.checks.push(CheckRecord::new(
            format!("iter{k}_hand_off_norm"),
            (s.grid.norm_sqr() - 1.0).abs(),
            HAND_OFF_BOUND,
        ));
        let release = format!("iter{k}_release_series.txt");
        write_series(&out.join(&release), &Header::new("release run").with_params(&result.params), &s.forward_series)?;
        w.files.push(release);
        w.report(&format!("iter{k}_score_"), &s.score, Some(IDENTITY_BOUND_MIRROR))?;
        rows.push(vec![
            k as f64,
            s.p_bic,
            s.p_bic_projection.unwrap_or(f64::NAN),
            s.outgoing_weight,
            s.residual_p_tr,
        ]);
        println!("iteration {k}: P_BIC = {:.4}", s.p_bic);
    }
    let h = Header::new("time-reversal engineering").with_params(&result.params);
    write_curve(
        &out.join("engineering.txt"),
        &h,
        &["iteration", "P_BIC", "bic_projection", "outgoing_weight", "unreleased"],
        &rows,
    )?;
    w.files.push("engineering.txt".into());
    if let Some(b) = &result.baseline {
        let rows: Vec<Vec<f64>> = b.points.iter().map(|p| vec![p.x, p.p_tr_inf]).collect();
        let h = Header::new("exponential pulse baseline")
            .with("best", format_float(result.baseline_p_tr.unwrap_or(f64::NAN)));
        write_curve(&out.join("baseline.txt"), &h, &["dk", "P_tr_inf"], &rows)?;
        w.files.push("baseline.txt".into());
        if let Some(r) = result.ratio_to_baseline {
            println!("engineered / best exponential = {r:.3}");
        }
    }
    // keep the output grid of the last scoring run for further iterations
    if let Some(last) = result.states.last() {
        if let Some(psi) = &last.score.final_state {
            if psi.n_exc() == 2 {
                let name = "final_output.txt".to_string();
                write_custom_grid(&out.join(&name), &CustomGrid::Two(symmetrized_amplitude_view(psi)?))?;
                w.files.push(name);
            }
        }
    }
    w.finish(to_json(&result), started)
}
