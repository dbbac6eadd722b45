use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::MAX_GAMMA_OVER_4J;
use crate::optimizer::{default_bandwidth_grid, log_grid, EngineerSpec, Objective, SweepSpec, SweepVariable};
use crate::scenario::{ScenarioKind, ScenarioSpec, TwoQubitStart};

pub const SCHEMA_VERSION: i64 = 1;

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub scenario: ScenarioSpec,
    pub sweep: Option<SweepSpec>,
    pub engineer: Option<EngineerSpec>,
    /// Keys that were absent and took their default value.
    pub defaulted: Vec<String>,
}

const TOP_KEYS: &[&str] = &[
    "schema_version",
    "kind",
    "gamma_tau",
    "gamma_over_4J",
    "dk_over_gamma",
    "detuning_over_gamma",
    "photons",
    "custom_grid",
    "t_max",
    "sample_dt",
    "tolerance",
    "steady_window",
    "n_sites",
    "gamma_loss",
    "loss_rates",
    "u_values",
    "max_occ",
    "mean_photons",
    "n_max",
    "two_qubit_start",
    "max_dim",
    "snapshot_times",
    "sweep",
    "engineer",
];
const SWEEP_KEYS: &[&str] = &["variable", "grid", "min", "max", "per_decade", "objective"];
const ENGINEER_KEYS: &[&str] = &[
    "iterations",
    "dx0",
    "offset",
    "settle",
    "sample_dt",
    "tolerance",
    "steady_window",
    "baseline_dk",
    "max_dim",
];

/// Collects every problem in one pass.
struct Reader<'a> {
    table: &'a Table,
    prefix: &'static str,
    errors: &'a mut Vec<String>,
    defaulted: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn key(&self, k: &str) -> String {
        format!("{}{k}", self.prefix)
    }

    fn unknown(&mut self, allowed: &[&str]) {
        for k in self.table.keys() {
            if !allowed.contains(&k.as_str()) {
                self.errors.push(format!("unknown key \"{}\"", self.key(k)));
            }
        }
    }

    fn raw(&mut self, k: &str, required: bool) -> Option<&Value> {
        let v = self.table.get(k);
        if v.is_none() {
            if required {
                self.errors.push(format!("missing required key \"{}\"", self.key(k)));
            } else {
                self.defaulted.push(self.key(k));
            }
        }
        v
    }

    fn as_f64(&mut self, k: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.errors.push(format!("\"{}\" must be a number", self.key(k)));
                None
            }
        }
    }

    fn f64(&mut self, k: &str, out: &mut f64, required: bool) {
        if let Some(v) = self.raw(k, required).cloned() {
            if let Some(x) = self.as_f64(k, &v) {
                *out = x;
            }
        }
    }

    fn usize(&mut self, k: &str, out: &mut usize) {
        if let Some(v) = self.raw(k, false).cloned() {
            match v.as_integer() {
                Some(i) if i >= 0 => *out = i as usize,
                _ => self.errors.push(format!("\"{}\" must be a non-negative integer", self.key(k))),
            }
        }
    }

    fn list(&mut self, k: &str, out: &mut Vec<f64>) {
        if let Some(v) = self.raw(k, false).cloned() {
            match v.as_array() {
                Some(a) => {
                    let vals: Vec<Option<f64>> = a.iter().map(|x| self.as_f64(k, x)).collect();
                    if vals.iter().all(Option::is_some) {
                        *out = vals.into_iter().flatten().collect();
                    }
                }
                None => self.errors.push(format!("\"{}\" must be a list of numbers", self.key(k))),
            }
        }
    }

    fn string(&mut self, k: &str, required: bool) -> Option<String> {
        let v = self.raw(k, required)?.clone();
        match v.as_str() {
            Some(s) => Some(s.to_string()),
            None => {
                self.errors.push(format!("\"{}\" must be a string", self.key(k)));
                None
            }
        }
    }
}

fn scenario_from(table: &Table, errors: &mut Vec<String>, defaulted: &mut Vec<String>) -> ScenarioSpec {
    let mut r = Reader {
        table,
        prefix: "",
        errors,
        defaulted,
    };
    r.unknown(TOP_KEYS);
    if let Some(v) = table.get("schema_version") {
        if v.as_integer() != Some(SCHEMA_VERSION) {
            r.errors.push(format!("schema_version must be {SCHEMA_VERSION}, got {v}"));
        }
    }
    let kind = match r.string("kind", true) {
        Some(s) => ScenarioKind::parse(&s).unwrap_or_else(|| {
            let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
            r.errors.push(format!("unknown kind \"{s}\" (expected one of {})", names.join(", ")));
            ScenarioKind::TwoPhotonScattering
        }),
        None => ScenarioKind::TwoPhotonScattering,
    };
    let mut s = ScenarioSpec::new(kind, f64::NAN, f64::NAN);
    r.f64("gamma_tau", &mut s.gamma_tau, true);
    r.f64("gamma_over_4J", &mut s.gamma_over_4j, true);
    r.f64("dk_over_gamma", &mut s.dk_over_gamma_v, false);
    r.f64("detuning_over_gamma", &mut s.detuning_over_gamma, false);
    r.usize("photons", &mut s.photons);
    if let Some(p) = r.string("custom_grid", false) {
        s.custom_grid = Some(PathBuf::from(p));
    }
    r.f64("t_max", &mut s.t_max, false);
    r.f64("sample_dt", &mut s.sample_dt, false);
    r.f64("tolerance", &mut s.tolerance, false);
    r.f64("steady_window", &mut s.steady_window, false);
    if let Some(v) = r.raw("n_sites", false).cloned() {
        match v.as_integer() {
            Some(i) if i > 0 => s.n_sites = Some(i as usize),
            _ => r.errors.push("\"n_sites\" must be a positive integer".into()),
        }
    }
    r.f64("gamma_loss", &mut s.gamma_loss, false);
    r.list("loss_rates", &mut s.loss_rates);
    r.list("u_values", &mut s.u_values);
    r.usize("max_occ", &mut s.max_occ);
    r.f64("mean_photons", &mut s.mean_photons, false);
    r.usize("n_max", &mut s.n_max);
    if let Some(v) = r.string("two_qubit_start", false) {
        match v.as_str() {
            "scattering" => s.two_qubit_start = TwoQubitStart::Scattering,
            "bound_combination" => s.two_qubit_start = TwoQubitStart::BoundCombination,
            other => r.errors.push(format!(
                "two_qubit_start \"{other}\" must be \"scattering\" or \"bound_combination\""
            )),
        }
    }
    r.usize("max_dim", &mut s.max_dim);
    r.list("snapshot_times", &mut s.snapshot_times);
    s
}

fn sweep_from(table: &Table, errors: &mut Vec<String>, defaulted: &mut Vec<String>) -> SweepSpec {
    let mut r = Reader {
        table,
        prefix: "sweep.",
        errors,
        defaulted,
    };
    r.unknown(SWEEP_KEYS);
    let variable = match r.string("variable", true) {
        Some(v) => SweepVariable::parse(&v).unwrap_or_else(|| {
            r.errors.push(format!("unknown sweep variable \"{v}\""));
            SweepVariable::Bandwidth
        }),
        None => SweepVariable::Bandwidth,
    };
    let objective = match r.string("objective", false).as_deref() {
        None | Some("p_tr_inf") => Objective::PTrInf,
        Some("p_e_inf") => Objective::PEInf,
        Some(o) => {
            r.errors.push(format!("objective \"{o}\" must be \"p_tr_inf\" or \"p_e_inf\""));
            Objective::PTrInf
        }
    };
    let mut grid = Vec::new();
    if table.contains_key("grid") {
        r.list("grid", &mut grid);
    } else if table.contains_key("min") || table.contains_key("max") {
        let (mut lo, mut hi, mut per) = (f64::NAN, f64::NAN, 12usize);
        r.f64("min", &mut lo, true);
        r.f64("max", &mut hi, true);
        r.usize("per_decade", &mut per);
        if lo > 0.0 && hi > lo && per > 0 {
            grid = log_grid(lo, hi, per);
        } else {
            r.errors.push("sweep.min/max must satisfy 0 < min < max".into());
        }
    } else if variable == SweepVariable::Bandwidth {
        r.defaulted.push("sweep.grid".into());
        grid = default_bandwidth_grid();
    } else {
        r.errors.push("missing required key \"sweep.grid\"".into());
    }
    SweepSpec {
        variable,
        grid,
        objective,
    }
}

fn engineer_from(table: &Table, base: &ScenarioSpec, errors: &mut Vec<String>, defaulted: &mut Vec<String>) -> EngineerSpec {
    let mut r = Reader {
        table,
        prefix: "engineer.",
        errors,
        defaulted,
    };
    r.unknown(ENGINEER_KEYS);
    let mut e = EngineerSpec::new(base.gamma_tau, base.gamma_over_4j);
    r.usize("iterations", &mut e.iterations);
    r.f64("dx0", &mut e.dx0, false);
    r.f64("offset", &mut e.offset, false);
    r.f64("settle", &mut e.settle, false);
    r.f64("sample_dt", &mut e.sample_dt, false);
    r.f64("tolerance", &mut e.tolerance, false);
    r.f64("steady_window", &mut e.steady_window, false);
    r.list("baseline_dk", &mut e.baseline_dk);
    r.usize("max_dim", &mut e.max_dim);
    e
}

fn sub_table<'a>(root: &'a Table, key: &str, errors: &mut Vec<String>) -> Option<&'a Table> {
    match root.get(key) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            errors.push(format!("\"{key}\" must be a table"));
            None
        }
    }
}

/// Parse and validate configuration text. `origin` names the source in
/// error messages.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<ConfigFile> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        path: origin.to_path_buf(),
        detail: e.to_string(),
    })?;
    let mut errors = Vec::new();
    let mut defaulted = Vec::new();
    let mut scenario = scenario_from(&root, &mut errors, &mut defaulted);
    if let Some(p) = &scenario.custom_grid {
        if p.is_relative() {
            if let Some(dir) = origin.parent() {
                scenario.custom_grid = Some(dir.join(p));
            }
        }
    }
    let sweep = sub_table(&root, "sweep", &mut errors).map(|t| sweep_from(t, &mut errors, &mut defaulted));
    let engineer =
        sub_table(&root, "engineer", &mut errors).map(|t| engineer_from(t, &scenario, &mut errors, &mut defaulted));

    // range checks only on values that parsed
    if scenario.gamma_over_4j > MAX_GAMMA_OVER_4J {
        errors.push(format!(
            "gamma_over_4J = {} violates the weak-coupling bound Γ/(4J) ≤ {MAX_GAMMA_OVER_4J}",
            scenario.gamma_over_4j
        ));
    } else if !scenario.gamma_tau.is_nan() && !scenario.gamma_over_4j.is_nan() {
        if let Err(Error::Config(v)) = scenario.validate() {
            errors.extend(v);
        }
    }
    if let Some(s) = &sweep {
        if let Err(Error::Config(v)) = s.validate() {
            errors.extend(v.into_iter().map(|m| format!("sweep: {m}")));
        }
    }
    if let Some(e) = &engineer {
        if let Err(Error::Config(v)) = e.validate() {
            errors.extend(v.into_iter().map(|m| format!("engineer: {m}")));
        }
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    for k in &defaulted {
        log::info!("config: \"{k}\" not set, using the default");
    }
    Ok(ConfigFile {
        scenario,
        sweep,
        engineer,
        defaulted,
    })
}

pub fn parse_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}
