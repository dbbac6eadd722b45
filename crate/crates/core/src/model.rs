//! Coupled-cavity discretization of the waveguide and its emitters.
//!
//! Units: hopping `J = 1`, lattice spacing 1, ħ = 1. On this lattice the
//! emitter decay rate is `Γ = g²/J`, the group velocity at the band centre is
//! `v = 2J` and the round-trip delay over `d` sites is `τ = d/J`.
//!
//! Sites are numbered `1..=n_sites`. For the mirror geometry the hard wall sits
//! at site 0, so the field between mirror and emitter lives on `1..d`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `Γ/(4J)` for which the band is close enough to linear.
pub const MAX_GAMMA_OVER_4J: f64 = 0.1;

/// Sites kept free between the furthest photon front and a hard wall.
pub const HORIZON_MARGIN: usize = 10;

/// Group velocity at the band centre, in units of `J`.
pub const BAND_CENTER_VELOCITY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EmitterKind {
    TwoLevel,
    /// Bosonic mode with on-site repulsion `(U/2) n(n-1)`, truncated at
    /// `max_occ` quanta.
    Bosonic { u: f64, max_occ: usize },
}

impl EmitterKind {
    pub fn max_occupation(&self) -> usize {
        match self {
            EmitterKind::TwoLevel => 1,
            EmitterKind::Bosonic { max_occ, .. } => *max_occ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub site: usize,
    pub omega0: f64,
    pub g: f64,
    pub kind: EmitterKind,
    /// Rate of decay into modes other than the waveguide; enters as
    /// `-i(γ/2)` times the emitter occupation.
    pub gamma_loss: f64,
}

impl EmitterSpec {
    pub fn two_level(site: usize, omega0: f64, g: f64) -> Self {
        EmitterSpec {
            site,
            omega0,
            g,
            kind: EmitterKind::TwoLevel,
            gamma_loss: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Hard wall left of site 1 acting as the mirror; one emitter.
    SemiInfinite,
    /// Hard walls at both far ends, only as distant boundaries; one or two
    /// emitters.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// One qubit in front of a mirror.
    MirrorQubit,
    /// Two qubits on an open waveguide.
    TwoQubit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_sites: usize,
    pub hopping: f64,
    pub cavity_freq: f64,
    pub emitters: Vec<EmitterSpec>,
    pub boundary: Boundary,
    /// Permit `ω₀ ≠ ω_c`. Off band-centre the lattice supports bound states
    /// outside the band, so this is off unless explicitly requested.
    #[serde(default)]
    pub allow_detuned_emitters: bool,
}

/// Inclusive interval of sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteInterval {
    pub first: usize,
    pub last: usize,
}

impl SiteInterval {
    pub fn new(first: usize, last: usize) -> Self {
        SiteInterval { first, last }
    }

    pub fn empty() -> Self {
        SiteInterval { first: 1, last: 0 }
    }

    #[inline]
    pub fn contains(&self, site: usize) -> bool {
        site >= self.first && site <= self.last
    }

    pub fn len(&self) -> usize {
        if self.last >= self.first {
            self.last - self.first + 1
        } else {
            0
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> {
        self.first..=self.last
    }
}

impl ModelSpec {
    /// Mirror geometry with a resonant two-level emitter at site `d`.
    pub fn mirror_qubit(n_sites: usize, g: f64, d: usize) -> Result<Self> {
        let model = ModelSpec {
            n_sites,
            hopping: 1.0,
            cavity_freq: 0.0,
            emitters: vec![EmitterSpec::two_level(d, 0.0, g)],
            boundary: Boundary::SemiInfinite,
            allow_detuned_emitters: false,
        };
        model.validate()?;
        Ok(model)
    }

    /// Open waveguide with two resonant two-level emitters at `first` and
    /// `first + d`.
    pub fn two_qubits(n_sites: usize, g: f64, first: usize, d: usize) -> Result<Self> {
        let model = ModelSpec {
            n_sites,
            hopping: 1.0,
            cavity_freq: 0.0,
            emitters: vec![
                EmitterSpec::two_level(first, 0.0, g),
                EmitterSpec::two_level(first + d, 0.0, g),
            ],
            boundary: Boundary::Infinite,
            allow_detuned_emitters: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::Geometry("the lattice needs at least one site".into()));
        }
        if !(self.hopping > 0.0) {
            return Err(Error::Validity(format!(
                "hopping must be positive, got {}",
                self.hopping
            )));
        }
        match (self.boundary, self.emitters.len()) {
            (Boundary::SemiInfinite, 1) | (Boundary::Infinite, 1) | (Boundary::Infinite, 2) => {}
            (b, n) => {
                return Err(Error::Geometry(format!(
                    "{b:?} boundary does not support {n} emitters"
                )))
            }
        }
        for (i, e) in self.emitters.iter().enumerate() {
            if e.site < 1 || e.site > self.n_sites {
                return Err(Error::Geometry(format!(
                    "emitter {i} at site {} outside [1, {}]",
                    e.site, self.n_sites
                )));
            }
            if e.gamma_loss < 0.0 {
                return Err(Error::Validity(format!(
                    "emitter {i} has negative loss rate {}",
                    e.gamma_loss
                )));
            }
            if let EmitterKind::Bosonic { max_occ, .. } = e.kind {
                if max_occ == 0 {
                    return Err(Error::Validity(format!("emitter {i} has max_occ = 0")));
                }
            }
            if !self.allow_detuned_emitters && e.omega0 != self.cavity_freq {
                return Err(Error::Validity(format!(
                    "emitter {i} has ω₀ = {} but ω_c = {}; band-centre resonance is required",
                    e.omega0, self.cavity_freq
                )));
            }
        }
        if self.emitters.len() == 2 && self.emitters[0].site >= self.emitters[1].site {
            return Err(Error::Geometry(
                "emitter sites must be distinct and listed left to right".into(),
            ));
        }
        Ok(())
    }

    /// `ω_c − 2J cos k`.
    pub fn dispersion(&self, k: f64) -> f64 {
        self.cavity_freq - 2.0 * self.hopping * k.cos()
    }

    pub fn is_hermitian(&self) -> bool {
        self.emitters.iter().all(|e| e.gamma_loss == 0.0)
    }

    pub fn geometry(&self) -> Geometry {
        if self.emitters.len() == 2 {
            Geometry::TwoQubit
        } else {
            Geometry::MirrorQubit
        }
    }

    /// Decay rate `g²/J` of the first emitter.
    pub fn gamma(&self) -> f64 {
        let g = self.emitters[0].g;
        g * g / self.hopping
    }

    /// Mirror–emitter distance (mirror geometry) or emitter–emitter distance.
    pub fn separation(&self) -> usize {
        match self.boundary {
            Boundary::SemiInfinite => self.emitters[0].site,
            Boundary::Infinite if self.emitters.len() == 2 => {
                self.emitters[1].site - self.emitters[0].site
            }
            Boundary::Infinite => 0,
        }
    }

    /// Photon sites where the bound state lives. Emitter sites are outside.
    pub fn trapped_region(&self) -> SiteInterval {
        match (self.boundary, self.emitters.len()) {
            (Boundary::SemiInfinite, _) => SiteInterval::new(1, self.emitters[0].site - 1),
            (Boundary::Infinite, 2) => {
                SiteInterval::new(self.emitters[0].site + 1, self.emitters[1].site - 1)
            }
            _ => SiteInterval::empty(),
        }
    }

    /// Rightmost emitter site: photons arriving from the right meet it first.
    pub fn entry_site(&self) -> usize {
        self.emitters.iter().map(|e| e.site).max().unwrap_or(1)
    }

    pub fn param_map(&self) -> ParamMap {
        let gamma = self.gamma();
        let d = self.separation();
        let v = BAND_CENTER_VELOCITY * self.hopping;
        let tau = d as f64 / self.hopping;
        ParamMap {
            gamma,
            g: self.emitters[0].g,
            tau,
            v,
            k0: PI / 2.0,
            d,
            m: d / 2,
            gamma_tau: gamma * tau,
            gamma_tau_target: gamma * tau,
            gamma_over_4j: gamma / (4.0 * self.hopping),
        }
    }

    /// Same model with a different number of sites (emitters keep their
    /// positions).
    pub fn with_sites(&self, n_sites: usize) -> Result<Self> {
        let mut m = self.clone();
        m.n_sites = n_sites;
        m.validate()?;
        Ok(m)
    }

    pub fn with_loss(&self, gamma_loss: f64) -> Result<Self> {
        let mut m = self.clone();
        for e in &mut m.emitters {
            e.gamma_loss = gamma_loss;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn with_kind(&self, kind: EmitterKind) -> Result<Self> {
        let mut m = self.clone();
        for e in &mut m.emitters {
            e.kind = kind;
        }
        m.validate()?;
        Ok(m)
    }
}

/// Continuum-facing parameters of a lattice model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamMap {
    pub gamma: f64,
    pub g: f64,
    pub tau: f64,
    pub v: f64,
    pub k0: f64,
    pub d: usize,
    /// Resonance index, `k₀a = mπ`.
    pub m: usize,
    /// `Γτ` realised on the lattice.
    pub gamma_tau: f64,
    pub gamma_tau_target: f64,
    pub gamma_over_4j: f64,
}

/// Even separation closest to `gamma_tau / g²` (at least 2).
pub fn snap_separation(gamma_tau: f64, g_squared: f64) -> usize {
    let ideal = gamma_tau / g_squared;
    let d = 2.0 * (ideal / 2.0).round();
    (d as usize).max(2)
}

/// Build a lattice model from `Γτ` and `Γ/(4J)`.
///
/// The separation is snapped to the nearest even number of sites; the
/// returned [`ParamMap`] reports the realised `Γτ`. For two qubits the pair is
/// centred on the lattice.
pub fn from_delay_and_coupling(
    gamma_tau_target: f64,
    gamma_over_4j: f64,
    geometry: Geometry,
    n_sites: usize,
) -> Result<(ModelSpec, ParamMap)> {
    if !(gamma_over_4j > 0.0) {
        return Err(Error::Validity(format!(
            "Γ/(4J) must be positive, got {gamma_over_4j}"
        )));
    }
    if gamma_over_4j > MAX_GAMMA_OVER_4J {
        return Err(Error::Validity(format!(
            "Γ/(4J) = {gamma_over_4j} violates the weak-coupling bound Γ/(4J) ≤ {MAX_GAMMA_OVER_4J}"
        )));
    }
    if !(gamma_tau_target > 0.0) {
        return Err(Error::Validity(format!(
            "Γτ must be positive, got {gamma_tau_target}"
        )));
    }
    let g_squared = 4.0 * gamma_over_4j;
    let g = g_squared.sqrt();
    let d = snap_separation(gamma_tau_target, g_squared);
    let model = match geometry {
        Geometry::MirrorQubit => {
            if n_sites < d + HORIZON_MARGIN {
                return Err(Error::Geometry(format!(
                    "{n_sites} sites cannot hold an emitter at site {d} plus a {HORIZON_MARGIN}-site margin"
                )));
            }
            ModelSpec::mirror_qubit(n_sites, g, d)?
        }
        Geometry::TwoQubit => {
            if n_sites < d + 2 * HORIZON_MARGIN + 1 {
                return Err(Error::Geometry(format!(
                    "{n_sites} sites cannot hold two emitters {d} apart plus margins"
                )));
            }
            let first = (n_sites - d) / 2 + 1;
            ModelSpec::two_qubits(n_sites, g, first, d)?
        }
    };
    let mut map = model.param_map();
    map.gamma_tau_target = gamma_tau_target;
    Ok((model, map))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent scan over even separations.
    fn brute_force_d(target: f64, g2: f64) -> usize {
        (1..200)
            .map(|k| 2 * k)
            .min_by(|&a, &b| {
                let ea = (a as f64 * g2 - target).abs();
                let eb = (b as f64 * g2 - target).abs();
                ea.partial_cmp(&eb).unwrap()
            })
            .unwrap()
    }

    #[test]
    fn snaps_pi_to_ten_sites() {
        let (model, map) = from_delay_and_coupling(PI, 0.075, Geometry::MirrorQubit, 100).unwrap();
        assert!((map.g * map.g - 0.3).abs() < 1e-15);
        assert_eq!(map.d, 10);
        assert_eq!(brute_force_d(PI, 0.3), 10);
        assert!((map.gamma_tau - 3.0).abs() < 1e-12);
        assert_eq!(model.emitters[0].site, 10);
        assert_eq!(map.gamma_tau_target, PI);
    }

    #[test]
    fn on_grid_target_is_exact() {
        let (_, map) = from_delay_and_coupling(3.0, 0.075, Geometry::MirrorQubit, 100).unwrap();
        assert_eq!(map.d, 10);
        assert!((map.gamma_tau - 3.0).abs() < 1e-12);
    }

    #[test]
    fn strong_coupling_case() {
        let (_, map) = from_delay_and_coupling(5.0, 0.1, Geometry::MirrorQubit, 100).unwrap();
        assert_eq!(map.d, 12);
        assert_eq!(brute_force_d(5.0, 0.4), 12);
        assert!((map.gamma_tau - 4.8).abs() < 1e-12);
    }

    #[test]
    fn snapping_matches_scan() {
        for &g2 in &[0.1, 0.16, 0.248, 0.3, 0.4] {
            for i in 1..60 {
                let target = 0.37 * i as f64;
                let d = snap_separation(target, g2);
                let brute = brute_force_d(target, g2);
                let e1 = (d as f64 * g2 - target).abs();
                let e2 = (brute as f64 * g2 - target).abs();
                assert!((e1 - e2).abs() < 1e-12, "target {target} g2 {g2}: {d} vs {brute}");
            }
        }
    }

    #[test]
    fn rejects_strong_coupling() {
        let err = from_delay_and_coupling(3.0, 0.5, Geometry::MirrorQubit, 100).unwrap_err();
        assert!(matches!(err, Error::Validity(ref s) if s.contains("Γ/(4J) ≤ 0.1")));
    }

    #[test]
    fn rejects_small_lattice() {
        let err = from_delay_and_coupling(3.0, 0.075, Geometry::MirrorQubit, 12).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn param_round_trip() {
        for &(gt, c) in &[(1.2, 0.075), (3.0, 0.062), (0.3, 0.0375), (4.8, 0.1)] {
            let (model, map) = from_delay_and_coupling(gt, c, Geometry::MirrorQubit, 200).unwrap();
            let g = model.emitters[0].g;
            assert_eq!(map.gamma, g * g / model.hopping);
            assert_eq!(map.tau, map.d as f64 / model.hopping);
            assert_eq!(map.v, 2.0);
        }
    }

    #[test]
    fn dispersion_band() {
        let m = ModelSpec::mirror_qubit(20, 0.5, 10).unwrap();
        assert!((m.dispersion(PI / 2.0) - m.cavity_freq).abs() < 1e-15);
        assert_eq!(m.dispersion(0.0), m.cavity_freq - 2.0);
        assert_eq!(m.dispersion(PI), m.cavity_freq + 2.0);
    }

    #[test]
    fn validation_errors() {
        let mut m = ModelSpec::mirror_qubit(20, 0.5, 10).unwrap();
        m.emitters[0].site = 21;
        assert!(matches!(m.validate(), Err(Error::Geometry(_))));
        let mut m = ModelSpec::mirror_qubit(20, 0.5, 10).unwrap();
        m.emitters[0].omega0 = 0.3;
        assert!(matches!(m.validate(), Err(Error::Validity(_))));
        m.allow_detuned_emitters = true;
        assert!(m.validate().is_ok());
        let mut m = ModelSpec::two_qubits(40, 0.5, 10, 10).unwrap();
        m.boundary = Boundary::SemiInfinite;
        assert!(matches!(m.validate(), Err(Error::Geometry(_))));
        let mut m = ModelSpec::two_qubits(40, 0.5, 10, 10).unwrap();
        m.emitters[1].site = 10;
        assert!(m.validate().is_err());
    }

    #[test]
    fn regions() {
        let m = ModelSpec::mirror_qubit(20, 0.5, 10).unwrap();
        assert_eq!(m.trapped_region(), SiteInterval::new(1, 9));
        let m = ModelSpec::two_qubits(60, 0.5, 20, 10).unwrap();
        assert_eq!(m.trapped_region(), SiteInterval::new(21, 29));
        assert_eq!(m.separation(), 10);
        assert_eq!(m.entry_site(), 30);
    }
}
