//! Initial states: single-photon packets, symmetrized photon pairs, truncated
//! coherent states, custom two-photon grids and time reversal.
//!
//! Packets start to the right of the rightmost emitter and travel left.
//! Lattice amplitudes vanish on and left of that site at `t = 0`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{grid_to_state, SectorBasis, TwoPhotonGrid};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::state::StateVector;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest weight a packet may lose to the far lattice edge.
pub const CLIP_TOLERANCE: f64 = 1e-6;

/// Narrowest Gaussian the lattice resolves, in sites.
pub const MIN_GAUSSIAN_WIDTH: f64 = 2.0;

/// Coherent-state truncation deficit above which a warning is emitted.
pub const COHERENT_DEFICIT_WARNING: f64 = 0.2;

/// Lengths in sites, wavevectors per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PacketShape {
    /// `e^{−Δk (x−a) − i k₀ (x−a)}` for `x > a = front_site`.
    ExponentialFront { dk: f64, k0: f64, front_site: usize },
    /// `e^{−(x−x₀)²/(2Δx²) − i k₀ (x−x₀)}`.
    Gaussian { dx: f64, x0: f64, k0: f64 },
    /// Site amplitudes `amplitudes[x − 1]`.
    Custom { amplitudes: Vec<Complex64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    TowardEmitter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    pub shape: PacketShape,
    pub direction: Direction,
}

impl WavepacketSpec {
    pub fn new(shape: PacketShape) -> Self {
        WavepacketSpec {
            shape,
            direction: Direction::TowardEmitter,
        }
    }

    /// Exponential front at the entry emitter with `Δk` in units of `Γ/v`
    /// and carrier detuned by `δ` (units of `Γ`) from band centre.
    pub fn exponential(model: &ModelSpec, dk_over_gamma_v: f64, detuning_over_gamma: f64) -> Self {
        let p = model.param_map();
        WavepacketSpec::new(PacketShape::ExponentialFront {
            dk: dk_over_gamma_v * p.gamma / p.v,
            k0: FRAC_PI_2 + detuning_over_gamma * p.gamma / p.v,
            front_site: model.entry_site(),
        })
    }

    /// Gaussian of width `Δx` (units of `v/Γ`) centred `offset` widths
    /// beyond the entry emitter.
    pub fn gaussian(model: &ModelSpec, dx_over_v_gamma: f64, offset: f64) -> Self {
        let p = model.param_map();
        let dx = dx_over_v_gamma * p.v / p.gamma;
        WavepacketSpec::new(PacketShape::Gaussian {
            dx,
            x0: model.entry_site() as f64 + offset * dx,
            k0: FRAC_PI_2,
        })
    }

    /// Farthest site with appreciable weight, for lattice sizing.
    pub fn far_extent(&self) -> f64 {
        match &self.shape {
            PacketShape::ExponentialFront { dk, front_site, .. } => {
                *front_site as f64 + (-CLIP_TOLERANCE.ln()) / (2.0 * dk)
            }
            PacketShape::Gaussian { dx, x0, .. } => x0 + dx * (-2.0 * CLIP_TOLERANCE.ln()).sqrt() * 1.1,
            PacketShape::Custom { amplitudes } => amplitudes
                .iter()
                .rposition(|a| *a != ZERO)
                .map(|i| (i + 1) as f64)
                .unwrap_or(0.0),
        }
    }
}

/// Normalized site amplitudes `φ(x)` (index `x − 1`) of a packet on `model`.
pub fn mode_amplitudes(spec: &WavepacketSpec, model: &ModelSpec) -> Result<Vec<Complex64>> {
    let n = model.n_sites;
    let entry = model.entry_site();
    let mut mode = vec![ZERO; n];
    let clipped;
    match &spec.shape {
        PacketShape::ExponentialFront { dk, k0, front_site } => {
            if !(*dk > 0.0) {
                return Err(Error::Validity(format!("Δk must be positive, got {dk}")));
            }
            if *front_site < entry {
                return Err(Error::Geometry(format!(
                    "front at site {front_site} overlaps the emitter region ending at {entry}"
                )));
            }
            for x in front_site + 1..=n {
                let r = (x - front_site) as f64;
                mode[x - 1] = Complex64::from_polar((-dk * r).exp(), -k0 * r);
            }
            // geometric tail beyond the lattice, relative to the full packet
            clipped = (-2.0 * dk * (n - front_site) as f64).exp();
        }
        PacketShape::Gaussian { dx, x0, k0 } => {
            if !(*dx >= MIN_GAUSSIAN_WIDTH) {
                return Err(Error::Validity(format!(
                    "Gaussian width Δx = {dx} sites is below the {MIN_GAUSSIAN_WIDTH}-site floor"
                )));
            }
            let amp = |x: f64| (-(x - x0).powi(2) / (2.0 * dx * dx)).exp();
            let reach = (x0 + 12.0 * dx).ceil() as usize;
            let total: f64 = (entry + 1..=reach.max(n)).map(|x| amp(x as f64).powi(2)).sum::<f64>()
                + (1..=entry).map(|x| amp(x as f64).powi(2)).sum::<f64>();
            let mut kept = 0.0;
            for x in entry + 1..=n {
                let a = amp(x as f64);
                kept += a * a;
                mode[x - 1] = Complex64::from_polar(a, -k0 * (x as f64 - x0));
            }
            clipped = 1.0 - kept / total;
        }
        PacketShape::Custom { amplitudes } => {
            if amplitudes.len() > n {
                let lost: f64 = amplitudes[n..].iter().map(|a| a.norm_sqr()).sum();
                let all: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
                if lost > CLIP_TOLERANCE * all {
                    return Err(Error::Geometry(format!(
                        "custom packet has weight {lost:e} beyond the {n}-site lattice"
                    )));
                }
            }
            for (m, a) in mode.iter_mut().zip(amplitudes) {
                *m = *a;
            }
            clipped = 0.0;
        }
    }
    if clipped > CLIP_TOLERANCE {
        return Err(Error::Geometry(format!(
            "packet loses weight {clipped:.3e} outside the {n}-site lattice (limit {CLIP_TOLERANCE:e})"
        )));
    }
    let norm = mode.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Geometry("packet has no weight on the lattice".into()));
    }
    for a in &mut mode {
        *a /= norm;
    }
    Ok(mode)
}

fn vacuum(model: &ModelSpec) -> Result<StateVector> {
    let b0 = SectorBasis::shared(model, 0)?;
    Ok(StateVector::basis_state(b0, 0))
}

/// `a†(φ)|g, 0⟩`.
pub fn single_photon(spec: &WavepacketSpec, model: &ModelSpec) -> Result<StateVector> {
    let mode = mode_amplitudes(spec, model)?;
    vacuum(model)?.apply_creation(&mode, &SectorBasis::shared(model, 1)?)
}

/// Symmetrization constant `A = 1/√(2(1 + |⟨φ₁|φ₂⟩|²))` for normalized modes.
pub fn product_constant(phi1: &[Complex64], phi2: &[Complex64]) -> f64 {
    let s: Complex64 = phi1.iter().zip(phi2).map(|(a, b)| a.conj() * b).sum();
    1.0 / (2.0 * (1.0 + s.norm_sqr())).sqrt()
}

/// Symmetrized product `A [φ₁(x)φ₂(y) + φ₂(x)φ₁(y)]` of two packets with
/// the emitter unexcited, normalized.
pub fn two_photon_product(spec1: &WavepacketSpec, spec2: &WavepacketSpec, model: &ModelSpec) -> Result<StateVector> {
    let phi1 = mode_amplitudes(spec1, model)?;
    let phi2 = mode_amplitudes(spec2, model)?;
    two_photon_from_modes(&phi1, &phi2, model)
}

pub fn two_photon_from_modes(phi1: &[Complex64], phi2: &[Complex64], model: &ModelSpec) -> Result<StateVector> {
    let b1 = SectorBasis::shared(model, 1)?;
    let b2 = SectorBasis::shared(model, 2)?;
    let one = vacuum(model)?.apply_creation(phi2, &b1)?;
    let mut two = one.apply_creation(phi1, &b2)?;
    // a†₁a†₂|0⟩ has norm² 1 + |⟨φ₁|φ₂⟩|² = 1/(2A²)
    let a = product_constant(phi1, phi2);
    two.scale(Complex64::new(std::f64::consts::SQRT_2 * a, 0.0));
    Ok(two)
}

/// Two-photon state from a symmetric grid, renormalized. Returns the state
/// and the grid's original norm.
pub fn two_photon_from_grid(grid: &TwoPhotonGrid, model: &ModelSpec) -> Result<(StateVector, f64)> {
    if !grid.is_symmetric() {
        return Err(Error::Validity("two-photon grid is not symmetric".into()));
    }
    let mut psi = grid_to_state(grid, &SectorBasis::shared(model, 2)?)?;
    let norm = psi.normalize();
    if !(norm > 0.0) {
        return Err(Error::Validity("two-photon grid is empty".into()));
    }
    Ok((psi, norm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentSpec {
    pub alpha: Complex64,
    pub shape: WavepacketSpec,
    pub n_max: usize,
}

/// Fock-sector decomposition `Σ_n c_n |n_φ⟩` of a truncated coherent state.
#[derive(Debug, Clone)]
pub struct CoherentState {
    /// Normalized `(a†_φ)ⁿ/√n! |g, 0⟩` for `n = 0..=n_max`.
    pub sectors: Vec<StateVector>,
    /// `c_n = e^{−|α|²/2} αⁿ/√n!`.
    pub amplitudes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub deficit: f64,
    pub warnings: Vec<String>,
}

/// Poisson weights `e^{−n̄} n̄ⁿ/n!` up to `n_max` and the missing tail.
pub fn poisson_weights(mean: f64, n_max: usize) -> (Vec<f64>, f64) {
    let mut w = Vec::with_capacity(n_max + 1);
    let mut term = (-mean).exp();
    for n in 0..=n_max {
        if n > 0 {
            term *= mean / n as f64;
        }
        w.push(term);
    }
    let deficit = 1.0 - w.iter().sum::<f64>();
    (w, deficit.max(0.0))
}

pub fn coherent_truncated(spec: &CoherentSpec, model: &ModelSpec) -> Result<CoherentState> {
    if spec.n_max > crate::basis::MAX_EXCITATIONS {
        return Err(Error::Unsupported(format!(
            "coherent states are truncated at n ≤ {}, got n_max = {}",
            crate::basis::MAX_EXCITATIONS,
            spec.n_max
        )));
    }
    let mean = spec.alpha.norm_sqr();
    let (weights, deficit) = poisson_weights(mean, spec.n_max);
    let mut amplitudes = Vec::with_capacity(spec.n_max + 1);
    let mut c = Complex64::new((-mean / 2.0).exp(), 0.0);
    for n in 0..=spec.n_max {
        if n > 0 {
            c *= spec.alpha / (n as f64).sqrt();
        }
        amplitudes.push(c);
    }
    let mut warnings = Vec::new();
    if deficit > COHERENT_DEFICIT_WARNING {
        let msg = format!(
            "|α|² = {mean} leaves {:.1}% of the coherent state beyond n = {}",
            100.0 * deficit,
            spec.n_max
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let mode = mode_amplitudes(&spec.shape, model)?;
    let mut sectors = vec![vacuum(model)?];
    for n in 1..=spec.n_max {
        let next = SectorBasis::shared(model, n)?;
        let mut s = sectors[n - 1].apply_creation(&mode, &next)?;
        s.scale(Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
        sectors.push(s);
    }
    Ok(CoherentState {
        sectors,
        amplitudes,
        weights,
        deficit,
        warnings,
    })
}

/// Complex conjugation in the site basis, optionally renormalized. Valid
/// only for the real-symmetric (lossless) Hamiltonian.
pub fn time_reverse(state: &StateVector, model: &ModelSpec, renormalize: bool) -> Result<StateVector> {
    if !model.is_hermitian() {
        return Err(Error::TimeReversal(
            "the lossy Hamiltonian is not invariant under conjugation".into(),
        ));
    }
    if !state.basis().matches_model(model) {
        return Err(Error::Consistency("state belongs to a different model".into()));
    }
    let mut out = state.conj();
    if renormalize {
        out.normalize();
    }
    Ok(out)
}

/// Single-photon mode from the photon amplitudes of a 1-excitation state.
pub fn mode_from_state(state: &StateVector) -> Result<Vec<Complex64>> {
    if state.n_exc() != 1 {
        return Err(Error::Consistency("mode extraction needs the 1-excitation sector".into()));
    }
    let mut mode = vec![ZERO; state.basis().n_sites()];
    for (c, a) in state.basis().configs().iter().zip(state.amps()) {
        if let Some(&x) = c.photons.first() {
            mode[x as usize - 1] = *a;
        }
    }
    Ok(mode)
}
