//! Populations, trapping probabilities, field profiles, bound-state
//! projections and entanglement of sector states.
//!
//! The lattice carries one photon mode per site, so sums over propagation
//! direction collapse to single sums. A photon on an emitter site counts as
//! outside the trapped region.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{symmetrized_amplitude_view, SectorBasis};
use crate::bic::BicState;
use crate::error::{Error, Result};
use crate::model::{Geometry, ModelSpec, SiteInterval};
use crate::state::StateVector;

/// Below this `P_tr` the trapping identity is not tested.
pub const IDENTITY_NOISE_FLOOR: f64 = 1e-6;

/// Outgoing flux (per `1/Γ`) below which a run counts as settled.
pub const FLUX_THRESHOLD: f64 = 1e-6;

/// Averaging window for steady values, in units of `1/Γ`.
pub const STEADY_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub trapped: SiteInterval,
    /// Photons at or left of this site, plus emitter excitations, make up
    /// the inner excitation number used for the flux check.
    pub checkpoint: usize,
}

impl RegionSpec {
    pub fn for_model(model: &ModelSpec) -> Self {
        RegionSpec {
            trapped: model.trapped_region(),
            checkpoint: (model.entry_site() + 2).min(model.n_sites),
        }
    }

    pub fn is_outside(&self, site: usize) -> bool {
        !self.trapped.contains(site)
    }
}

/// One-pass measurement of a sector state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub p_e: f64,
    pub p_ph: f64,
    pub p_bb: f64,
    pub norm: f64,
    /// Mean excitation number inside the checkpoint.
    pub n_inner: f64,
}

impl Sample {
    pub fn p_tr(&self) -> f64 {
        self.p_e + self.p_ph + self.p_bb
    }

    pub fn scaled(&self, w: f64) -> Sample {
        Sample {
            p_e: w * self.p_e,
            p_ph: w * self.p_ph,
            p_bb: w * self.p_bb,
            norm: w * self.norm,
            n_inner: w * self.n_inner,
        }
    }

    pub fn add(&self, o: &Sample) -> Sample {
        Sample {
            p_e: self.p_e + o.p_e,
            p_ph: self.p_ph + o.p_ph,
            p_bb: self.p_bb + o.p_bb,
            norm: self.norm + o.norm,
            n_inner: self.n_inner + o.n_inner,
        }
    }
}

pub fn measure(psi: &StateVector, region: &RegionSpec) -> Sample {
    let mut s = Sample::default();
    for (c, a) in psi.basis().configs().iter().zip(psi.amps()) {
        let w = a.norm_sqr();
        if w == 0.0 {
            continue;
        }
        s.norm += w;
        let occ = c.total_emitter_occ();
        if c.emitter_occ.iter().any(|&n| n >= 2) {
            s.p_bb += w;
        } else if occ >= 1 {
            s.p_e += w;
        } else if c.photons.iter().filter(|&&x| region.trapped.contains(x as usize)).count() == 1 {
            s.p_ph += w;
        }
        let inner = c.photons.iter().filter(|&&x| (x as usize) <= region.checkpoint).count();
        s.n_inner += w * (inner + occ) as f64;
    }
    s
}

/// Probability that an emitter is singly excited (and none is doubly
/// occupied). For two qubits this includes both excited.
pub fn qubit_population(psi: &StateVector) -> f64 {
    psi.basis()
        .configs()
        .iter()
        .zip(psi.amps())
        .filter(|(c, _)| c.total_emitter_occ() >= 1 && c.emitter_occ.iter().all(|&n| n <= 1))
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Probability that some bosonic emitter holds two or more excitations.
pub fn double_occupancy(psi: &StateVector) -> f64 {
    psi.basis()
        .configs()
        .iter()
        .zip(psi.amps())
        .filter(|(c, _)| c.emitter_occ.iter().any(|&n| n >= 2))
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Probability that the emitters are unexcited and exactly one photon sits
/// in the trapped region.
pub fn trapped_photon_prob(psi: &StateVector, region: &RegionSpec) -> f64 {
    measure(psi, region).p_ph
}

/// Probability that the emitters are unexcited and every photon is in the
/// trapped region.
pub fn all_trapped_prob(psi: &StateVector, region: &RegionSpec) -> f64 {
    psi.basis()
        .configs()
        .iter()
        .zip(psi.amps())
        .filter(|(c, _)| {
            c.total_emitter_occ() == 0
                && !c.photons.is_empty()
                && c.photons.iter().all(|&x| region.trapped.contains(x as usize))
        })
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// `⟨a†_x a_x⟩` for every site, index `x − 1`.
pub fn field_intensity(psi: &StateVector) -> Vec<f64> {
    let mut n = vec![0.0; psi.basis().n_sites()];
    for (c, a) in psi.basis().configs().iter().zip(psi.amps()) {
        let w = a.norm_sqr();
        for &x in &c.photons {
            n[x as usize - 1] += w;
        }
    }
    n
}

/// `|χ(x, y)|²` over the full grid, row-major with 1-based `(x, y)` at
/// `(x − 1) n + (y − 1)`.
pub fn two_photon_density(psi: &StateVector) -> Result<Vec<f64>> {
    Ok(symmetrized_amplitude_view(psi)?.density())
}

/// Weight of the channel {one photon outside the trapped region} ⊗ bound
/// state, `Σ_{x outside} |⟨φ_b| a_x |ψ⟩|²`.
pub fn bic_projection(psi: &StateVector, bic: &BicState, model: &ModelSpec) -> Result<f64> {
    let xi = bic_channel_amplitudes(psi, bic, model)?;
    Ok(xi
        .iter()
        .enumerate()
        .filter(|(i, _)| !bic.region.contains(i + 1))
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// `ξ(x) = ⟨φ_b| a_x |ψ⟩` for every site (index `x − 1`).
pub fn bic_channel_amplitudes(psi: &StateVector, bic: &BicState, model: &ModelSpec) -> Result<Vec<Complex64>> {
    if !psi.basis().matches_model(model) {
        return Err(Error::Consistency("state does not belong to the bound state's model".into()));
    }
    if psi.n_exc() != 2 {
        return Err(Error::Consistency(format!(
            "bound-state projection needs the 2-excitation sector, got {}",
            psi.n_exc()
        )));
    }
    let b1 = SectorBasis::shared(model, 1)?;
    let phi = bic.to_state(&b1)?;
    psi.photon_channel_amplitudes(&phi)
}

/// Outcome of comparing `P_tr(∞)` with `P_e(∞)/|ε_b|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub residual: f64,
    pub predicted_p_tr: f64,
    pub inconclusive: bool,
}

/// `|P_tr − P_e/|ε_b|²| / P_tr`, with `|ε_b|² = 1/(1 + Γτ/2)` for one qubit
/// and `1/(1 + Γτ/4)` for two.
pub fn check_trapping_identity(p_tr: f64, p_e: f64, gamma_tau: f64, geometry: Geometry) -> IdentityCheck {
    let eps_sq = match geometry {
        Geometry::MirrorQubit => 1.0 / (1.0 + gamma_tau / 2.0),
        Geometry::TwoQubit => 1.0 / (1.0 + gamma_tau / 4.0),
    };
    let predicted = p_e / eps_sq;
    if p_tr == 0.0 && p_e == 0.0 {
        return IdentityCheck {
            residual: 0.0,
            predicted_p_tr: 0.0,
            inconclusive: false,
        };
    }
    if p_tr < IDENTITY_NOISE_FLOOR {
        return IdentityCheck {
            residual: f64::NAN,
            predicted_p_tr: predicted,
            inconclusive: true,
        };
    }
    IdentityCheck {
        residual: (p_tr - predicted).abs() / p_tr,
        predicted_p_tr: predicted,
        inconclusive: false,
    }
}

/// Reduced two-qubit density matrix in the basis `|gg⟩, |ge⟩, |eg⟩, |ee⟩`
/// (first label is the left emitter).
pub fn reduced_qubit_matrix(psi: &StateVector) -> Result<[[Complex64; 4]; 4]> {
    let basis = psi.basis();
    if basis.emitter_sites().len() != 2 {
        return Err(Error::Unsupported("concurrence needs a two-emitter model".into()));
    }
    if basis.max_occupations().iter().any(|&m| m != 1) {
        return Err(Error::Unsupported("concurrence needs two-level emitters".into()));
    }
    // group amplitudes by photon configuration, then trace the photons out
    let mut by_photons: std::collections::HashMap<&[u32], [Complex64; 4]> = std::collections::HashMap::new();
    for (c, a) in basis.configs().iter().zip(psi.amps()) {
        if *a == Complex64::new(0.0, 0.0) {
            continue;
        }
        let q = 2 * c.emitter_occ[0] as usize + c.emitter_occ[1] as usize;
        by_photons.entry(c.photons.as_slice()).or_default()[q] = *a;
    }
    let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
    for v in by_photons.values() {
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] += v[i] * v[j].conj();
            }
        }
    }
    Ok(rho)
}

/// Wootters concurrence of the emitters' reduced state.
///
/// In a fixed-excitation sector with at most two excitations the reduced
/// state is an X state whose only coherence is between `|eg⟩` and `|ge⟩`,
/// so `C = 2 max(0, |ρ_{eg,ge}| − √(ρ_{gg,gg} ρ_{ee,ee}))`.
pub fn concurrence(psi: &StateVector) -> Result<f64> {
    if psi.n_exc() > 2 {
        return Err(Error::Unsupported("concurrence is defined for sectors with N ≤ 2".into()));
    }
    let rho = reduced_qubit_matrix(psi)?;
    let c = 2.0 * (rho[2][1].norm() - (rho[0][0].re * rho[3][3].re).max(0.0).sqrt());
    Ok(c.clamp(0.0, 1.0))
}

/// Atomic coherence `C₁₂ = Σ_x ψ*₁(x) ψ₂(x)` between "left excited" and
/// "right excited" amplitudes sharing a photon configuration.
pub fn atomic_coherence(psi: &StateVector) -> Result<Complex64> {
    Ok(reduced_qubit_matrix(psi)?[1][2])
}

/// Least-squares fit `n(x) ≈ A sin²(π (x − node)/2)` over `region`.
/// Returns `(A, R²)`.
pub fn sin2_fit(intensity: &[f64], region: SiteInterval, node: usize) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = region
        .sites()
        .map(|x| {
            let s = (std::f64::consts::FRAC_PI_2 * (x as f64 - node as f64)).sin();
            (s * s, intensity[x - 1])
        })
        .collect();
    let sxx: f64 = pts.iter().map(|(s, _)| s * s).sum();
    let sxy: f64 = pts.iter().map(|(s, y)| s * y).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mean = pts.iter().map(|(_, y)| y).sum::<f64>() / pts.len().max(1) as f64;
    let ss_tot: f64 = pts.iter().map(|(_, y)| (y - mean).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|(s, y)| (y - a * s).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    (a, r2)
}

/// Time series of sampled observables; `t` in units of `1/Γ`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub t: Vec<f64>,
    pub p_e: Vec<f64>,
    pub p_ph: Vec<f64>,
    pub p_tr: Vec<f64>,
    pub norm: Vec<f64>,
    pub n_inner: Vec<f64>,
    pub concurrence: Option<Vec<f64>>,
    pub p_bb: Option<Vec<f64>>,
}

impl ObservableSeries {
    pub fn new(with_concurrence: bool, with_double_occupancy: bool) -> Self {
        ObservableSeries {
            concurrence: with_concurrence.then(Vec::new),
            p_bb: with_double_occupancy.then(Vec::new),
            ..Default::default()
        }
    }

    pub fn push(&mut self, t: f64, s: &Sample, c: Option<f64>) {
        self.t.push(t);
        self.p_e.push(s.p_e);
        self.p_ph.push(s.p_ph);
        self.p_tr.push(s.p_tr());
        self.norm.push(s.norm);
        self.n_inner.push(s.n_inner);
        if let Some(cs) = &mut self.concurrence {
            cs.push(c.unwrap_or(0.0));
        }
        if let Some(bb) = &mut self.p_bb {
            bb.push(s.p_bb);
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Largest `|‖ψ(t)‖² − ‖ψ(0)‖²|`.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.norm.first().copied().unwrap_or(0.0);
        self.norm.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max)
    }

    fn window(&self, t_from: f64, t_to: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.t.len()).filter(move |&i| self.t[i] >= t_from - 1e-12 && self.t[i] <= t_to + 1e-12)
    }

    fn mean(&self, v: &[f64], t_from: f64, t_to: f64) -> f64 {
        let idx: Vec<usize> = self.window(t_from, t_to).collect();
        idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len().max(1) as f64
    }

    /// Largest `|dN_inner/dt|` over a window, per `1/Γ`.
    pub fn max_flux(&self, t_from: f64, t_to: f64) -> f64 {
        let idx: Vec<usize> = self.window(t_from, t_to).collect();
        idx.windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                ((self.n_inner[b] - self.n_inner[a]) / (self.t[b] - self.t[a])).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Means over the final `window` (units of `1/Γ`) and the flux check.
    pub fn steady_state(&self, window: f64) -> SteadyValues {
        let t_end = self.t.last().copied().unwrap_or(0.0);
        self.steady_state_at(t_end - window, t_end)
    }

    pub fn steady_state_at(&self, t_from: f64, t_to: f64) -> SteadyValues {
        let flux = self.max_flux(t_from, t_to);
        SteadyValues {
            p_e: self.mean(&self.p_e, t_from, t_to),
            p_ph: self.mean(&self.p_ph, t_from, t_to),
            p_tr: self.mean(&self.p_tr, t_from, t_to),
            p_bb: self.p_bb.as_ref().map(|v| self.mean(v, t_from, t_to)),
            concurrence: self.concurrence.as_ref().map(|v| self.mean(v, t_from, t_to)),
            window: (t_from, t_to),
            max_flux: flux,
            settled: flux < FLUX_THRESHOLD,
        }
    }

    /// Weighted sum of series sampled at identical times.
    pub fn weighted_sum(parts: &[(f64, &ObservableSeries)]) -> Result<ObservableSeries> {
        let Some((_, first)) = parts.first() else {
            return Ok(ObservableSeries::default());
        };
        let mut out = ObservableSeries::new(false, first.p_bb.is_some());
        out.t = first.t.clone();
        let n = out.t.len();
        out.p_e = vec![0.0; n];
        out.p_ph = vec![0.0; n];
        out.p_tr = vec![0.0; n];
        out.norm = vec![0.0; n];
        out.n_inner = vec![0.0; n];
        if let Some(bb) = &mut out.p_bb {
            *bb = vec![0.0; n];
        }
        for (w, s) in parts {
            if s.t != out.t {
                return Err(Error::Consistency("sector series sampled at different times".into()));
            }
            for i in 0..n {
                out.p_e[i] += w * s.p_e[i];
                out.p_ph[i] += w * s.p_ph[i];
                out.p_tr[i] += w * s.p_tr[i];
                out.norm[i] += w * s.norm[i];
                out.n_inner[i] += w * s.n_inner[i];
                if let (Some(o), Some(v)) = (&mut out.p_bb, &s.p_bb) {
                    o[i] += w * v[i];
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyValues {
    pub p_e: f64,
    pub p_ph: f64,
    pub p_tr: f64,
    pub p_bb: Option<f64>,
    pub concurrence: Option<f64>,
    pub window: (f64, f64),
    pub max_flux: f64,
    pub settled: bool,
}

/// Least-squares slope of `ln y` over `[t_from, t_to]`, returned as a decay
/// rate together with the number of points used. `None` if fewer than
/// three positive samples fall in the window.
pub fn fit_log_decay(t: &[f64], y: &[f64], t_from: f64, t_to: f64) -> Option<(f64, usize)> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(&ti, &yi)| ti >= t_from && ti <= t_to && yi > 0.0)
        .map(|(&ti, &yi)| (ti, yi.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some((-sxy / sxx, pts.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisConfig;
    use crate::bic::{single_qubit_bic, two_qubit_bic};
    use nalgebra::Matrix4;

    const Z: Complex64 = Complex64::new(0.0, 0.0);
    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn mirror() -> ModelSpec {
        ModelSpec::mirror_qubit(30, 0.3f64.sqrt(), 10).unwrap()
    }

    #[test]
    fn populations_of_simple_states() {
        let m = mirror();
        let region = RegionSpec::for_model(&m);
        let b1 = SectorBasis::shared(&m, 1).unwrap();
        let e = StateVector::basis_state(b1.clone(), b1.index_of(&BasisConfig::new(&[1], &[])).unwrap());
        assert_eq!(qubit_population(&e), 1.0);
        let b2 = SectorBasis::shared(&m, 2).unwrap();
        let out = StateVector::basis_state(b2.clone(), b2.index_of(&BasisConfig::new(&[0], &[12, 20])).unwrap());
        assert_eq!(qubit_population(&out), 0.0);
        assert_eq!(trapped_photon_prob(&out, &region), 0.0);
        let split = StateVector::basis_state(b2.clone(), b2.index_of(&BasisConfig::new(&[0], &[3, 20])).unwrap());
        assert_eq!(trapped_photon_prob(&split, &region), 1.0);
        // the emitter site itself is outside
        let at_emitter = StateVector::basis_state(b2.clone(), b2.index_of(&BasisConfig::new(&[0], &[3, 10])).unwrap());
        assert_eq!(trapped_photon_prob(&at_emitter, &region), 1.0);
        let both = StateVector::basis_state(b2.clone(), b2.index_of(&BasisConfig::new(&[0], &[3, 5])).unwrap());
        assert_eq!(trapped_photon_prob(&both, &region), 0.0);
        assert_eq!(all_trapped_prob(&both, &region), 1.0);
        let s = measure(&split, &region);
        assert_eq!((s.p_tr(), s.norm), (1.0, 1.0));
    }

    #[test]
    fn intensity_sums_to_photon_number() {
        let m = mirror();
        let b2 = SectorBasis::shared(&m, 2).unwrap();
        let mut psi = StateVector::zeros(b2.clone());
        psi.amps_mut()[b2.index_of(&BasisConfig::new(&[0], &[7, 7])).unwrap()] = Complex64::new(0.6, 0.0);
        psi.amps_mut()[b2.index_of(&BasisConfig::new(&[1], &[7])).unwrap()] = Complex64::new(0.0, 0.8);
        let n = field_intensity(&psi);
        assert!((n[6] - (2.0 * 0.36 + 0.64)).abs() < 1e-15);
        assert!((n.iter().sum::<f64>() - (2.0 * 0.36 + 0.64)).abs() < 1e-15);
        let dens = two_photon_density(&psi).unwrap();
        assert!((dens.iter().sum::<f64>() - 0.36).abs() < 1e-15);
    }

    #[test]
    fn bic_profile_is_exact_sinusoid() {
        let m = mirror();
        let bic = single_qubit_bic(&m).unwrap();
        let psi = bic.to_state(&SectorBasis::shared(&m, 1).unwrap()).unwrap();
        let n = field_intensity(&psi);
        let (a, r2) = sin2_fit(&n, m.trapped_region(), 0);
        assert!((r2 - 1.0).abs() < 1e-14);
        assert!((a - 0.6 / 5.0).abs() < 1e-14);
    }

    #[test]
    fn bic_channel_projection() {
        let m = mirror();
        let bic = single_qubit_bic(&m).unwrap();
        let b1 = SectorBasis::shared(&m, 1).unwrap();
        let b2 = SectorBasis::shared(&m, 2).unwrap();
        let phi = bic.to_state(&b1).unwrap();
        let mut xi = vec![Z; 30];
        xi[14] = Complex64::new(0.6, 0.0);
        xi[22] = Complex64::new(0.0, -0.8);
        let psi = phi.apply_creation(&xi, &b2).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-14);
        assert!((bic_projection(&psi, &bic, &m).unwrap() - 1.0).abs() < 1e-14);

        let out = StateVector::basis_state(b2.clone(), b2.index_of(&BasisConfig::new(&[0], &[15, 22])).unwrap());
        assert!(bic_projection(&out, &bic, &m).unwrap() < 1e-30);
    }

    #[test]
    fn identity_check() {
        let c = check_trapping_identity(0.5, 0.2, 3.0, Geometry::MirrorQubit);
        assert!(c.residual.abs() < 1e-15 && !c.inconclusive);
        let c = check_trapping_identity(0.35, 0.2, 3.0, Geometry::TwoQubit);
        assert!(c.residual.abs() < 1e-14);
        assert_eq!(check_trapping_identity(0.0, 0.0, 3.0, Geometry::MirrorQubit).residual, 0.0);
        assert!(check_trapping_identity(1e-8, 1e-9, 3.0, Geometry::MirrorQubit).inconclusive);
    }

    /// General Wootters concurrence of a 4×4 density matrix.
    fn wootters(rho: &[[Complex64; 4]; 4]) -> f64 {
        let r = Matrix4::from_fn(|i, j| rho[i][j]);
        let yy = Matrix4::from_fn(|i, j| if i + j == 3 { if i == 0 || i == 3 { -ONE } else { ONE } } else { Z });
        let tilde = yy * r.conjugate() * yy;
        let e = r.symmetric_eigen();
        let sqrt_r = e.eigenvectors * Matrix4::from_diagonal(&e.eigenvalues.map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0))) * e.eigenvectors.adjoint();
        let m = sqrt_r * tilde * sqrt_r;
        let mut l: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
        l.sort_by(|a, b| b.partial_cmp(a).unwrap());
        (l[0] - l[1] - l[2] - l[3]).max(0.0)
    }

    #[test]
    fn concurrence_cases() {
        let g = 0.3f64.sqrt();
        let m = ModelSpec::two_qubits(30, g, 10, 10).unwrap();
        let b1 = SectorBasis::shared(&m, 1).unwrap();
        let mut bell = StateVector::zeros(b1.clone());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        bell.amps_mut()[b1.index_of(&BasisConfig::new(&[1, 0], &[])).unwrap()] = Complex64::new(s, 0.0);
        bell.amps_mut()[b1.index_of(&BasisConfig::new(&[0, 1], &[])).unwrap()] = Complex64::new(s, 0.0);
        assert!((concurrence(&bell).unwrap() - 1.0).abs() < 1e-15);

        let b2 = SectorBasis::shared(&m, 2).unwrap();
        let local = StateVector::basis_state(b2.clone(), b2.index_of(&BasisConfig::new(&[1, 0], &[25])).unwrap());
        assert_eq!(concurrence(&local).unwrap(), 0.0);

        let single = mirror();
        let e = StateVector::basis_state(SectorBasis::shared(&single, 1).unwrap(), 0);
        assert!(concurrence(&e).is_err());
    }

    #[test]
    fn concurrence_matches_general_wootters() {
        use rand::{Rng, SeedableRng};
        let m = ModelSpec::two_qubits(8, 0.5, 3, 2).unwrap();
        let b2 = SectorBasis::shared(&m, 2).unwrap();
        let bic = two_qubit_bic(&m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..30 {
            let mut psi = StateVector::zeros(b2.clone());
            for (c, a) in b2.configs().iter().zip(psi.amps_mut()) {
                // vary how much weight sits in |ee⟩ and |gg⟩
                let w = match c.total_emitter_occ() {
                    2 => 0.2 * (trial % 4) as f64,
                    1 => 1.0,
                    _ => 0.05 * (trial % 3) as f64,
                };
                *a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w;
            }
            psi.normalize();
            let rho = reduced_qubit_matrix(&psi).unwrap();
            let want = wootters(&rho);
            assert!((concurrence(&psi).unwrap() - want).abs() < 1e-10, "{trial}");
        }
        let phi = bic.to_state(&SectorBasis::shared(&m, 1).unwrap()).unwrap();
        let rho = reduced_qubit_matrix(&phi).unwrap();
        assert!((concurrence(&phi).unwrap() - wootters(&rho)).abs() < 1e-12);
    }

    #[test]
    fn steady_state_and_flux() {
        let mut s = ObservableSeries::new(false, false);
        for k in 0..=100 {
            let t = k as f64;
            let v = 0.3 + (-t).exp();
            let sample = Sample { p_e: v, p_ph: 0.0, p_bb: 0.0, norm: 1.0, n_inner: v };
            s.push(t, &sample, None);
        }
        let st = s.steady_state(10.0);
        assert!((st.p_e - 0.3).abs() < 1e-12);
        assert!(st.settled);
        let early = s.steady_state_at(0.0, 10.0);
        assert!(!early.settled);
    }

    #[test]
    fn log_fit() {
        let t: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.4 * (-0.04 * t).exp()).collect();
        let (rate, n) = fit_log_decay(&t, &y, 25.0, 49.0).unwrap();
        assert_eq!(n, 25);
        assert!((rate - 0.04).abs() < 1e-12);
        assert!(fit_log_decay(&t, &y, 60.0, 70.0).is_none());
    }
}
