//! Exact lattice bound states in the continuum at band centre.
//!
//! Between a node (mirror wall or emitter site) and an emitter an even
//! number of sites apart, the standing wave `sin(π x / 2)` has zero energy
//! and vanishes on every emitter site, so it couples to the emitters only
//! through the hopping into the last trapped site. Balancing that hopping
//! against `g ε` fixes the emitter amplitude.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisConfig, SectorBasis};
use crate::error::{Error, Result};
use crate::model::{Boundary, ModelSpec, SiteInterval};
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BicGeometry {
    SingleQubit,
    /// `symmetric` selects `σ₊ = (σ₁ + σ₂)/√2`, otherwise `σ₋`.
    TwoQubit { symmetric: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicState {
    /// Amplitude on each emitter's excited state, left to right.
    pub emitter_amps: Vec<Complex64>,
    pub emitter_sites: Vec<usize>,
    pub region: SiteInterval,
    /// Photon amplitudes on `region`, in site order.
    pub photon_amps: Vec<Complex64>,
    pub energy: f64,
    pub geometry: BicGeometry,
}

impl BicState {
    /// `|ε_b|²`, the total emitter weight.
    pub fn epsilon_sq(&self) -> f64 {
        self.emitter_amps.iter().map(|e| e.norm_sqr()).sum()
    }

    /// `ε_b`. For two qubits this is the amplitude of the `σ±` combination.
    pub fn epsilon(&self) -> Complex64 {
        match self.geometry {
            BicGeometry::SingleQubit => self.emitter_amps[0],
            BicGeometry::TwoQubit { .. } => Complex64::new(self.epsilon_sq().sqrt(), 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.epsilon_sq() + self.photon_amps.iter().map(|a| a.norm_sqr()).sum::<f64>()
    }

    /// Photon amplitude on a 1-based site (zero outside the region).
    pub fn photon_amp(&self, site: usize) -> Complex64 {
        if self.region.contains(site) {
            self.photon_amps[site - self.region.first]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// The bound state as a vector of the single-excitation sector.
    pub fn to_state(&self, basis: &Arc<SectorBasis>) -> Result<StateVector> {
        if basis.n_exc() != 1 || basis.emitter_sites() != self.emitter_sites.as_slice() {
            return Err(Error::Consistency(
                "bound state needs the 1-excitation sector of its own model".into(),
            ));
        }
        if self.region.last > basis.n_sites() {
            return Err(Error::Consistency("trapped region exceeds the lattice".into()));
        }
        let mut psi = StateVector::zeros(basis.clone());
        let n_em = self.emitter_sites.len();
        for (k, &e) in self.emitter_amps.iter().enumerate() {
            let mut occ = vec![0u8; n_em];
            occ[k] = 1;
            let i = basis
                .index_of(&BasisConfig::new(&occ, &[]))
                .expect("single-emitter excitation present");
            psi.amps_mut()[i] = e;
        }
        let ground = vec![0u8; n_em];
        for (x, &a) in self.region.sites().zip(&self.photon_amps) {
            let i = basis
                .index_of(&BasisConfig::new(&ground, &[x as u32]))
                .expect("photon site in lattice");
            psi.amps_mut()[i] = a;
        }
        Ok(psi)
    }
}

fn check_resonant(model: &ModelSpec) -> Result<()> {
    model.validate()?;
    if model.emitters.iter().any(|e| e.omega0 != model.cavity_freq) {
        return Err(Error::NoBic(
            "emitters detuned from band centre: k₀ = π/2 resonance violated".into(),
        ));
    }
    let d = model.separation();
    if d % 2 == 1 {
        return Err(Error::NoBic(format!(
            "separation d = {d} is odd, so k₀a = mπ has no solution at band centre"
        )));
    }
    if model.emitters.iter().any(|e| e.g == 0.0) {
        return Err(Error::NoBic("an emitter is decoupled (g = 0)".into()));
    }
    Ok(())
}

/// Single emitter at site `d` in front of the mirror.
pub fn single_qubit_bic(model: &ModelSpec) -> Result<BicState> {
    if model.boundary != Boundary::SemiInfinite || model.emitters.len() != 1 {
        return Err(Error::NoBic("single-qubit bound state needs the mirror geometry".into()));
    }
    check_resonant(model)?;
    let j = model.hopping;
    let e = &model.emitters[0];
    let d = e.site;
    let region = SiteInterval::new(1, d - 1);
    let shape: Vec<f64> = region.sites().map(|x| (std::f64::consts::FRAC_PI_2 * x as f64).sin().round()).collect();
    let eps_unnorm = j * shape[d - 2] / e.g;
    let sign = eps_unnorm.signum();
    let norm = (eps_unnorm * eps_unnorm + shape.iter().map(|s| s * s).sum::<f64>()).sqrt();
    let scale = sign / norm;
    Ok(BicState {
        emitter_amps: vec![Complex64::new(eps_unnorm * scale, 0.0)],
        emitter_sites: vec![d],
        region,
        photon_amps: shape.iter().map(|s| Complex64::new(s * scale, 0.0)).collect(),
        energy: model.cavity_freq,
        geometry: BicGeometry::SingleQubit,
    })
}

/// Two emitters `d` sites apart on the open waveguide.
pub fn two_qubit_bic(model: &ModelSpec) -> Result<BicState> {
    if model.boundary != Boundary::Infinite || model.emitters.len() != 2 {
        return Err(Error::NoBic("two-qubit bound state needs two emitters on an open waveguide".into()));
    }
    check_resonant(model)?;
    let j = model.hopping;
    let (e1, e2) = (&model.emitters[0], &model.emitters[1]);
    let (p, d) = (e1.site, model.separation());
    let region = SiteInterval::new(p + 1, p + d - 1);
    let shape: Vec<f64> = region
        .sites()
        .map(|x| (std::f64::consts::FRAC_PI_2 * (x - p) as f64).sin().round())
        .collect();
    let eps1 = j * shape[0] / e1.g;
    let eps2 = j * shape[d - 2] / e2.g;
    let norm = (eps1 * eps1 + eps2 * eps2 + shape.iter().map(|s| s * s).sum::<f64>()).sqrt();
    let scale = eps1.signum() / norm;
    Ok(BicState {
        emitter_amps: vec![Complex64::new(eps1 * scale, 0.0), Complex64::new(eps2 * scale, 0.0)],
        emitter_sites: vec![p, p + d],
        region,
        photon_amps: shape.iter().map(|s| Complex64::new(s * scale, 0.0)).collect(),
        energy: model.cavity_freq,
        geometry: BicGeometry::TwoQubit {
            symmetric: eps1.signum() == eps2.signum(),
        },
    })
}

/// Whichever bound state the model's geometry supports.
pub fn bic_for_model(model: &ModelSpec) -> Result<BicState> {
    match model.emitters.len() {
        2 => two_qubit_bic(model),
        _ => single_qubit_bic(model),
    }
}

/// Loss-induced decay rate `γ_a |ε_b|²` of the bound state.
pub fn bic_decay_rate(gamma_a: f64, bic: &BicState) -> f64 {
    gamma_a * bic.epsilon_sq()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_sector_hamiltonian;

    fn residual(model: &ModelSpec, bic: &BicState) -> f64 {
        let b = SectorBasis::shared(model, 1).unwrap();
        let h = build_sector_hamiltonian(model, &b).unwrap();
        let psi = bic.to_state(&b).unwrap();
        let mut out = vec![Complex64::new(0.0, 0.0); b.dim()];
        h.apply_affine(psi.amps(), &mut out, Complex64::new(bic.energy, 0.0), 1.0);
        out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn single_qubit_d10() {
        let m = ModelSpec::mirror_qubit(40, 0.3f64.sqrt(), 10).unwrap();
        let bic = single_qubit_bic(&m).unwrap();
        assert!((bic.epsilon_sq() - 0.4).abs() < 1e-12);
        assert!((bic.norm_sqr() - 1.0).abs() < 1e-14);
        assert!(bic.epsilon().re > 0.0);
        assert!(residual(&m, &bic) < 1e-12);
        // node at every even site, sinusoid on odd ones
        for x in (2..10).step_by(2) {
            assert_eq!(bic.photon_amp(x), Complex64::new(0.0, 0.0));
        }
        assert_eq!(bic.photon_amp(10), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn closed_form_weight_over_separations() {
        for d in (2..=24).step_by(2) {
            for &g2 in &[0.01, 0.15, 0.3, 0.4] {
                let m = ModelSpec::mirror_qubit(d + 5, f64::sqrt(g2), d).unwrap();
                let bic = single_qubit_bic(&m).unwrap();
                let want = 1.0 / (1.0 + 0.5 * g2 * d as f64);
                assert!((bic.epsilon_sq() - want).abs() < 1e-13);
                assert!(residual(&m, &bic) < 1e-12);
            }
        }
    }

    #[test]
    fn markovian_limit() {
        let m = ModelSpec::mirror_qubit(10, 1e-3, 2).unwrap();
        let bic = single_qubit_bic(&m).unwrap();
        assert!((bic.epsilon_sq() - 1.0 / (1.0 + 1e-6)).abs() < 1e-14);
    }

    #[test]
    fn weight_decreases_with_delay() {
        let g = 0.3f64.sqrt();
        let w: Vec<f64> = (2..=30)
            .step_by(2)
            .map(|d| single_qubit_bic(&ModelSpec::mirror_qubit(40, g, d).unwrap()).unwrap().epsilon_sq())
            .collect();
        assert!(w.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn dense_eigenvector_overlap() {
        let m = ModelSpec::mirror_qubit(30, 0.3f64.sqrt(), 10).unwrap();
        let bic = single_qubit_bic(&m).unwrap();
        let b = SectorBasis::shared(&m, 1).unwrap();
        let h = build_sector_hamiltonian(&m, &b).unwrap();
        let dense = h.to_dense().map(|z| z.re);
        let eig = dense.symmetric_eigen();
        let psi = bic.to_state(&b).unwrap();
        let best = (0..b.dim())
            .map(|k| {
                let col = eig.eigenvectors.column(k);
                let ov: f64 = col.iter().zip(psi.amps()).map(|(c, a)| c * a.re).sum();
                ov * ov
            })
            .fold(0.0, f64::max);
        assert!(best >= 1.0 - 1e-10, "{best}");
    }

    #[test]
    fn two_qubit_parity_rule() {
        let g = 0.3f64.sqrt();
        let m = ModelSpec::two_qubits(40, g, 15, 10).unwrap();
        let bic = two_qubit_bic(&m).unwrap();
        assert_eq!(bic.geometry, BicGeometry::TwoQubit { symmetric: true });
        assert!((bic.epsilon_sq() - 1.0 / 1.75).abs() < 1e-12);
        assert!(residual(&m, &bic) < 1e-12);

        let m = ModelSpec::two_qubits(40, g, 15, 4).unwrap();
        let bic = two_qubit_bic(&m).unwrap();
        assert_eq!(bic.geometry, BicGeometry::TwoQubit { symmetric: false });
        assert!((bic.epsilon_sq() - 1.0 / (1.0 + 0.3)).abs() < 1e-12);
        assert!(residual(&m, &bic) < 1e-12);
        assert!((bic.emitter_amps[0] + bic.emitter_amps[1]).norm() < 1e-15);
    }

    #[test]
    fn rejects_odd_or_wrong_geometry() {
        let m = ModelSpec::mirror_qubit(20, 0.5, 9).unwrap();
        assert!(matches!(single_qubit_bic(&m), Err(Error::NoBic(_))));
        let m2 = ModelSpec::two_qubits(40, 0.5, 10, 10).unwrap();
        assert!(matches!(single_qubit_bic(&m2), Err(Error::NoBic(_))));
        let m = ModelSpec::mirror_qubit(20, 0.5, 10).unwrap();
        assert!(matches!(two_qubit_bic(&m), Err(Error::NoBic(_))));
        let m3 = ModelSpec::two_qubits(40, 0.5, 10, 7).unwrap();
        assert!(matches!(two_qubit_bic(&m3), Err(Error::NoBic(_))));
    }

    #[test]
    fn decay_rate() {
        let m = ModelSpec::mirror_qubit(40, 0.3f64.sqrt(), 10).unwrap();
        let bic = single_qubit_bic(&m).unwrap();
        assert_eq!(bic_decay_rate(0.0, &bic), 0.0);
        let gamma = m.gamma();
        assert!((bic_decay_rate(0.1 * gamma, &bic) - 0.04 * gamma).abs() < 1e-14);
    }
}
