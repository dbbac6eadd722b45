use std::sync::Arc;

use num_complex::Complex64;

use crate::basis::SectorBasis;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex amplitudes over one excitation sector.
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<SectorBasis>,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(basis: Arc<SectorBasis>) -> Self {
        let dim = basis.dim();
        StateVector {
            basis,
            amps: vec![ZERO; dim],
        }
    }

    pub fn from_amps(basis: Arc<SectorBasis>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::Consistency(format!(
                "{} amplitudes for a basis of dimension {}",
                amps.len(),
                basis.dim()
            )));
        }
        Ok(StateVector { basis, amps })
    }

    pub fn basis_state(basis: Arc<SectorBasis>, index: usize) -> Self {
        let mut s = Self::zeros(basis);
        s.amps[index] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn n_exc(&self) -> usize {
        self.basis.n_exc()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescale to unit norm; returns the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in &mut self.amps {
                *a *= inv;
            }
        }
        n
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_same_sector(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn conj(&self) -> StateVector {
        StateVector {
            basis: self.basis.clone(),
            amps: self.amps.iter().map(|a| a.conj()).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        self.check_same_sector(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    fn check_same_sector(&self, other: &StateVector) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis)
            || (self.basis.n_exc() == other.basis.n_exc() && self.basis.same_layout(&other.basis))
        {
            Ok(())
        } else {
            Err(Error::Consistency("states live in different sectors".into()))
        }
    }

    /// `a†(φ)|self⟩` in `target`, with `mode[x - 1]` the amplitude on site `x`.
    pub fn apply_creation(&self, mode: &[Complex64], target: &Arc<SectorBasis>) -> Result<StateVector> {
        if target.n_exc() != self.n_exc() + 1 || !target.same_layout(&self.basis) {
            return Err(Error::Consistency(
                "creation target must be the next sector of the same lattice".into(),
            ));
        }
        if mode.len() != self.basis.n_sites() {
            return Err(Error::Consistency(format!(
                "mode has {} sites, lattice has {}",
                mode.len(),
                self.basis.n_sites()
            )));
        }
        let mut out = vec![ZERO; target.dim()];
        for (amp, c) in out.iter_mut().zip(target.configs()) {
            let mut acc = ZERO;
            let mut last = 0u32;
            for &x in &c.photons {
                if x == last {
                    continue;
                }
                last = x;
                let m = mode[x as usize - 1];
                if m == ZERO {
                    continue;
                }
                let n = c.photon_count(x);
                let src = c.without_photon(x).expect("photon present");
                if let Some(j) = self.basis.index_of(&src) {
                    acc += m * (n as f64).sqrt() * self.amps[j];
                }
            }
            *amp = acc;
        }
        StateVector::from_amps(target.clone(), out)
    }

    /// Amplitudes `ξ(x) = ⟨bound| a_x |self⟩` for every site `x`, where
    /// `bound` lives in the sector below.
    pub fn photon_channel_amplitudes(&self, bound: &StateVector) -> Result<Vec<Complex64>> {
        if bound.n_exc() + 1 != self.n_exc() || !bound.basis.same_layout(&self.basis) {
            return Err(Error::Consistency(
                "channel projection needs a state from the sector below on the same lattice".into(),
            ));
        }
        let n_sites = self.basis.n_sites();
        let mut xi = vec![ZERO; n_sites];
        for (c, &b) in bound.basis.configs().iter().zip(&bound.amps) {
            if b == ZERO {
                continue;
            }
            let bc = b.conj();
            for x in 1..=n_sites as u32 {
                let up = c.with_photon(x).expect("sector below has room");
                if let Some(j) = self.basis.index_of(&up) {
                    let n = up.photon_count(x) as f64;
                    xi[x as usize - 1] += bc * n.sqrt() * self.amps[j];
                }
            }
        }
        Ok(xi)
    }

    /// Copy onto another lattice with the same emitter layout. Returns the
    /// state and the weight of components that do not fit.
    pub fn resample(&self, target: &Arc<SectorBasis>) -> Result<(StateVector, f64)> {
        if target.n_exc() != self.n_exc()
            || target.emitter_sites() != self.basis.emitter_sites()
            || target.max_occupations() != self.basis.max_occupations()
        {
            return Err(Error::Consistency(
                "resampling needs the same sector and emitter layout".into(),
            ));
        }
        let mut out = vec![ZERO; target.dim()];
        let mut dropped = 0.0;
        for (c, &a) in self.basis.configs().iter().zip(&self.amps) {
            if a == ZERO {
                continue;
            }
            match target.index_of(c) {
                Some(j) => out[j] = a,
                None => dropped += a.norm_sqr(),
            }
        }
        Ok((StateVector::from_amps(target.clone(), out)?, dropped))
    }

    /// Largest photon site carrying weight, keeping the discarded tail beyond
    /// it below `tail_weight`.
    pub fn photon_extent(&self, tail_weight: f64) -> usize {
        let mut per_site = vec![0.0; self.basis.n_sites() + 1];
        for (c, a) in self.basis.configs().iter().zip(&self.amps) {
            if let Some(&far) = c.photons.last() {
                per_site[far as usize] += a.norm_sqr();
            }
        }
        let mut tail = 0.0;
        for x in (1..per_site.len()).rev() {
            tail += per_site[x];
            if tail > tail_weight {
                return x;
            }
        }
        0
    }
}
