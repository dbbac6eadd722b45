//! Time evolution of sector states.
//!
//! Hermitian Hamiltonians are propagated with a Chebyshev expansion of
//! `e^{−iHΔt}` over each sample interval; the spectrum is mapped onto
//! `[−1, 1]` with Gershgorin bounds. Non-Hermitian (lossy) Hamiltonians use a
//! fixed-step Taylor integrator whose order is set by the tolerance. A dense
//! exponential in [`dense`] serves as the reference for both.

mod bessel;
mod dense;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bessel::bessel_j_sequence;
pub use dense::{expm_dense_oracle, DENSE_ORACLE_MAX_DIM};

use crate::error::{Error, Result};
use crate::hamiltonian::{SparseHamiltonian, SpectralBounds};
use crate::state::StateVector;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest `ρ·h` (spectral radius times step) taken by the Taylor stepper.
const TAYLOR_STEP_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    PolynomialHermitian,
    ExplicitStepper,
}

/// Times are in units of `1/J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPlan {
    pub t_max: f64,
    pub sample_dt: f64,
    pub method: Method,
    pub tolerance: f64,
}

impl EvolutionPlan {
    pub fn new(t_max: f64, sample_dt: f64, method: Method, tolerance: f64) -> Self {
        EvolutionPlan {
            t_max,
            sample_dt,
            method,
            tolerance,
        }
    }

    /// Plan given in units of `1/Γ`.
    pub fn in_gamma_units(t_max: f64, sample_dt: f64, gamma: f64, method: Method, tolerance: f64) -> Self {
        Self::new(t_max / gamma, sample_dt / gamma, method, tolerance)
    }

    /// Chebyshev for Hermitian operators, Taylor stepping otherwise.
    pub fn auto(h: &SparseHamiltonian, t_max: f64, sample_dt: f64, tolerance: f64) -> Self {
        let method = if h.is_hermitian() {
            Method::PolynomialHermitian
        } else {
            Method::ExplicitStepper
        };
        Self::new(t_max, sample_dt, method, tolerance)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Validity(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.sample_dt > 0.0) || !(self.t_max >= 0.0) {
            return Err(Error::Validity(format!(
                "need sample_dt > 0 and t_max ≥ 0, got {} and {}",
                self.sample_dt, self.t_max
            )));
        }
        Ok(())
    }

    /// Monotone sample times `0, dt, 2dt, …, t_max`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.t_max / self.sample_dt - 1e-9).ceil().max(0.0) as usize;
        let mut t: Vec<f64> = (0..n).map(|k| k as f64 * self.sample_dt).collect();
        t.push(self.t_max);
        t
    }
}

/// One step of `e^{−iHΔt}` for a fixed `Δt`.
trait Stepper {
    fn step(&mut self, h: &SparseHamiltonian, psi: &mut [Complex64], dt: f64);
}

struct Chebyshev {
    bounds: SpectralBounds,
    tolerance: f64,
    cached: Option<(f64, Vec<Complex64>)>,
    buf: [Vec<Complex64>; 3],
}

impl Chebyshev {
    fn new(h: &SparseHamiltonian, tolerance: f64) -> Self {
        let dim = h.dim();
        Chebyshev {
            bounds: h.gershgorin_bounds(),
            tolerance,
            cached: None,
            buf: [vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim]],
        }
    }

    fn radius(&self) -> f64 {
        // slight padding keeps the mapped spectrum strictly inside [−1, 1]
        self.bounds.half_width() * (1.0 + 1e-3) + 1e-12
    }

    fn coefficients(&mut self, dt: f64) -> Vec<Complex64> {
        if let Some((cdt, c)) = &self.cached {
            if *cdt == dt {
                return c.clone();
            }
        }
        let x = self.radius() * dt;
        let n_max = (x.ceil() as usize) * 2 + 60;
        let j = bessel_j_sequence(x, n_max);
        let cut = self.tolerance * 1e-3;
        let mut k_end = n_max;
        for k in (x.ceil() as usize)..n_max {
            if j[k].abs() < cut && j[k + 1].abs() < cut {
                k_end = k;
                break;
            }
        }
        let mut coeffs = Vec::with_capacity(k_end + 1);
        let mut phase = Complex64::new(1.0, 0.0);
        for (k, &jk) in j.iter().take(k_end + 1).enumerate() {
            let w = if k == 0 { 1.0 } else { 2.0 };
            coeffs.push(phase * (w * jk));
            phase *= Complex64::new(0.0, -1.0);
        }
        self.cached = Some((dt, coeffs.clone()));
        coeffs
    }
}

impl Stepper for Chebyshev {
    fn step(&mut self, h: &SparseHamiltonian, psi: &mut [Complex64], dt: f64) {
        let coeffs = self.coefficients(dt);
        let center = Complex64::new(self.bounds.center(), 0.0);
        let r = self.radius();
        let [prev, cur, next] = &mut self.buf;
        prev.copy_from_slice(psi);
        h.apply_affine(prev, cur, center, 1.0 / r);
        for ((p, &t0), &t1) in psi.iter_mut().zip(prev.iter()).zip(cur.iter()) {
            *p = coeffs[0] * t0 + if coeffs.len() > 1 { coeffs[1] * t1 } else { ZERO };
        }
        for &a in coeffs.iter().skip(2) {
            h.apply_affine(cur, next, center, 2.0 / r);
            for ((n, &p0), out) in next.iter_mut().zip(prev.iter()).zip(psi.iter_mut()) {
                *n -= p0;
                *out += a * *n;
            }
            std::mem::swap(prev, cur);
            std::mem::swap(cur, next);
        }
        let rot = Complex64::new(0.0, -self.bounds.center() * dt).exp();
        for p in psi.iter_mut() {
            *p *= rot;
        }
    }
}

struct Taylor {
    center: f64,
    rho: f64,
    tolerance: f64,
    term: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Taylor {
    fn new(h: &SparseHamiltonian, tolerance: f64) -> Self {
        let b = h.gershgorin_bounds();
        let im = h.diagonal().iter().map(|d| d.im.abs()).fold(0.0, f64::max);
        let rho = (b.half_width() + im).max(1e-12);
        Taylor {
            center: b.center(),
            rho,
            tolerance,
            term: vec![ZERO; h.dim()],
            tmp: vec![ZERO; h.dim()],
        }
    }

    fn order(&self, h_step: f64) -> usize {
        let z = self.rho * h_step;
        let mut err = z;
        let mut k = 1usize;
        // remainder bound of the truncated exponential series
        while err > self.tolerance * 1e-2 && k < 80 {
            k += 1;
            err *= z / k as f64;
        }
        k
    }
}

impl Stepper for Taylor {
    fn step(&mut self, h: &SparseHamiltonian, psi: &mut [Complex64], dt: f64) {
        let n_sub = ((self.rho * dt / TAYLOR_STEP_RADIUS).ceil() as usize).max(1);
        let hs = dt / n_sub as f64;
        let order = self.order(hs);
        let shift = Complex64::new(self.center, 0.0);
        let rot = Complex64::new(0.0, -self.center * hs).exp();
        for _ in 0..n_sub {
            self.term.copy_from_slice(psi);
            for k in 1..=order {
                h.apply_affine(&self.term, &mut self.tmp, shift, hs / k as f64);
                // tmp = (hs/k)(H − c) term; multiply by −i
                for ((t, &v), p) in self.term.iter_mut().zip(self.tmp.iter()).zip(psi.iter_mut()) {
                    *t = Complex64::new(v.im, -v.re);
                    *p += *t;
                }
            }
            for p in psi.iter_mut() {
                *p *= rot;
            }
        }
    }
}

/// Evolve `psi0` under `h`, calling `observer(t, ψ(t))` at every sample time
/// (including `t = 0`). Returns `ψ(t_max)`.
pub fn evolve<F>(h: &SparseHamiltonian, psi0: &StateVector, plan: &EvolutionPlan, mut observer: F) -> Result<StateVector>
where
    F: FnMut(f64, &StateVector),
{
    plan.validate()?;
    if h.dim() != psi0.dim() {
        return Err(Error::Consistency(format!(
            "Hamiltonian of dimension {} applied to a state of dimension {}",
            h.dim(),
            psi0.dim()
        )));
    }
    let mut stepper: Box<dyn Stepper> = match plan.method {
        Method::PolynomialHermitian => {
            if !h.is_hermitian() {
                return Err(Error::MethodMismatch(
                    "the Chebyshev propagator needs a Hermitian Hamiltonian".into(),
                ));
            }
            Box::new(Chebyshev::new(h, plan.tolerance))
        }
        Method::ExplicitStepper => Box::new(Taylor::new(h, plan.tolerance)),
    };
    let mut psi = psi0.clone();
    let times = plan.sample_times();
    let mut t_prev = 0.0;
    for &t in &times {
        let dt = t - t_prev;
        if dt > 0.0 {
            stepper.step(h, psi.amps_mut(), dt);
            let n = psi.norm_sqr();
            if !n.is_finite() {
                return Err(Error::NonFinite {
                    t,
                    detail: format!("norm² = {n} after a step of {dt}"),
                });
            }
        }
        observer(t, &psi);
        t_prev = t;
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisConfig, SectorBasis};
    use crate::hamiltonian::build_sector_hamiltonian;
    use crate::model::ModelSpec;
    use rand::{Rng, SeedableRng};

    fn random_state(basis: std::sync::Arc<SectorBasis>, seed: u64) -> StateVector {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..basis.dim())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut s = StateVector::from_amps(basis, amps).unwrap();
        s.normalize();
        s
    }

    #[test]
    fn decoupled_emitter_phase() {
        let mut m = ModelSpec::mirror_qubit(6, 0.0, 2).unwrap();
        m.cavity_freq = 0.7;
        m.emitters[0].omega0 = 0.7;
        let b = SectorBasis::shared(&m, 1).unwrap();
        let h = build_sector_hamiltonian(&m, &b).unwrap();
        let e = b.index_of(&BasisConfig::new(&[1], &[])).unwrap();
        let psi0 = StateVector::basis_state(b.clone(), e);
        let plan = EvolutionPlan::new(13.0, 1.3, Method::PolynomialHermitian, 1e-12);
        let mut worst: f64 = 0.0;
        let fin = evolve(&h, &psi0, &plan, |t, psi| {
            let want = Complex64::new(0.0, -0.7 * t).exp();
            worst = worst.max((psi.amps()[e] - want).norm());
            worst = worst.max((psi.amps()[e].norm_sqr() - 1.0).abs());
        })
        .unwrap();
        assert!(worst < 1e-12, "{worst}");
        assert!((fin.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lossy_decoupled_emitter_decays() {
        let m = ModelSpec::mirror_qubit(6, 0.0, 2).unwrap().with_loss(0.3).unwrap();
        let b = SectorBasis::shared(&m, 1).unwrap();
        let h = build_sector_hamiltonian(&m, &b).unwrap();
        let e = b.index_of(&BasisConfig::new(&[1], &[])).unwrap();
        let psi0 = StateVector::basis_state(b, e);
        let plan = EvolutionPlan::new(10.0, 0.5, Method::ExplicitStepper, 1e-12);
        let mut worst: f64 = 0.0;
        evolve(&h, &psi0, &plan, |t, psi| {
            worst = worst.max((psi.amps()[e].norm_sqr() - (-0.3 * t).exp()).abs());
        })
        .unwrap();
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn chebyshev_rejects_lossy() {
        let m = ModelSpec::mirror_qubit(6, 0.4, 2).unwrap().with_loss(0.1).unwrap();
        let b = SectorBasis::shared(&m, 1).unwrap();
        let h = build_sector_hamiltonian(&m, &b).unwrap();
        let psi = StateVector::basis_state(b, 0);
        let plan = EvolutionPlan::new(1.0, 0.5, Method::PolynomialHermitian, 1e-10);
        assert!(matches!(evolve(&h, &psi, &plan, |_, _| {}), Err(Error::MethodMismatch(_))));
    }

    #[test]
    fn both_methods_match_dense_oracle() {
        let m = ModelSpec::mirror_qubit(6, 0.55, 4).unwrap();
        for n in 1..=2 {
            let b = SectorBasis::shared(&m, n).unwrap();
            let h = build_sector_hamiltonian(&m, &b).unwrap();
            for seed in 0..3 {
                let psi0 = random_state(b.clone(), seed);
                let want = expm_dense_oracle(&h, 7.3, &psi0).unwrap();
                for method in [Method::PolynomialHermitian, Method::ExplicitStepper] {
                    let plan = EvolutionPlan::new(7.3, 2.0, method, 1e-12);
                    let got = evolve(&h, &psi0, &plan, |_, _| {}).unwrap();
                    assert!(got.max_abs_diff(&want).unwrap() < 1e-10, "{method:?}");
                }
            }
        }
    }

    #[test]
    fn time_reversal_identity() {
        let m = ModelSpec::mirror_qubit(8, 0.5, 4).unwrap();
        let b = SectorBasis::shared(&m, 2).unwrap();
        let h = build_sector_hamiltonian(&m, &b).unwrap();
        let psi0 = random_state(b, 11);
        let plan = EvolutionPlan::new(9.0, 3.0, Method::PolynomialHermitian, 1e-12);
        let fwd = evolve(&h, &psi0, &plan, |_, _| {}).unwrap();
        let back = evolve(&h, &fwd.conj(), &plan, |_, _| {}).unwrap().conj();
        assert!(back.max_abs_diff(&psi0).unwrap() < 1e-10);
    }

    #[test]
    fn sample_times_are_monotone_and_end_at_t_max() {
        let p = EvolutionPlan::new(1.0, 0.3, Method::PolynomialHermitian, 1e-9);
        let t = p.sample_times();
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&1.0));
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        let p = EvolutionPlan::new(1.2, 0.3, Method::PolynomialHermitian, 1e-9);
        assert_eq!(p.sample_times().len(), 5);
    }
}
