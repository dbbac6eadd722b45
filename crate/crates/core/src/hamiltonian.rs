//! Sector Hamiltonians of the coupled-cavity array.
//!
//! `H = ω_c Σ c†c − J Σ (c†_{n} c_{n−1} + h.c.) + Σ_e [ω₀ n_e + (U/2) n_e(n_e−1)
//!      − i(γ/2) n_e + g (c†_{s_e} σ_e + h.c.)]`
//!
//! All hopping and coupling elements are real, so the operator is stored as a
//! real off-diagonal CSR pattern plus a complex diagonal that carries the
//! loss terms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{BasisConfig, SectorBasis};
use crate::error::{Error, Result};
use crate::model::{EmitterKind, ModelSpec};

/// Row count above which matrix-vector products are split across threads.
const PAR_MIN_ROWS: usize = 8192;

#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    dim: usize,
    n_exc: usize,
    diag: Vec<Complex64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    hermitian: bool,
}

/// Spectral enclosure from Gershgorin discs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SpectralBounds {
    pub fn center(&self) -> f64 {
        0.5 * (self.re_min + self.re_max)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.re_max - self.re_min)
    }
}

pub fn build_sector_hamiltonian(model: &ModelSpec, basis: &SectorBasis) -> Result<SparseHamiltonian> {
    model.validate()?;
    if !basis.matches_model(model) {
        return Err(Error::Consistency(
            "basis was enumerated for a different lattice or emitter layout".into(),
        ));
    }
    let dim = basis.dim();
    let j = model.hopping;
    let n_sites = model.n_sites as u32;
    let mut diag = Vec::with_capacity(dim);
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols: Vec<u32> = Vec::with_capacity(dim * 5);
    let mut vals: Vec<f64> = Vec::with_capacity(dim * 5);
    row_ptr.push(0);
    let mut row: Vec<(u32, f64)> = Vec::with_capacity(16);

    let push = |row: &mut Vec<(u32, f64)>, target: &BasisConfig, v: f64| -> Result<()> {
        let idx = basis.index_of(target).ok_or_else(|| {
            Error::Consistency(format!("configuration {target:?} missing from basis"))
        })?;
        row.push((idx as u32, v));
        Ok(())
    };

    for c in basis.configs() {
        row.clear();
        let mut d = Complex64::new(model.cavity_freq * c.n_photons() as f64, 0.0);
        for (e, &occ) in model.emitters.iter().zip(&c.emitter_occ) {
            let n = occ as f64;
            d.re += e.omega0 * n;
            if let EmitterKind::Bosonic { u, .. } = e.kind {
                d.re += 0.5 * u * n * (n - 1.0);
            }
            d.im -= 0.5 * e.gamma_loss * n;
        }
        diag.push(d);

        // photon hopping
        let mut last = 0u32;
        for &x in &c.photons {
            if x == last {
                continue;
            }
            last = x;
            let nx = c.photon_count(x);
            let removed = c.without_photon(x).expect("photon present");
            for y in [x.wrapping_sub(1), x + 1] {
                if y < 1 || y > n_sites {
                    continue;
                }
                let ny = c.photon_count(y);
                let target = removed.with_photon(y).expect("room for photon");
                push(&mut row, &target, -j * ((nx * (ny + 1)) as f64).sqrt())?;
            }
        }

        // emitter–cavity exchange
        for (k, e) in model.emitters.iter().enumerate() {
            let occ = c.emitter_occ[k] as usize;
            let s = e.site as u32;
            let ns = c.photon_count(s);
            if occ >= 1 {
                let mut t = c.with_photon(s).expect("room for photon");
                t.emitter_occ[k] -= 1;
                push(&mut row, &t, e.g * ((occ * (ns + 1)) as f64).sqrt())?;
            }
            if occ < e.kind.max_occupation() && ns >= 1 {
                let mut t = c.without_photon(s).expect("photon present");
                t.emitter_occ[k] += 1;
                if basis.index_of(&t).is_some() {
                    push(&mut row, &t, e.g * (((occ + 1) * ns) as f64).sqrt())?;
                }
            }
        }

        row.sort_unstable_by_key(|&(col, _)| col);
        for &(col, v) in row.iter() {
            cols.push(col);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }

    Ok(SparseHamiltonian {
        dim,
        n_exc: basis.n_exc(),
        diag,
        row_ptr,
        cols,
        vals,
        hermitian: model.is_hermitian(),
    })
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_exc(&self) -> usize {
        self.n_exc
    }

    pub fn nnz(&self) -> usize {
        self.cols.len() + self.dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn diagonal(&self) -> &[Complex64] {
        &self.diag
    }

    /// Off-diagonal entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b]
            .iter()
            .zip(&self.vals[a..b])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i == j {
            return self.diag[i];
        }
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| Complex64::new(v, 0.0))
            .unwrap_or_default()
    }

    /// `y = scale · (H − shift) x`.
    pub fn apply_affine(&self, x: &[Complex64], y: &mut [Complex64], shift: Complex64, scale: f64) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        let kernel = |(i, yi): (usize, &mut Complex64)| {
            let mut acc = (self.diag[i] - shift) * x[i];
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for k in a..b {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *yi = acc * scale;
        };
        if self.dim >= PAR_MIN_ROWS && rayon::current_num_threads() > 1 {
            y.par_iter_mut().enumerate().with_min_len(4096).for_each(kernel);
        } else {
            y.iter_mut().enumerate().for_each(kernel);
        }
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.apply_affine(x, y, Complex64::new(0.0, 0.0), 1.0);
    }

    pub fn gershgorin_bounds(&self) -> SpectralBounds {
        let mut b = SpectralBounds {
            re_min: f64::INFINITY,
            re_max: f64::NEG_INFINITY,
            im_min: f64::INFINITY,
            im_max: f64::NEG_INFINITY,
        };
        for i in 0..self.dim {
            let r: f64 = self.row(i).map(|(_, v)| v.abs()).sum();
            let d = self.diag[i];
            b.re_min = b.re_min.min(d.re - r);
            b.re_max = b.re_max.max(d.re + r);
            b.im_min = b.im_min.min(d.im - r);
            b.im_max = b.im_max.max(d.im + r);
        }
        if self.dim == 0 {
            b = SpectralBounds {
                re_min: 0.0,
                re_max: 0.0,
                im_min: 0.0,
                im_max: 0.0,
            };
        }
        b
    }

    /// Largest `|H_ij − conj(H_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = self.diag.iter().map(|d| d.im.abs()).fold(0.0, f64::max);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                let back = self.get(j, i);
                worst = worst.max((Complex64::new(v, 0.0) - back.conj()).norm());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            m[(i, i)] = self.diag[i];
            for (j, v) in self.row(i) {
                m[(i, j)] += Complex64::new(v, 0.0);
            }
        }
        m
    }
}
