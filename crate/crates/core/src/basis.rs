//! Fixed-excitation-number sectors in the site basis.
//!
//! A configuration is a tuple of emitter occupations plus a sorted multiset of
//! photon sites. Bosonic symmetry lives in the basis: the state
//! `|…, n_x, …⟩` is the normalized Fock state, so hopping and emission
//! matrix elements carry the usual `√n` factors.
//!
//! Configurations are ordered lexicographically by `(emitter_occ, photons)`.
//! Ranks are computed arithmetically through the combinatorial number system
//! instead of a hash table, which keeps Hamiltonian construction cheap at
//! 10⁶ states.

use std::sync::Arc;

use arrayvec::ArrayVec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::state::StateVector;

/// Largest supported excitation number.
pub const MAX_EXCITATIONS: usize = 3;
pub const MAX_EMITTERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisConfig {
    pub emitter_occ: ArrayVec<u8, MAX_EMITTERS>,
    pub photons: ArrayVec<u32, MAX_EXCITATIONS>,
}

impl BasisConfig {
    pub fn new(emitter_occ: &[u8], photons: &[u32]) -> Self {
        let mut p: ArrayVec<u32, MAX_EXCITATIONS> = photons.iter().copied().collect();
        p.sort_unstable();
        BasisConfig {
            emitter_occ: emitter_occ.iter().copied().collect(),
            photons: p,
        }
    }

    pub fn total_emitter_occ(&self) -> usize {
        self.emitter_occ.iter().map(|&o| o as usize).sum()
    }

    pub fn n_photons(&self) -> usize {
        self.photons.len()
    }

    /// Number of photons on `site`.
    #[inline]
    pub fn photon_count(&self, site: u32) -> usize {
        self.photons.iter().filter(|&&p| p == site).count()
    }

    /// Same configuration with one photon added at `site`.
    pub fn with_photon(&self, site: u32) -> Option<Self> {
        let mut c = self.clone();
        c.photons.try_push(site).ok()?;
        c.photons.sort_unstable();
        Some(c)
    }

    /// Same configuration with one photon removed from `site`.
    pub fn without_photon(&self, site: u32) -> Option<Self> {
        let pos = self.photons.iter().position(|&p| p == site)?;
        let mut c = self.clone();
        c.photons.remove(pos);
        Some(c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Block {
    occ: Vec<u8>,
    n_photons: usize,
    offset: usize,
    count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorBasis {
    n_exc: usize,
    n_sites: usize,
    emitter_sites: Vec<usize>,
    max_occ: Vec<usize>,
    blocks: Vec<Block>,
    #[serde(skip)]
    configs: Vec<BasisConfig>,
    truncated: bool,
}

fn binom(n: u64, r: u64) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Number of multisets of size `k` drawn from `n_sites` sites.
pub fn multiset_count(n_sites: usize, k: usize) -> usize {
    if k == 0 {
        return 1;
    }
    binom((n_sites + k - 1) as u64, k as u64) as usize
}

/// Lexicographic rank of a sorted multiset of 1-based sites.
fn multiset_rank(photons: &[u32], n_sites: usize) -> usize {
    let k = photons.len() as u64;
    if k == 0 {
        return 0;
    }
    // x_i + (i - 1) turns the multiset into a strictly increasing combination
    // on 1..=m, whose lexicographic rank has a closed form.
    let m = n_sites as u64 + k - 1;
    let mut rank = 0u64;
    let mut prev = 0u64;
    for (i, &x) in photons.iter().enumerate() {
        let y = x as u64 + i as u64;
        let r = k - i as u64 - 1;
        if y > prev + 1 {
            let a = prev + 1;
            let b = y - 1;
            rank += binom(m - a + 1, r + 1) - binom(m - b, r + 1);
        }
        prev = y;
    }
    rank as usize
}

/// Advance a sorted multiset to its lexicographic successor.
fn next_multiset(p: &mut [u32], n_sites: u32) -> bool {
    for i in (0..p.len()).rev() {
        if p[i] < n_sites {
            p[i] += 1;
            let v = p[i];
            for q in p.iter_mut().skip(i + 1) {
                *q = v;
            }
            return true;
        }
    }
    false
}

fn occupation_patterns(max_occ: &[usize], n_exc: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; max_occ.len()];
    fn rec(i: usize, left: usize, max_occ: &[usize], cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if i == max_occ.len() {
            out.push(cur.clone());
            return;
        }
        for o in 0..=max_occ[i].min(left) {
            cur[i] = o as u8;
            rec(i + 1, left - o, max_occ, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, n_exc, max_occ, &mut cur, &mut out);
    out
}

impl SectorBasis {
    pub fn new(model: &ModelSpec, n_exc: usize) -> Result<Self> {
        if n_exc > MAX_EXCITATIONS {
            return Err(Error::Unsupported(format!(
                "excitation number {n_exc} exceeds {MAX_EXCITATIONS}"
            )));
        }
        model.validate()?;
        let emitter_sites: Vec<usize> = model.emitters.iter().map(|e| e.site).collect();
        let max_occ: Vec<usize> = model.emitters.iter().map(|e| e.kind.max_occupation()).collect();
        let truncated = model.emitters.iter().any(|e| {
            matches!(e.kind, crate::model::EmitterKind::Bosonic { max_occ, .. } if max_occ < n_exc)
        });
        if truncated {
            log::warn!("bosonic emitter occupation truncated below the sector excitation number {n_exc}");
        }
        let n_sites = model.n_sites;
        let mut blocks = Vec::new();
        let mut offset = 0usize;
        for occ in occupation_patterns(&max_occ, n_exc) {
            let used: usize = occ.iter().map(|&o| o as usize).sum();
            let k = n_exc - used;
            let count = multiset_count(n_sites, k);
            blocks.push(Block {
                occ,
                n_photons: k,
                offset,
                count,
            });
            offset += count;
        }
        let mut configs = Vec::with_capacity(offset);
        for b in &blocks {
            let mut p = vec![1u32; b.n_photons];
            loop {
                configs.push(BasisConfig::new(&b.occ, &p));
                if !next_multiset(&mut p, n_sites as u32) {
                    break;
                }
            }
        }
        debug_assert_eq!(configs.len(), offset);
        Ok(SectorBasis {
            n_exc,
            n_sites,
            emitter_sites,
            max_occ,
            blocks,
            configs,
            truncated,
        })
    }

    pub fn shared(model: &ModelSpec, n_exc: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(model, n_exc)?))
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn n_exc(&self) -> usize {
        self.n_exc
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn emitter_sites(&self) -> &[usize] {
        &self.emitter_sites
    }

    pub fn max_occupations(&self) -> &[usize] {
        &self.max_occ
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn configs(&self) -> &[BasisConfig] {
        &self.configs
    }

    pub fn config(&self, i: usize) -> &BasisConfig {
        &self.configs[i]
    }

    /// Position of `config` in this sector, if it belongs to it.
    pub fn index_of(&self, config: &BasisConfig) -> Option<usize> {
        if config.emitter_occ.len() != self.emitter_sites.len() {
            return None;
        }
        if config.photons.iter().any(|&p| p < 1 || p as usize > self.n_sites) {
            return None;
        }
        let block = self
            .blocks
            .iter()
            .find(|b| b.occ.as_slice() == config.emitter_occ.as_slice())?;
        if block.n_photons != config.photons.len() {
            return None;
        }
        Some(block.offset + multiset_rank(&config.photons, self.n_sites))
    }

    /// True when `model` has the layout this basis was enumerated for.
    pub fn matches_model(&self, model: &ModelSpec) -> bool {
        model.n_sites == self.n_sites
            && model.emitters.len() == self.emitter_sites.len()
            && model
                .emitters
                .iter()
                .zip(&self.emitter_sites)
                .zip(&self.max_occ)
                .all(|((e, &s), &m)| e.site == s && e.kind.max_occupation() == m)
    }

    /// Same lattice layout (sites, emitter positions, occupation caps).
    pub fn same_layout(&self, other: &SectorBasis) -> bool {
        self.n_sites == other.n_sites
            && self.emitter_sites == other.emitter_sites
            && self.max_occ == other.max_occ
    }

    /// SHA-256 over the ordered configuration list.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_exc as u64).to_le_bytes());
        h.update((self.n_sites as u64).to_le_bytes());
        for c in &self.configs {
            h.update(&c.emitter_occ[..]);
            h.update([0xff]);
            for p in &c.photons {
                h.update(p.to_le_bytes());
            }
            h.update([0xfe]);
        }
        hex::encode(h.finalize())
    }
}

/// Symmetric two-photon amplitude `χ(x, y)` on an `n_sites × n_sites` grid.
///
/// Normalized so that the sum of `|χ|²` over ordered pairs is the probability
/// of the two-photon (emitter-unexcited) component.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonGrid {
    pub n_sites: usize,
    values: Vec<Complex64>,
}

impl TwoPhotonGrid {
    pub fn zeros(n_sites: usize) -> Self {
        TwoPhotonGrid {
            n_sites,
            values: vec![Complex64::new(0.0, 0.0); n_sites * n_sites],
        }
    }

    #[inline]
    fn idx(&self, x: usize, y: usize) -> usize {
        (x - 1) * self.n_sites + (y - 1)
    }

    /// Amplitude at 1-based sites `(x, y)`.
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.values[self.idx(x, y)]
    }

    /// Sets both `(x, y)` and `(y, x)`.
    pub fn set_symmetric(&mut self, x: usize, y: usize, v: Complex64) {
        let a = self.idx(x, y);
        let b = self.idx(y, x);
        self.values[a] = v;
        self.values[b] = v;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (1..=self.n_sites).all(|x| (x..=self.n_sites).all(|y| self.get(x, y) == self.get(y, x)))
    }

    /// `|χ(x, y)|²` in row-major order.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn map_inplace(&mut self, f: impl Fn(Complex64) -> Complex64) {
        for v in &mut self.values {
            *v = f(*v);
        }
    }
}

/// `χ(x, y)` of the emitter-unexcited two-photon component of `state`.
///
/// Multiset coefficients map as `c_{xx} → χ(x, x)` and
/// `c_{x<y} → χ(x, y) = χ(y, x) = c_{xy}/√2`.
pub fn symmetrized_amplitude_view(state: &StateVector) -> Result<TwoPhotonGrid> {
    let basis = state.basis();
    if basis.n_exc() != 2 {
        return Err(Error::Consistency(format!(
            "two-photon view needs the 2-excitation sector, got {}",
            basis.n_exc()
        )));
    }
    let mut grid = TwoPhotonGrid::zeros(basis.n_sites());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for (c, &a) in basis.configs().iter().zip(state.amps()) {
        if c.total_emitter_occ() != 0 {
            continue;
        }
        let (x, y) = (c.photons[0] as usize, c.photons[1] as usize);
        if x == y {
            grid.set_symmetric(x, y, a);
        } else {
            grid.set_symmetric(x, y, a * s);
        }
    }
    Ok(grid)
}

/// Inverse of [`symmetrized_amplitude_view`]: a 2-excitation state whose
/// emitter-excited components are zero.
pub fn grid_to_state(grid: &TwoPhotonGrid, basis: &Arc<SectorBasis>) -> Result<StateVector> {
    if basis.n_exc() != 2 || basis.n_sites() != grid.n_sites {
        return Err(Error::Consistency(format!(
            "grid on {} sites does not fit a {}-excitation basis on {} sites",
            grid.n_sites,
            basis.n_exc(),
            basis.n_sites()
        )));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let amps = basis
        .configs()
        .iter()
        .map(|c| {
            if c.total_emitter_occ() != 0 {
                return Complex64::new(0.0, 0.0);
            }
            let (x, y) = (c.photons[0] as usize, c.photons[1] as usize);
            if x == y {
                grid.get(x, y)
            } else {
                grid.get(x, y) * sqrt2
            }
        })
        .collect();
    StateVector::from_amps(basis.clone(), amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EmitterKind, ModelSpec};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    // Brute-force oracle: all occupation vectors over (emitters, sites) with
    // the right total, respecting caps.
    fn brute_force_dim(n_sites: usize, max_occ: &[usize], n_exc: usize) -> usize {
        let modes = max_occ.len() + n_sites;
        let caps: Vec<usize> = max_occ
            .iter()
            .copied()
            .chain(std::iter::repeat_n(n_exc, n_sites))
            .collect();
        let mut set = BTreeSet::new();
        let mut occ = vec![0usize; modes];
        fn rec(i: usize, left: usize, caps: &[usize], occ: &mut Vec<usize>, set: &mut BTreeSet<Vec<usize>>) {
            if i == caps.len() {
                if left == 0 {
                    set.insert(occ.clone());
                }
                return;
            }
            for o in 0..=caps[i].min(left) {
                occ[i] = o;
                rec(i + 1, left - o, caps, occ, set);
            }
            occ[i] = 0;
        }
        rec(0, n_exc, &caps, &mut occ, &mut set);
        set.len()
    }

    #[test]
    fn dims_match_enumeration_oracle() {
        for s in 1..=10 {
            let m = ModelSpec::mirror_qubit(s.max(1), 0.5, 1).unwrap();
            for n in 0..=3 {
                let b = SectorBasis::new(&m, n).unwrap();
                assert_eq!(b.dim(), brute_force_dim(s, &[1], n), "S={s} N={n}");
            }
            let b1 = SectorBasis::new(&m, 1).unwrap();
            assert_eq!(b1.dim(), s + 1);
            let b2 = SectorBasis::new(&m, 2).unwrap();
            assert_eq!(b2.dim(), s * (s + 1) / 2 + s);
        }
    }

    #[test]
    fn spec_dimensions() {
        let m = ModelSpec::mirror_qubit(4, 0.5, 2).unwrap();
        assert_eq!(SectorBasis::new(&m, 2).unwrap().dim(), 14);
        assert_eq!(SectorBasis::new(&m, 0).unwrap().dim(), 1);
        let mb = m.with_kind(EmitterKind::Bosonic { u: 1.0, max_occ: 2 }).unwrap();
        let b = SectorBasis::new(&mb, 2).unwrap();
        assert_eq!(b.dim(), 15);
        assert_eq!(b.dim(), brute_force_dim(4, &[2], 2));
        assert!(b.index_of(&BasisConfig::new(&[2], &[])).is_some());
    }

    #[test]
    fn two_emitter_dims() {
        let m = ModelSpec::two_qubits(7, 0.5, 2, 4).unwrap();
        for n in 0..=3 {
            let b = SectorBasis::new(&m, n).unwrap();
            assert_eq!(b.dim(), brute_force_dim(7, &[1, 1], n));
        }
    }

    #[test]
    fn rejects_four_excitations() {
        let m = ModelSpec::mirror_qubit(4, 0.5, 2).unwrap();
        assert!(matches!(SectorBasis::new(&m, 4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn index_is_bijection_and_sorted() {
        let m = ModelSpec::two_qubits(9, 0.5, 3, 4)
            .unwrap()
            .with_kind(EmitterKind::Bosonic { u: 0.0, max_occ: 3 })
            .unwrap();
        for n in 0..=3 {
            let b = SectorBasis::new(&m, n).unwrap();
            for (i, c) in b.configs().iter().enumerate() {
                assert_eq!(b.index_of(c), Some(i));
            }
            for w in b.configs().windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn single_pair_view() {
        let m = ModelSpec::mirror_qubit(8, 0.5, 2).unwrap();
        let b = SectorBasis::shared(&m, 2).unwrap();
        let i = b.index_of(&BasisConfig::new(&[0], &[2, 5])).unwrap();
        let psi = StateVector::basis_state(b.clone(), i);
        let g = symmetrized_amplitude_view(&psi).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((g.get(2, 5).re - h).abs() < 1e-15);
        assert_eq!(g.get(2, 5), g.get(5, 2));
        assert!((g.norm_sqr() - 1.0).abs() < 1e-15);

        let j = b.index_of(&BasisConfig::new(&[0], &[3, 3])).unwrap();
        let g = symmetrized_amplitude_view(&StateVector::basis_state(b.clone(), j)).unwrap();
        assert_eq!(g.get(3, 3), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn view_rejects_other_sectors() {
        let m = ModelSpec::mirror_qubit(8, 0.5, 2).unwrap();
        let b = SectorBasis::shared(&m, 1).unwrap();
        assert!(symmetrized_amplitude_view(&StateVector::basis_state(b, 0)).is_err());
    }

    fn random_two_photon(n_sites: usize, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = ModelSpec::mirror_qubit(n_sites, 0.5, 2).unwrap();
        let b = SectorBasis::shared(&m, 2).unwrap();
        let amps: Vec<Complex64> = b
            .configs()
            .iter()
            .map(|c| {
                if c.total_emitter_occ() == 0 {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let mut psi = StateVector::from_amps(b, amps).unwrap();
        psi.normalize();
        psi
    }

    #[test]
    fn random_state_view_is_normalized() {
        let psi = random_two_photon(12, 7);
        let g = symmetrized_amplitude_view(&psi).unwrap();
        // direct summation over the full ordered grid
        let mut total = 0.0;
        for x in 1..=12 {
            for y in 1..=12 {
                total += g.get(x, y).norm_sqr();
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert!(g.is_symmetric());
    }

    proptest! {
        #[test]
        fn grid_round_trip(seed in 0u64..1000, n in 2usize..9) {
            let psi = random_two_photon(n, seed);
            let g = symmetrized_amplitude_view(&psi).unwrap();
            let back = grid_to_state(&g, psi.basis_arc()).unwrap();
            let g2 = symmetrized_amplitude_view(&back).unwrap();
            for x in 1..=n {
                for y in 1..=n {
                    prop_assert!((g.get(x, y) - g2.get(x, y)).norm() < 1e-15);
                }
            }
        }

        #[test]
        fn rank_matches_position(n_sites in 1usize..15, k in 0usize..4) {
            let mut p = vec![1u32; k];
            let mut i = 0usize;
            loop {
                prop_assert_eq!(multiset_rank(&p, n_sites), i);
                i += 1;
                if !next_multiset(&mut p, n_sites as u32) { break; }
            }
            prop_assert_eq!(i, multiset_count(n_sites, k));
        }
    }
}
