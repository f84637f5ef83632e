//! XXZ chain, its link decomposition, and long-range XY couplings.

mod sector;
mod trap;

pub use sector::Sector;
pub use trap::{equilibrium_positions, mode_sum_couplings, transverse_modes, NormalModes, TrapParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, kron, pauli, CMat, RMat};

/// Nearest-neighbour link operator h_j on sites (j, j+1).
#[derive(Clone, Debug)]
pub struct LinkTerm {
    pub site_pair: (usize, usize),
    /// 4×4 block in the two-site basis ↓↓, ↓↑, ↑↓, ↑↑.
    pub matrix: CMat,
}

/// Two-site block (J/2)(S⁺S⁻ + S⁻S⁺) + JΔ S^zS^z.
pub fn link_block(j: f64, delta: f64) -> CMat {
    let sp = pauli::sigma_plus() * c(1.0);
    let sm = pauli::sigma_minus() * c(1.0);
    let sz = pauli::spin_z();
    (kron(&sp, &sm) + kron(&sm, &sp)) * c(j / 2.0) + kron(&sz, &sz) * c(j * delta)
}

/// Parameters of an XXZ chain; the JSON form of [`SpinModel`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub j: f64,
    pub delta: f64,
}

/// Open-boundary XXZ chain H = J Σ_j (S^x S^x + S^y S^y + Δ S^z S^z).
#[derive(Clone, Debug)]
pub struct SpinModel {
    pub n_sites: usize,
    pub coupling_j: f64,
    pub anisotropy_delta: f64,
    pub links: Vec<LinkTerm>,
}

pub fn build_xxz(n: usize, j: f64, delta: f64) -> Result<SpinModel> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("XXZ chain needs at least 2 sites, got {n}")));
    }
    let block = link_block(j, delta);
    let links = (0..n - 1)
        .map(|s| LinkTerm {
            site_pair: (s, s + 1),
            matrix: block.clone(),
        })
        .collect();
    Ok(SpinModel {
        n_sites: n,
        coupling_j: j,
        anisotropy_delta: delta,
        links,
    })
}

impl SpinModel {
    pub fn from_params(p: &ModelParams) -> Result<Self> {
        build_xxz(p.n, p.j, p.delta)
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            n: self.n_sites,
            j: self.coupling_j,
            delta: self.anisotropy_delta,
        }
    }

    /// Dense Hamiltonian over the full register (≤ 12 sites).
    pub fn dense_hamiltonian(&self) -> Result<CMat> {
        let terms: Vec<_> = self
            .links
            .iter()
            .map(|l| (1.0, vec![l.site_pair.0, l.site_pair.1], l.matrix.clone()))
            .collect();
        assemble_operator(self.n_sites, &terms)
    }

    /// Diagonal energy of a basis state and its flip-flop partners.
    fn diagonal(&self, state: usize) -> f64 {
        let n = self.n_sites;
        let mut e = 0.0;
        for s in 0..n - 1 {
            let same = linalg::site_bit(state, n, s) == linalg::site_bit(state, n, s + 1);
            e += if same { 0.25 } else { -0.25 };
        }
        e * self.coupling_j * self.anisotropy_delta
    }

    /// Real symmetric Hamiltonian restricted to a magnetization sector.
    pub fn sector_matrix(&self, sector: &Sector) -> RMat {
        let dim = sector.dim();
        let mut m = RMat::zeros(dim, dim);
        let n = self.n_sites;
        for (col, &state) in sector.states().iter().enumerate() {
            m[(col, col)] = self.diagonal(state);
            for s in 0..n - 1 {
                if linalg::site_bit(state, n, s) != linalg::site_bit(state, n, s + 1) {
                    let flipped = state ^ linalg::site_mask(n, s) ^ linalg::site_mask(n, s + 1);
                    if let Some(row) = sector.position(flipped) {
                        m[(row, col)] += 0.5 * self.coupling_j;
                    }
                }
            }
        }
        m
    }

    /// y ← H x within `sector`, matrix-free.
    pub fn apply_sector(&self, sector: &Sector, x: &[f64], y: &mut [f64]) {
        let n = self.n_sites;
        let half_j = 0.5 * self.coupling_j;
        for (col, &state) in sector.states().iter().enumerate() {
            y[col] = self.diagonal(state) * x[col];
        }
        for (col, &state) in sector.states().iter().enumerate() {
            let xc = x[col];
            if xc == 0.0 {
                continue;
            }
            for s in 0..n - 1 {
                if linalg::site_bit(state, n, s) != linalg::site_bit(state, n, s + 1) {
                    let flipped = state ^ linalg::site_mask(n, s) ^ linalg::site_mask(n, s + 1);
                    if let Some(row) = sector.position(flipped) {
                        y[row] += half_j * xc;
                    }
                }
            }
        }
    }

    /// y ← H x over the full 2^N register, matrix-free.
    pub fn apply_full(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n_sites;
        let half_j = 0.5 * self.coupling_j;
        y.iter_mut().for_each(|v| *v = 0.0);
        for (state, &xs) in x.iter().enumerate() {
            if xs == 0.0 {
                continue;
            }
            y[state] += self.diagonal(state) * xs;
            for s in 0..n - 1 {
                if linalg::site_bit(state, n, s) != linalg::site_bit(state, n, s + 1) {
                    y[state ^ linalg::site_mask(n, s) ^ linalg::site_mask(n, s + 1)] += half_j * xs;
                }
            }
        }
    }

    /// Exact spectral bounds (E_min, E_max) by dense diagonalization of every
    /// magnetization sector.
    pub fn spectral_bounds(&self) -> Result<(f64, f64)> {
        linalg::check_dense_size(self.n_sites)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n_up in 0..=self.n_sites {
            let sector = Sector::new(self.n_sites, n_up);
            let (vals, _) = linalg::eigh_real(&self.sector_matrix(&sector));
            lo = lo.min(vals[0]);
            hi = hi.max(*vals.last().unwrap());
        }
        Ok((lo, hi))
    }
}

/// Σ_k c_k · (identity ⊗ block_k ⊗ identity) on an `n_sites` register. Each
/// term lists the sites its block acts on (first tensor factor first).
pub fn assemble_operator(n_sites: usize, terms: &[(f64, Vec<usize>, CMat)]) -> Result<CMat> {
    linalg::check_dense_size(n_sites)?;
    let dim = 1usize << n_sites;
    let mut out = CMat::zeros(dim, dim);
    for (coef, sites, block) in terms {
        if *coef == 0.0 {
            continue;
        }
        out += linalg::embed_operator(n_sites, sites, block)? * c(*coef);
    }
    Ok(out)
}

/// Symmetric XY coupling matrix J_ij with zero diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub n: usize,
    /// Row-major N×N values.
    pub values: Vec<f64>,
}

impl CouplingMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Mismatch(format!("{} coupling values for {n} sites", values.len())));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter("coupling diagonal must be zero".into()));
            }
            for j in 0..i {
                if (values[i * n + j] - values[j * n + i]).abs() > 1e-12 * values[i * n + j].abs().max(1.0) {
                    return Err(Error::InvalidParameter(format!("couplings not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, values })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Multiply every entry by `factor` (e.g. to convert rad/s into units of J₀).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Nearest-neighbour row J_{i,i+1}.
    pub fn nearest_neighbour(&self) -> Vec<f64> {
        (0..self.n.saturating_sub(1)).map(|i| self.get(i, i + 1)).collect()
    }

    /// H_XY = Σ_{i<j} J_ij (σ⁺_i σ⁻_j + σ⁻_i σ⁺_j) restricted to a sector.
    pub fn xy_sector_matrix(&self, sector: &Sector) -> RMat {
        let n = self.n;
        let dim = sector.dim();
        let mut m = RMat::zeros(dim, dim);
        for (col, &state) in sector.states().iter().enumerate() {
            for i in 0..n {
                for j in i + 1..n {
                    if linalg::site_bit(state, n, i) != linalg::site_bit(state, n, j) {
                        let flipped = state ^ linalg::site_mask(n, i) ^ linalg::site_mask(n, j);
                        if let Some(row) = sector.position(flipped) {
                            m[(row, col)] += self.get(i, j);
                        }
                    }
                }
            }
        }
        m
    }
}

/// J_ij = J₀ / |i − j|^α.
pub fn power_law_couplings(n: usize, j0: f64, alpha: f64) -> Result<CouplingMatrix> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("need at least 2 sites, got {n}")));
    }
    if !(j0 > 0.0) || !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("need j0 > 0 and alpha >= 0 (got {j0}, {alpha})")));
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                values[i * n + j] = j0 / ((i as f64 - j as f64).abs()).powf(alpha);
            }
        }
    }
    CouplingMatrix::new(n, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, hermitian_defect, max_abs_diff};

    fn commutator_norm(a: &CMat, b: &CMat) -> f64 {
        (a * b - b * a).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn two_site_spectrum() {
        let m = build_xxz(2, 1.0, 1.0).unwrap();
        let ev = eigvalsh(&m.dense_hamiltonian().unwrap());
        let expected = [-0.75, 0.25, 0.25, 0.25];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_single_site() {
        assert!(matches!(build_xxz(1, 1.0, 1.0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn links_sum_to_xxz_matrix() {
        let model = build_xxz(4, 1.0, 0.7).unwrap();
        // direct construction from spin operators
        let (sx, sy, sz) = (pauli::spin_x(), pauli::spin_y(), pauli::spin_z());
        let mut direct = CMat::zeros(16, 16);
        for s in 0..3 {
            for (op, w) in [(&sx, 1.0), (&sy, 1.0), (&sz, 0.7)] {
                direct += linalg::embed_operator(4, &[s, s + 1], &kron(op, op)).unwrap() * c(w);
            }
        }
        let h = model.dense_hamiltonian().unwrap();
        assert!(max_abs_diff(&h, &direct) < 1e-12);
        assert!(hermitian_defect(&h) < 1e-12);
        for l in &model.links {
            assert!(hermitian_defect(&l.matrix) < 1e-15);
            assert_eq!(l.site_pair.1, l.site_pair.0 + 1);
        }
        assert_eq!(model.links.len(), 3);
    }

    #[test]
    fn symmetries_commute() {
        let model = build_xxz(5, 1.0, 1.3).unwrap();
        let h = model.dense_hamiltonian().unwrap();
        let mut mz = CMat::zeros(32, 32);
        let mut parity = CMat::identity(1, 1);
        for s in 0..5 {
            mz += linalg::embed_operator(5, &[s], &pauli::spin_z()).unwrap();
            parity = kron(&parity, &pauli::sigma_x());
        }
        assert!(commutator_norm(&h, &mz) < 1e-12);
        assert!(commutator_norm(&h, &parity) < 1e-12);
    }

    #[test]
    fn sector_blocks_reproduce_dense_spectrum() {
        let model = build_xxz(6, 1.0, 0.5).unwrap();
        let mut all = Vec::new();
        for n_up in 0..=6 {
            let sector = Sector::new(6, n_up);
            all.extend(linalg::eigh_real(&model.sector_matrix(&sector)).0);
            // matrix-free action agrees with the assembled block
            let m = model.sector_matrix(&sector);
            let x: Vec<f64> = (0..sector.dim()).map(|k| (k as f64 * 0.37).sin()).collect();
            let mut y = vec![0.0; sector.dim()];
            model.apply_sector(&sector, &x, &mut y);
            let yd = &m * nalgebra::DVector::from_vec(x);
            for (a, b) in y.iter().zip(yd.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        all.sort_by(f64::total_cmp);
        let dense = eigvalsh(&model.dense_hamiltonian().unwrap());
        for (a, b) in all.iter().zip(dense) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn power_law_ratio() {
        let cm = power_law_couplings(3, 1.0, 0.82).unwrap();
        assert!((cm.get(0, 2) / cm.get(0, 1) - 2f64.powf(-0.82)).abs() < 1e-15);
        assert!((cm.get(0, 2) / cm.get(0, 1) - 0.5664).abs() < 1e-4);
        let flat = power_law_couplings(5, 2.5, 0.0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(flat.get(i, j), if i == j { 0.0 } else { 2.5 });
            }
        }
    }

    #[test]
    fn power_law_51_nearest_neighbour_row_is_flat() {
        let cm = power_law_couplings(51, 1.0, 0.82).unwrap();
        let nn = cm.nearest_neighbour();
        assert!(nn.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        for i in 0..51 {
            for j in 0..51 {
                if i != j {
                    let r = cm.get(i, j) * ((i as f64 - j as f64).abs()).powf(0.82);
                    assert!((0.999..=1.001).contains(&r));
                }
            }
        }
    }

    #[test]
    fn assemble_single_link_is_link_block() {
        let block = link_block(1.0, 1.0);
        let m = assemble_operator(2, &[(1.0, vec![0, 1], block.clone())]).unwrap();
        assert!(max_abs_diff(&m, &block) < 1e-15);
    }

    #[test]
    fn assemble_weighted_links_matches_kronecker() {
        let block = link_block(1.0, 1.0);
        let id = pauli::identity();
        let oracle = kron(&block, &id) * c(2.0) + kron(&id, &block) * c(3.0);
        let m = assemble_operator(3, &[(2.0, vec![0, 1], block.clone()), (3.0, vec![1, 2], block)]).unwrap();
        assert!(max_abs_diff(&m, &oracle) < 1e-14);
    }

    #[test]
    fn assemble_rejects_oversized_register() {
        let r = assemble_operator(13, &[]);
        assert!(matches!(r, Err(Error::SizeCap(_))));
    }

    #[test]
    fn json_shapes() {
        let p = build_xxz(4, 1.0, 1.7).unwrap().params();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"n":4,"j":1.0,"delta":1.7}"#);
        let cm = power_law_couplings(2, 1.0, 1.0).unwrap();
        assert_eq!(serde_json::to_string(&cm).unwrap(), r#"{"n":2,"values":[0.0,1.0,1.0,0.0]}"#);
    }
}
