//! Entanglement-Hamiltonian ansätze, Gibbs states, and the least-squares
//! fit of measured outcome frequencies.

mod fit;

pub use fit::{chi_squared, chi_squared_with_gradient, cft_initial, fit_eh, fit_table, FitOptions, FitResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::statekit::DensityMatrix;

/// Subsystem layout in source-site indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Contiguous { start: usize, len: usize },
    /// Intervals A = [a_start, a_start + a_len) and B after it.
    TwoIntervals {
        a_start: usize,
        a_len: usize,
        b_start: usize,
        b_len: usize,
    },
}

impl Geometry {
    pub fn contiguous(start: usize, len: usize) -> Self {
        Geometry::Contiguous { start, len }
    }

    pub fn two_intervals(a_start: usize, a_len: usize, b_start: usize, b_len: usize) -> Self {
        Geometry::TwoIntervals {
            a_start,
            a_len,
            b_start,
            b_len,
        }
    }

    /// Ascending source sites.
    pub fn sites(&self) -> Vec<usize> {
        match *self {
            Geometry::Contiguous { start, len } => (start..start + len).collect(),
            Geometry::TwoIntervals {
                a_start,
                a_len,
                b_start,
                b_len,
            } => (a_start..a_start + a_len).chain(b_start..b_start + b_len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Geometry::Contiguous { len, .. } => len,
            Geometry::TwoIntervals { a_len, b_len, .. } => a_len + b_len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sites strictly between the intervals (0 for a contiguous block).
    pub fn separation(&self) -> usize {
        match *self {
            Geometry::Contiguous { .. } => 0,
            Geometry::TwoIntervals {
                a_start, a_len, b_start, ..
            } => b_start - (a_start + a_len),
        }
    }

    /// Interval lengths in subsystem order.
    fn blocks(&self) -> Vec<usize> {
        match *self {
            Geometry::Contiguous { len, .. } => vec![len],
            Geometry::TwoIntervals { a_len, b_len, .. } => vec![a_len, b_len],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Geometry::Contiguous { len, .. } if len < 2 => {
                Err(Error::InvalidSize("subsystem needs at least 2 sites".into()))
            }
            Geometry::TwoIntervals {
                a_start,
                a_len,
                b_start,
                b_len,
            } if a_len == 0 || b_len == 0 || b_start < a_start + a_len => Err(Error::InvalidParameter(
                "intervals must be non-empty, with B after A".into(),
            )),
            _ => linalg::check_dense_size(self.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// One β per nearest-neighbour link.
    LocalLinks,
    /// β_j = q₀ + q₁ j + q₂ j² on links j = 1, 2, ….
    Polynomial,
    /// β_ij Ŝ_i·Ŝ_j on intra-interval links and, optionally, every pair
    /// with one site in each interval.
    Bilocal { cross_links: bool },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::LocalLinks => "local-links",
            Variant::Polynomial => "polynomial",
            Variant::Bilocal { .. } => "bilocal",
        }
    }
}

/// Family of entanglement Hamiltonians H̃ = Σ_k c_k Ŝ_{i_k}·Ŝ_{j_k} with
/// Ŝ = (Sˣ, Sʸ, √Δ Sᶻ) and coefficients c linear in the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EHAnsatz {
    pub variant: Variant,
    pub geometry: Geometry,
    pub anisotropy_delta: f64,
}

impl EHAnsatz {
    pub fn new(variant: Variant, geometry: Geometry, anisotropy_delta: f64) -> Result<Self> {
        geometry.validate()?;
        if variant == Variant::Polynomial && !matches!(geometry, Geometry::Contiguous { .. }) {
            return Err(Error::InvalidParameter("polynomial profile needs a contiguous subsystem".into()));
        }
        Ok(Self {
            variant,
            geometry,
            anisotropy_delta,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.len()
    }

    /// Site pairs (subsystem positions) carrying one coefficient each.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let blocks = self.geometry.blocks();
        let mut pairs = Vec::new();
        let mut offset = 0;
        for len in &blocks {
            pairs.extend((offset..offset + len - 1).map(|p| (p, p + 1)));
            offset += len;
        }
        if let Variant::Bilocal { cross_links: true } = self.variant {
            let a = blocks[0];
            for i in 0..a {
                for j in a..self.n_sites() {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    pub fn n_params(&self) -> usize {
        match self.variant {
            Variant::Polynomial => 3,
            _ => self.pairs().len(),
        }
    }

    /// Coefficients c = A·params of every pair term.
    pub fn coefficients(&self, params: &[f64]) -> Result<Vec<f64>> {
        if params.len() != self.n_params() {
            return Err(Error::Mismatch(format!(
                "{} ansatz takes {} parameters, got {}",
                self.variant.name(),
                self.n_params(),
                params.len()
            )));
        }
        Ok(match self.variant {
            Variant::Polynomial => (1..self.n_sites())
                .map(|j| {
                    let j = j as f64;
                    params[0] + params[1] * j + params[2] * j * j
                })
                .collect(),
            _ => params.to_vec(),
        })
    }

    /// Pull a gradient with respect to coefficients back to parameters.
    pub fn pull_back(&self, coeff_grad: &[f64]) -> Vec<f64> {
        match self.variant {
            Variant::Polynomial => {
                let mut g = [0.0; 3];
                for (k, v) in coeff_grad.iter().enumerate() {
                    let j = (k + 1) as f64;
                    g[0] += v;
                    g[1] += v * j;
                    g[2] += v * j * j;
                }
                g.to_vec()
            }
            _ => coeff_grad.to_vec(),
        }
    }

    pub(crate) fn pair_operator(&self, pair: (usize, usize)) -> PairOperator {
        PairOperator {
            n: self.n_sites(),
            masks: (
                1usize << (self.n_sites() - 1 - pair.0),
                1usize << (self.n_sites() - 1 - pair.1),
            ),
            delta: self.anisotropy_delta,
        }
    }
}

/// Sˣ_iSˣ_j + Sʸ_iSʸ_j + Δ Sᶻ_iSᶻ_j on a register, applied without storing
/// the matrix.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairOperator {
    n: usize,
    masks: (usize, usize),
    delta: f64,
}

impl PairOperator {
    /// Calls `f(row, col, value)` for every non-zero element.
    pub(crate) fn for_each(&self, mut f: impl FnMut(usize, usize, f64)) {
        let (mi, mj) = self.masks;
        for s in 0..(1usize << self.n) {
            let same = (s & mi != 0) == (s & mj != 0);
            if same {
                f(s, s, 0.25 * self.delta);
            } else {
                f(s, s, -0.25 * self.delta);
                f(s ^ mi ^ mj, s, 0.5);
            }
        }
    }

    /// Tr(M O).
    pub(crate) fn trace_with(&self, m: &CMat) -> f64 {
        let mut acc = 0.0;
        self.for_each(|r, col, v| acc += v * m[(col, r)].re);
        acc
    }
}

/// H̃ for the given parameters on the subsystem register.
pub fn build_eh(ansatz: &EHAnsatz, params: &[f64]) -> Result<CMat> {
    let coeffs = ansatz.coefficients(params)?;
    let dim = 1usize << ansatz.n_sites();
    let mut h = CMat::zeros(dim, dim);
    for (pair, coef) in ansatz.pairs().into_iter().zip(coeffs) {
        if coef != 0.0 {
            ansatz.pair_operator(pair).for_each(|r, col, v| h[(r, col)] += c(coef * v));
        }
    }
    Ok(h)
}

/// ρ = e^{−H̃}/Z with its eigendecomposition.
#[derive(Clone, Debug)]
pub struct GibbsState {
    pub eh_matrix: CMat,
    pub rho: DensityMatrix,
    pub log_partition: f64,
    /// Eigenvalues of H̃, ascending.
    pub eh_eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

pub fn gibbs_state(eh: &CMat) -> Result<GibbsState> {
    let dim = eh.nrows();
    if eh.ncols() != dim || !dim.is_power_of_two() {
        return Err(Error::Mismatch(format!("{}x{} is not a register operator", eh.nrows(), eh.ncols())));
    }
    let n = dim.trailing_zeros() as usize;
    linalg::check_dense_size(n)?;
    let defect = linalg::hermitian_defect(eh);
    if defect > 1e-10 {
        return Err(Error::InvalidParameter(format!("entanglement Hamiltonian not Hermitian ({defect:.2e})")));
    }
    let (vals, vecs) = linalg::eigh(eh);
    let shift = vals[0];
    let weights: Vec<f64> = vals.iter().map(|v| (-(v - shift)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let scaled: Vec<_> = weights.iter().map(|w| c(w / z)).collect();
    let matrix = linalg::scale_columns(&vecs, &scaled) * vecs.adjoint();
    Ok(GibbsState {
        eh_matrix: eh.clone(),
        rho: DensityMatrix { n_sites: n, matrix },
        log_partition: z.ln() - shift,
        eh_eigenvalues: vals,
        eigenvectors: vecs,
    })
}

/// ξ_α = eigenvalues of H̃ + log Z, ascending, so that Σ e^{−ξ} = 1.
pub fn entanglement_spectrum(gibbs: &GibbsState) -> Vec<f64> {
    gibbs.eh_eigenvalues.iter().map(|v| v + gibbs.log_partition).collect()
}

/// ξ_α = −log λ_α of a density matrix, ascending; zero eigenvalues map to +∞.
pub fn spectrum_of(rho: &DensityMatrix) -> Vec<f64> {
    let mut xi: Vec<f64> = rho
        .eigenvalues()
        .iter()
        .map(|&l| if l > 0.0 { -l.ln() } else { f64::INFINITY })
        .collect();
    xi.sort_by(f64::total_cmp);
    xi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, max_abs_diff, pauli};
    use crate::spinmodel::build_xxz;

    #[test]
    fn unit_links_give_the_chain_hamiltonian() {
        let a = EHAnsatz::new(Variant::LocalLinks, Geometry::contiguous(3, 4), 1.3).unwrap();
        let h = build_eh(&a, &[1.0; 3]).unwrap();
        let model = build_xxz(4, 1.0, 1.3).unwrap();
        assert!(max_abs_diff(&h, &model.dense_hamiltonian().unwrap()) < 1e-14);
    }

    #[test]
    fn polynomial_profile_values() {
        let a = EHAnsatz::new(Variant::Polynomial, Geometry::contiguous(0, 6), 1.0).unwrap();
        assert_eq!(a.coefficients(&[0.0, 0.0, 1.0]).unwrap(), vec![1.0, 4.0, 9.0, 16.0, 25.0]);
    }

    #[test]
    fn bilocal_cross_link_matches_kronecker() {
        let a = EHAnsatz::new(Variant::Bilocal { cross_links: true }, Geometry::two_intervals(0, 2, 3, 2), 1.0).unwrap();
        let pairs = a.pairs();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (0, 2), (0, 3), (1, 2), (1, 3)]);
        let mut params = vec![0.0; 6];
        params[3] = 2.0; // sites 0 and 4 of the chain
        let h = build_eh(&a, &params).unwrap();
        let id = pauli::identity();
        let mut oracle = CMat::zeros(16, 16);
        for s in [pauli::spin_x(), pauli::spin_y(), pauli::spin_z()] {
            oracle += kron(&kron(&kron(&s, &id), &id), &s) * c(2.0);
        }
        assert!(max_abs_diff(&h, &oracle) < 1e-14);
        assert_eq!(a.geometry.separation(), 1);
        assert_eq!(a.geometry.sites(), vec![0, 1, 3, 4]);
    }

    #[test]
    fn infinite_temperature() {
        let g = gibbs_state(&CMat::zeros(8, 8)).unwrap();
        assert!((g.log_partition - 3.0 * 2f64.ln()).abs() < 1e-14);
        assert!(max_abs_diff(&g.rho.matrix, &DensityMatrix::maximally_mixed(3).matrix) < 1e-15);
        let one = gibbs_state(&CMat::zeros(2, 2)).unwrap();
        let xi = entanglement_spectrum(&one);
        assert!((xi[0] - 2f64.ln()).abs() < 1e-15 && (xi[1] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn strong_link_freezes_into_singlet() {
        let a = EHAnsatz::new(Variant::LocalLinks, Geometry::contiguous(0, 3), 1.0).unwrap();
        let g = gibbs_state(&build_eh(&a, &[60.0, 0.0]).unwrap()).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let singlet = CMat::from_column_slice(4, 1, &[c(0.0), c(h), c(-h), c(0.0)]);
        let oracle = kron(&(&singlet * singlet.adjoint()), &(pauli::identity() * c(0.5)));
        assert!(max_abs_diff(&g.rho.matrix, &oracle) < 1e-12);
    }

    #[test]
    fn shift_is_absorbed_by_partition() {
        let a = EHAnsatz::new(Variant::LocalLinks, Geometry::contiguous(0, 3), 0.7).unwrap();
        let h = build_eh(&a, &[1.5, 0.4]).unwrap();
        let g1 = gibbs_state(&h).unwrap();
        let g2 = gibbs_state(&(&h + CMat::identity(8, 8) * c(3.25))).unwrap();
        assert!(max_abs_diff(&g1.rho.matrix, &g2.rho.matrix) < 1e-14);
        assert!((g2.log_partition - g1.log_partition + 3.25).abs() < 1e-12);
        let (x1, x2) = (entanglement_spectrum(&g1), entanglement_spectrum(&g2));
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12);
        }
        assert!((x1.iter().map(|x| (-x).exp()).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
