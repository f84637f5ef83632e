//! Pure states, density matrices, and the state-preparation routines:
//! exact eigenstates, variational circuits, and heated states.

mod circuit;
mod eigen;
mod vqe;

pub use circuit::{apply_xy_evolution, apply_z_rotation, run_circuit, CircuitParams, XyPropagator};
pub use eigen::{dense_spectrum, excited_states, ground_state, lanczos_lowest, EigenOptions, LanczosResult};
pub use vqe::{energy_from_samples, exact_energy, exact_warm_start, vqe_optimize, VqeConfig, VqeResult};

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, ZERO};
use crate::spinmodel::Sector;

/// Magic prefix of the binary state file.
pub const STATE_MAGIC: &[u8; 9] = b"EHTSTATE1";

/// Normalized state vector over 2^N basis states (site 0 is the most
/// significant bit).
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    pub n_sites: usize,
    pub amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(n_sites: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1usize << n_sites {
            return Err(Error::Mismatch(format!(
                "{} amplitudes for {n_sites} sites",
                amplitudes.len()
            )));
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("state norm² = {norm2}, expected 1")));
        }
        Ok(Self { n_sites, amplitudes })
    }

    /// Normalizes `amplitudes` before constructing the state.
    pub fn normalized(n_sites: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("cannot normalize a zero vector".into()));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Self::new(n_sites, amplitudes)
    }

    pub fn basis(n_sites: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n_sites];
        amplitudes[index] = c(1.0);
        Self { n_sites, amplitudes }
    }

    /// Basis state from a bitstring ('1' = ↑, first character = site 0).
    pub fn from_bitstring(bits: &str) -> Result<Self> {
        let index = parse_bitstring(bits)?;
        Ok(Self::basis(bits.len(), index))
    }

    /// Embed real sector coefficients into the full register.
    pub fn from_sector(sector: &Sector, coeffs: &[f64]) -> Result<Self> {
        let mut amplitudes = vec![ZERO; 1 << sector.n_sites()];
        for (&s, &v) in sector.states().iter().zip(coeffs) {
            amplitudes[s] = c(v);
        }
        Self::normalized(sector.n_sites(), amplitudes)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Probability weight in each up-count sector, indexed by number of ↑.
    pub fn sector_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_sites + 1];
        for (s, a) in self.amplitudes.iter().enumerate() {
            w[s.count_ones() as usize] += a.norm_sqr();
        }
        w
    }

    /// ⟨Σ_j S^z_j⟩.
    pub fn total_sz(&self) -> f64 {
        self.sector_weights()
            .iter()
            .enumerate()
            .map(|(up, w)| w * (up as f64 - self.n_sites as f64 / 2.0))
            .sum()
    }

    /// Apply ⊗σ^x (global spin flip).
    pub fn spin_flipped(&self) -> Self {
        let all = (1usize << self.n_sites) - 1;
        let amplitudes = (0..self.amplitudes.len()).map(|s| self.amplitudes[s ^ all]).collect();
        Self {
            n_sites: self.n_sites,
            amplitudes,
        }
    }

    pub fn expectation(&self, op: &CMat) -> Complex64 {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        (v.adjoint() * op * &v)[(0, 0)]
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(STATE_MAGIC)?;
        w.write_all(&(self.n_sites as u32).to_le_bytes())?;
        for a in &self.amplitudes {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 9];
        r.read_exact(&mut magic)?;
        if &magic != STATE_MAGIC {
            return Err(Error::Parse("not an EHTSTATE1 file".into()));
        }
        let mut n = [0u8; 4];
        r.read_exact(&mut n)?;
        let n_sites = u32::from_le_bytes(n) as usize;
        if n_sites > 30 {
            return Err(Error::Parse(format!("implausible site count {n_sites}")));
        }
        let mut amplitudes = Vec::with_capacity(1 << n_sites);
        let mut buf = [0u8; 16];
        for _ in 0..(1usize << n_sites) {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            amplitudes.push(Complex64::new(re, im));
        }
        Self::new(n_sites, amplitudes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 16 * self.amplitudes.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

pub(crate) fn parse_bitstring(bits: &str) -> Result<usize> {
    if bits.len() > 63 {
        return Err(Error::Parse("bitstring too long".into()));
    }
    bits.chars().try_fold(0usize, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(Error::Parse(format!("invalid bit '{ch}' in {bits:?}"))),
    })
}

pub(crate) fn format_bitstring(index: usize, len: usize) -> String {
    (0..len)
        .map(|k| if (index >> (len - 1 - k)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Néel state |↓↑↓↑…⟩.
pub fn neel_state(n: usize) -> Result<PureState> {
    if n == 0 {
        return Err(Error::InvalidSize("Néel state needs at least one site".into()));
    }
    let index = (0..n).filter(|s| s % 2 == 1).map(|s| linalg::site_mask(n, s)).sum();
    Ok(PureState::basis(n, index))
}

/// Hermitian, unit-trace density matrix over `n_sites`.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub n_sites: usize,
    pub matrix: CMat,
}

impl DensityMatrix {
    /// Validates Hermiticity and trace to 1e-10.
    pub fn new(n_sites: usize, matrix: CMat) -> Result<Self> {
        let dim = 1usize << n_sites;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Mismatch(format!("matrix is not {dim}x{dim}")));
        }
        let defect = linalg::hermitian_defect(&matrix);
        if defect > 1e-10 {
            return Err(Error::InvalidParameter(format!("density matrix not Hermitian ({defect:.2e})")));
        }
        let tr = linalg::trace(&matrix);
        if (tr - c(1.0)).norm() > 1e-10 {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr}")));
        }
        Ok(Self { n_sites, matrix })
    }

    pub fn from_pure(state: &PureState) -> Self {
        let v = nalgebra::DVector::from_column_slice(&state.amplitudes);
        Self {
            n_sites: state.n_sites,
            matrix: &v * v.adjoint(),
        }
    }

    pub fn maximally_mixed(n_sites: usize) -> Self {
        let dim = 1usize << n_sites;
        Self {
            n_sites,
            matrix: CMat::identity(dim, dim) * c(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        self.eigenvalues()[0] >= -tol
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.matrix, &self.matrix).re
    }

    /// Trace out every site not in `keep` (positions within this register,
    /// ascending).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let m = linalg::partial_trace(&self.matrix, self.n_sites, keep)?;
        Ok(DensityMatrix {
            n_sites: keep.len(),
            matrix: m,
        })
    }

    /// P ρ P with P = ⊗σ^x.
    pub fn spin_flipped(&self) -> DensityMatrix {
        let all = self.dim() - 1;
        DensityMatrix {
            n_sites: self.n_sites,
            matrix: CMat::from_fn(self.dim(), self.dim(), |i, j| self.matrix[(i ^ all, j ^ all)]),
        }
    }

    /// Born probabilities of computational-basis outcomes.
    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }
}

fn validate_sites(sites: &[usize], n: usize) -> Result<()> {
    if sites.is_empty() {
        return Err(Error::InvalidParameter("empty site set".into()));
    }
    if sites.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("sites {sites:?} must be strictly ascending")));
    }
    if *sites.last().unwrap() >= n {
        return Err(Error::InvalidSize(format!("site {} outside a {n}-site register", sites.last().unwrap())));
    }
    Ok(())
}

/// ρ_A = Tr_Ā |ψ⟩⟨ψ| for an ascending site set A (contiguous or not).
pub fn reduced_density_matrix(state: &PureState, sites: &[usize]) -> Result<DensityMatrix> {
    let n = state.n_sites;
    validate_sites(sites, n)?;
    linalg::check_dense_size(sites.len())?;
    let rest: Vec<usize> = (0..n).filter(|s| !sites.contains(s)).collect();
    let k = sites.len();
    let r = rest.len();
    let da = 1usize << k;
    let db = 1usize << r;
    let spread = |value: usize, chosen: &[usize], width: usize| -> usize {
        let mut idx = 0;
        for (p, &s) in chosen.iter().enumerate() {
            if (value >> (width - 1 - p)) & 1 == 1 {
                idx |= linalg::site_mask(n, s);
            }
        }
        idx
    };
    let a_part: Vec<usize> = (0..da).map(|a| spread(a, sites, k)).collect();
    let b_part: Vec<usize> = (0..db).map(|b| spread(b, &rest, r)).collect();
    // Ψ as a da × db matrix, ρ = Ψ Ψ†
    let psi = CMat::from_fn(da, db, |a, b| state.amplitudes[a_part[a] | b_part[b]]);
    let rho = &psi * psi.adjoint();
    Ok(DensityMatrix { n_sites: k, matrix: rho })
}

/// (ρ + PρP)/2 with P the spin flip on every site of ρ.
pub fn symmetrized_rdm(rho: &DensityMatrix) -> DensityMatrix {
    let flipped = rho.spin_flipped();
    DensityMatrix {
        n_sites: rho.n_sites,
        matrix: (&rho.matrix + &flipped.matrix) * c(0.5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn neel_layouts() {
        assert_eq!(neel_state(2).unwrap(), PureState::from_bitstring("01").unwrap());
        assert_eq!(neel_state(3).unwrap(), PureState::from_bitstring("010").unwrap());
        assert!(neel_state(4).unwrap().total_sz().abs() < 1e-15);
        assert!((neel_state(5).unwrap().total_sz() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn bell_pair_halves_are_maximally_mixed() {
        let h = 1.0 / 2f64.sqrt();
        let bell = PureState::new(2, vec![ZERO, c(h), c(-h), ZERO]).unwrap();
        let r = reduced_density_matrix(&bell, &[0]).unwrap();
        assert!(max_abs_diff(&r.matrix, &DensityMatrix::maximally_mixed(1).matrix) < 1e-15);
    }

    #[test]
    fn product_state_reduces_to_projector() {
        let s = PureState::from_bitstring("0110").unwrap();
        let r = reduced_density_matrix(&s, &[1, 3]).unwrap();
        assert!((r.purity() - 1.0).abs() < 1e-15);
        assert_eq!(r.matrix[(2, 2)], c(1.0)); // sites (1,3) read "10"
    }

    #[test]
    fn rdm_rejects_bad_site_sets() {
        let s = neel_state(4).unwrap();
        assert!(reduced_density_matrix(&s, &[2, 1]).is_err());
        assert!(reduced_density_matrix(&s, &[4]).is_err());
        assert!(reduced_density_matrix(&s, &[]).is_err());
    }

    #[test]
    fn symmetrize_down_down() {
        let dd = DensityMatrix::from_pure(&PureState::from_bitstring("00").unwrap());
        let s = symmetrized_rdm(&dd);
        assert_eq!(s.matrix[(0, 0)], c(0.5));
        assert_eq!(s.matrix[(3, 3)], c(0.5));
        let again = symmetrized_rdm(&s);
        assert!(max_abs_diff(&again.matrix, &s.matrix) < 1e-16);
    }

    #[test]
    fn state_file_round_trip() {
        let s = PureState::normalized(3, (0..8).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect()).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..9], b"EHTSTATE1");
        assert_eq!(&bytes[9..13], &3u32.to_le_bytes());
        assert_eq!(bytes.len(), 13 + 8 * 16);
        assert_eq!(PureState::read_from(&bytes[..]).unwrap(), s);
        assert!(PureState::read_from(&b"NOTASTATE0000"[..]).is_err());
    }
}
