//! Entropies, fidelities, reference temperature profiles and entropy
//! scaling. Entropies are in nats throughout.

mod fidelity;
mod profiles;

pub use fidelity::{
    hs_fidelities, hs_overlap_from_samples, verify_state, windowed_fidelity, Verification, WindowFidelity,
};
pub use profiles::{
    beta_biloc, beta_bw, beta_cft, beta_loc, conjugate_point, entropy_scaling, entropy_scaling_csv, profile_csv,
    schmidt_energy_profile, shape_fit, EntropyScaling, ProfileKind, ReferenceProfile, ScalingClass, SchmidtProfile,
    ShapeFit,
};

use crate::eht::GibbsState;
use crate::error::{Error, Result};
use crate::linalg;
use crate::statekit::{reduced_density_matrix, DensityMatrix, PureState};

const ENTROPY_CUTOFF: f64 = 1e-14;

/// −Tr ρ log ρ.
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()
        .iter()
        .filter(|&&l| l > ENTROPY_CUTOFF)
        .map(|&l| -l * l.ln())
        .sum()
}

/// Tr(ρH̃) + log Z.
pub fn entropy_from_eh(gibbs: &GibbsState) -> f64 {
    linalg::trace_product(&gibbs.rho.matrix, &gibbs.eh_matrix).re + gibbs.log_partition
}

/// I = S_A + S_B − S_AB.
pub fn mutual_information(rho_ab: &DensityMatrix, rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<f64> {
    if rho_a.n_sites + rho_b.n_sites != rho_ab.n_sites {
        return Err(Error::Mismatch(format!(
            "{}+{} sites do not make up a {}-site joint state",
            rho_a.n_sites, rho_b.n_sites, rho_ab.n_sites
        )));
    }
    Ok(vn_entropy(rho_a) + vn_entropy(rho_b) - vn_entropy(rho_ab))
}

/// Mutual information between two disjoint site sets of a pure state.
pub fn mutual_information_of(state: &PureState, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.iter().any(|s| b.contains(s)) {
        return Err(Error::InvalidParameter("site sets overlap".into()));
    }
    let mut ab: Vec<usize> = a.iter().chain(b).copied().collect();
    ab.sort_unstable();
    mutual_information(
        &reduced_density_matrix(state, &ab)?,
        &reduced_density_matrix(state, a)?,
        &reduced_density_matrix(state, b)?,
    )
}

/// (Tr √(√ρ₁ ρ₂ √ρ₁))², clamped to [0, 1]. Eigenvalues at round-off
/// level are dropped before the square root.
pub fn uhlmann_fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::Mismatch(format!("dimensions {} and {}", rho1.dim(), rho2.dim())));
    }
    let s = linalg::psd_sqrt(&rho1.matrix);
    let m = &s * &rho2.matrix * &s;
    let eig = linalg::eigvalsh(&m);
    let floor = 64.0 * f64::EPSILON * eig.iter().fold(0.0f64, |a, b| a.max(*b));
    let root: f64 = eig.iter().filter(|&&l| l > floor).map(|l| l.sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eht::gibbs_state;
    use crate::linalg::{c, CMat};
    use crate::spinmodel::build_xxz;
    use crate::statekit::ground_state;
    use num_complex::Complex64;

    #[test]
    fn pure_and_maximally_mixed_entropies() {
        let psi = PureState::from_bitstring("0110").unwrap();
        assert!(vn_entropy(&DensityMatrix::from_pure(&psi)).abs() < 1e-14);
        let mixed = DensityMatrix::maximally_mixed(3);
        assert!((vn_entropy(&mixed) - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_matches_schmidt_coefficients() {
        let model = build_xxz(10, 1.0, 1.0).unwrap();
        let (_, psi) = ground_state(&model, None).unwrap();
        let sites = [3, 4, 5, 6];
        let rho = reduced_density_matrix(&psi, &sites).unwrap();
        // Schmidt oracle: singular values of Ψ reshaped as 2^4 × 2^6, with
        // the window moved to the front by index permutation
        let rest: Vec<usize> = (0..10).filter(|s| !sites.contains(s)).collect();
        let spread = |v: usize, set: &[usize]| {
            set.iter()
                .enumerate()
                .filter(|(p, _)| (v >> (set.len() - 1 - p)) & 1 == 1)
                .fold(0usize, |acc, (_, &s)| acc | linalg::site_mask(10, s))
        };
        let m = CMat::from_fn(16, 64, |a, b| psi.amplitudes[spread(a, &sites) | spread(b, &rest)]);
        let oracle: f64 = m
            .svd(false, false)
            .singular_values
            .iter()
            .map(|s| s * s)
            .filter(|&l| l > 1e-14)
            .map(|l| -l * l.ln())
            .sum();
        assert!((vn_entropy(&rho) - oracle).abs() < 1e-10);
    }

    #[test]
    fn zero_eh_gives_log_dimension() {
        let g = gibbs_state(&CMat::zeros(8, 8)).unwrap();
        assert!((entropy_from_eh(&g) - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!((entropy_from_eh(&g) - vn_entropy(&g.rho)).abs() < 1e-12);
    }

    #[test]
    fn bell_pair_mutual_information() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::new(2, vec![c(s), c(0.0), c(0.0), c(s)]).unwrap();
        let i = mutual_information_of(&bell, &[0], &[1]).unwrap();
        assert!((i - 2.0 * 2f64.ln()).abs() < 1e-12);
        let product = PureState::from_bitstring("01").unwrap();
        assert!(mutual_information_of(&product, &[0], &[1]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn uhlmann_of_pure_states_is_overlap() {
        let a = PureState::normalized(2, vec![c(1.0), c(0.5), Complex64::new(0.0, 0.3), c(-0.2)]).unwrap();
        let b = PureState::normalized(2, vec![c(0.1), c(1.0), c(0.4), Complex64::new(0.2, 0.7)]).unwrap();
        let f = uhlmann_fidelity(&DensityMatrix::from_pure(&a), &DensityMatrix::from_pure(&b)).unwrap();
        assert!((f - a.inner(&b).norm_sqr()).abs() < 1e-9);
        let ra = DensityMatrix::from_pure(&a);
        assert!((uhlmann_fidelity(&ra, &ra).unwrap() - 1.0).abs() < 1e-9);
    }
}
