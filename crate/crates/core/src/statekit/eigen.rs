//! Exact eigenstates: dense sector diagonalization, restarted Lanczos, and
//! excited states by projector deflation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PureState;
use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::spinmodel::{Sector, SpinModel};

/// Largest chain handled by dense sector diagonalization.
pub const DENSE_MAX_SITES: usize = 12;
/// Largest chain handled at all.
pub const ITERATIVE_MAX_SITES: usize = 16;

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Convergence threshold on ‖Hv − θv‖.
    pub tol: f64,
    pub max_krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_krylov: 300,
            max_restarts: 60,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn random_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random::<f64>() - 0.5).collect()
}

/// Lowest eigenpair of a real symmetric operator given as `apply(x, y)`
/// (y ← A x), by explicitly restarted Lanczos with full reorthogonalization.
pub fn lanczos_lowest<F>(apply: F, dim: usize, start: Option<&[f64]>, opts: &EigenOptions) -> Result<LanczosResult>
where
    F: Fn(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Err(Error::InvalidSize("empty operator".into()));
    }
    let mut v = match start {
        Some(s) => s.to_vec(),
        None => random_vector(dim, opts.seed),
    };
    if normalize(&mut v) == 0.0 {
        v = random_vector(dim, opts.seed);
        normalize(&mut v);
    }
    let m = opts.max_krylov.min(dim).max(1);
    let mut w = vec![0.0; dim];
    let mut matvecs = 0;
    let mut last_residual = f64::INFINITY;
    for _ in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![v.clone()];
        let mut alphas = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            matvecs += 1;
            let alpha = dot(&basis[j], &w);
            alphas.push(alpha);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for q in &basis {
                    let p = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= p * qi);
                }
            }
            if basis.len() == m {
                break;
            }
            let beta = dot(&w, &w).sqrt();
            if beta < 1e-12 * (alpha.abs() + 1.0) {
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        }
        let k = alphas.len();
        let t = RMat::from_fn(k, k, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let (theta, s) = linalg::eigh_real(&t);
        let mut y = vec![0.0; dim];
        for (i, q) in basis.iter().enumerate() {
            let coef = s[(i, 0)];
            y.iter_mut().zip(q).for_each(|(yi, qi)| *yi += coef * qi);
        }
        normalize(&mut y);
        apply(&y, &mut w);
        matvecs += 1;
        let value = dot(&y, &w);
        let residual = w.iter().zip(&y).map(|(a, b)| (a - value * b).powi(2)).sum::<f64>().sqrt();
        last_residual = residual;
        if residual <= opts.tol * (1.0 + theta[0].abs()) {
            return Ok(LanczosResult {
                value,
                vector: y,
                residual,
                matvecs,
            });
        }
        v = y;
    }
    Err(Error::numerical("Lanczos eigensolver", last_residual))
}

/// Hilbert space an eigen-solve runs in: one magnetization sector or the
/// whole register.
enum Space {
    Sector(Sector),
    Full(usize),
}

impl Space {
    fn dim(&self) -> usize {
        match self {
            Space::Sector(s) => s.dim(),
            Space::Full(n) => 1usize << n,
        }
    }

    fn apply(&self, model: &SpinModel, x: &[f64], y: &mut [f64]) {
        match self {
            Space::Sector(s) => model.apply_sector(s, x, y),
            Space::Full(_) => model.apply_full(x, y),
        }
    }

    fn to_state(&self, coeffs: &[f64]) -> Result<PureState> {
        match self {
            Space::Sector(s) => PureState::from_sector(s, coeffs),
            Space::Full(n) => PureState::normalized(*n, coeffs.iter().map(|&v| linalg::c(v)).collect()),
        }
    }

    fn dense(&self, model: &SpinModel) -> RMat {
        match self {
            Space::Sector(s) => model.sector_matrix(s),
            Space::Full(n) => {
                let dim = 1usize << n;
                let mut m = RMat::zeros(dim, dim);
                let mut e = vec![0.0; dim];
                let mut col = vec![0.0; dim];
                for k in 0..dim {
                    e[k] = 1.0;
                    self.apply(model, &e, &mut col);
                    m.column_mut(k).copy_from_slice(&col);
                    e[k] = 0.0;
                }
                m
            }
        }
    }
}

fn check_size(model: &SpinModel) -> Result<()> {
    if model.n_sites > ITERATIVE_MAX_SITES {
        return Err(Error::SizeCap(format!(
            "{} sites exceeds the exact-diagonalization cap of {ITERATIVE_MAX_SITES}",
            model.n_sites
        )));
    }
    Ok(())
}

fn lowest_in_sector(model: &SpinModel, sector: &Sector) -> Result<(f64, Vec<f64>)> {
    if model.n_sites <= DENSE_MAX_SITES {
        let (vals, vecs) = linalg::eigh_real(&model.sector_matrix(sector));
        Ok((vals[0], vecs.column(0).iter().copied().collect()))
    } else {
        let r = lanczos_lowest(|x, y| model.apply_sector(sector, x, y), sector.dim(), None, &EigenOptions::default())?;
        Ok((r.value, r.vector))
    }
}

/// Lowest eigenpair, optionally restricted to the sector with σ^z sum
/// `sector`. Without a sector every sector is searched; among exactly
/// degenerate sectors the one with fewer up spins wins.
pub fn ground_state(model: &SpinModel, sector: Option<i64>) -> Result<(f64, PureState)> {
    check_size(model)?;
    let n = model.n_sites;
    let sectors: Vec<Sector> = match sector {
        Some(m) => vec![Sector::from_magnetization(n, m)?],
        None => (0..=n).map(|up| Sector::new(n, up)).collect(),
    };
    let mut best: Option<(f64, PureState)> = None;
    for s in &sectors {
        let (e, v) = lowest_in_sector(model, s)?;
        if best.as_ref().is_none_or(|(b, _)| e < *b - 1e-12) {
            best = Some((e, PureState::from_sector(s, &v)?));
        }
    }
    Ok(best.expect("at least one sector"))
}

/// Lowest `count` eigenpairs by deflation: state k minimizes
/// H + w Σ_{q<k} |φ_q⟩⟨φ_q|. `weight` defaults to ten times the spectral
/// range estimated from extremal Ritz values. With `sector` the search is
/// confined to that magnetization sector.
pub fn excited_states(
    model: &SpinModel,
    count: usize,
    weight: Option<f64>,
    sector: Option<i64>,
) -> Result<Vec<(f64, PureState)>> {
    check_size(model)?;
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let space = match sector {
        Some(m) => Space::Sector(Sector::from_magnetization(model.n_sites, m)?),
        None => Space::Full(model.n_sites),
    };
    let dim = space.dim();
    if count > dim {
        return Err(Error::InvalidParameter(format!("requested {count} states in a {dim}-dimensional space")));
    }
    let opts = EigenOptions::default();
    let weight = match weight {
        Some(w) => w,
        None => {
            let lo = lanczos_lowest(|x, y| space.apply(model, x, y), dim, None, &opts)?.value;
            let hi = -lanczos_lowest(
                |x, y| {
                    space.apply(model, x, y);
                    y.iter_mut().for_each(|v| *v = -*v);
                },
                dim,
                None,
                &opts,
            )?
            .value;
            10.0 * (hi - lo).max(1e-12)
        }
    };
    if !(weight > 0.0) {
        return Err(Error::InvalidParameter(format!("deflation weight {weight} must be positive")));
    }

    let mut found: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut out: Vec<(f64, PureState)> = Vec::with_capacity(count);
    let mut h_phi = vec![0.0; dim];
    for k in 0..count {
        let deflated = |x: &[f64], y: &mut [f64]| {
            space.apply(model, x, y);
            for phi in &found {
                let p = weight * dot(phi, x);
                y.iter_mut().zip(phi).for_each(|(yi, fi)| *yi += p * fi);
            }
        };
        let mut start = random_vector(dim, opts.seed.wrapping_add(k as u64 + 1));
        for phi in &found {
            let p = dot(phi, &start);
            start.iter_mut().zip(phi).for_each(|(s, f)| *s -= p * f);
        }
        let r = lanczos_lowest(deflated, dim, Some(&start), &opts)?;
        space.apply(model, &r.vector, &mut h_phi);
        let energy = dot(&r.vector, &h_phi);
        if let Some(&(previous, _)) = out.last() {
            if energy < previous - 1e-8 * (1.0 + previous.abs()) {
                return Err(Error::DeflationFailure {
                    index: k,
                    energy,
                    previous,
                });
            }
        }
        out.push((energy, space.to_state(&r.vector)?));
        found.push(r.vector);
    }
    Ok(out)
}

/// Full sorted spectrum of a space by dense diagonalization; test oracle and
/// small-system helper.
pub fn dense_spectrum(model: &SpinModel, sector: Option<i64>) -> Result<Vec<f64>> {
    linalg::check_dense_size(model.n_sites)?;
    let space = match sector {
        Some(m) => Space::Sector(Sector::from_magnetization(model.n_sites, m)?),
        None => Space::Full(model.n_sites),
    };
    Ok(linalg::eigh_real(&space.dense(model)).0)
}
