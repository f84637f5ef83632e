//! χ² = Σ_α Σ_s [P^α_s − ⟨s|U_α D[ρ(β)] U_α†|s⟩]² and its minimization.
//!
//! The gradient runs backwards through the same chain: the residual
//! operator G = Σ_α U_α† diag(−2r_α) U_α is pulled through the channel
//! adjoint, then through ρ = e^{−H̃}/Z using the eigenbasis divided
//! differences of the exponential.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_eh, entanglement_spectrum, gibbs_state, EHAnsatz, GibbsState, Variant};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, Gate2};
use crate::measurement::{empirical_probabilities, MeasurementDataset, ProbabilityTable};
use crate::noise::{apply_adjoint_channel_matrix, apply_channel_matrix, NoiseParams};
use crate::optimize::{bfgs, BfgsOptions};

const CHUNK: usize = 16;

fn check_table(table: &ProbabilityTable, ansatz: &EHAnsatz) -> Result<()> {
    let sites = ansatz.geometry.sites();
    if table.sites != sites {
        return Err(Error::Mismatch(format!(
            "table covers sites {:?}, ansatz needs {:?}",
            table.sites, sites
        )));
    }
    if table.is_empty() {
        return Err(Error::InvalidParameter("no measurement settings".into()));
    }
    Ok(())
}

/// (χ², ∂χ²/∂params) for outcome frequencies on the ansatz subsystem.
fn evaluate(
    params: &[f64],
    table: &ProbabilityTable,
    ansatz: &EHAnsatz,
    noise: &NoiseParams,
    with_gradient: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    check_table(table, ansatz)?;
    let n = ansatz.n_sites();
    let dim = 1usize << n;
    let gibbs = gibbs_state(&build_eh(ansatz, params)?)?;
    let mut noisy = gibbs.rho.matrix.clone();
    apply_channel_matrix(&mut noisy, n, noise);

    let rotations: Vec<Vec<Gate2>> = table.settings.iter().map(|s| s.rotations()).collect();
    let indices: Vec<usize> = (0..table.len()).collect();
    let partials: Vec<(f64, Option<CMat>)> = indices
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut chi2 = 0.0;
            let mut g = with_gradient.then(|| CMat::zeros(dim, dim));
            for &k in chunk {
                let gates: Vec<&Gate2> = rotations[k].iter().collect();
                let rotated = linalg::conjugate_by_product(&noisy, &gates);
                let data = &table.probs[k];
                let residual: Vec<f64> = (0..dim).map(|s| data[s] - rotated[(s, s)].re).collect();
                chi2 += residual.iter().map(|r| r * r).sum::<f64>();
                if let Some(g) = g.as_mut() {
                    let adj: Vec<Gate2> = rotations[k].iter().map(linalg::gate_adjoint).collect();
                    let adj_refs: Vec<&Gate2> = adj.iter().collect();
                    let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                        dim,
                        residual.iter().map(|r| c(-2.0 * r)),
                    ));
                    *g += linalg::conjugate_by_product(&diag, &adj_refs);
                }
            }
            (chi2, g)
        })
        .collect();

    let chi2: f64 = partials.iter().map(|p| p.0).sum();
    if !with_gradient {
        return Ok((chi2, None));
    }
    let mut g = CMat::zeros(dim, dim);
    for (_, part) in &partials {
        g += part.as_ref().expect("gradient requested");
    }
    apply_adjoint_channel_matrix(&mut g, n, noise);
    let coeff_grad = exponential_pullback(&gibbs, &g, ansatz);
    Ok((chi2, Some(ansatz.pull_back(&coeff_grad))))
}

/// ∂/∂c_k of Tr(G ρ) for ρ = e^{−H̃}/Z, H̃ = Σ c_k O_k.
fn exponential_pullback(gibbs: &GibbsState, g: &CMat, ansatz: &EHAnsatz) -> Vec<f64> {
    let v = &gibbs.eigenvectors;
    let lam = &gibbs.eh_eigenvalues;
    let dim = lam.len();
    let shift = lam[0];
    let weights: Vec<f64> = lam.iter().map(|l| (-(l - shift)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let w = v.adjoint() * g * v;
    let b = CMat::from_fn(dim, dim, |m, k| {
        let (lo, hi) = if lam[m] <= lam[k] { (m, k) } else { (k, m) };
        let gap = lam[hi] - lam[lo];
        // (e^{−λm} − e^{−λk})/(λm − λk), shifted
        let kernel = if gap < 1e-12 {
            -weights[lo]
        } else {
            weights[lo] * (-gap).exp_m1() / gap
        };
        w[(m, k)] * c(kernel)
    });
    let m = v * b * v.adjoint();
    let tr_g_rho = linalg::trace_product(g, &gibbs.rho.matrix).re;
    ansatz
        .pairs()
        .into_iter()
        .map(|pair| {
            let op = ansatz.pair_operator(pair);
            op.trace_with(&m) / z + tr_g_rho * op.trace_with(&gibbs.rho.matrix)
        })
        .collect()
}

pub fn chi_squared(params: &[f64], table: &ProbabilityTable, ansatz: &EHAnsatz, noise: &NoiseParams) -> Result<f64> {
    Ok(evaluate(params, table, ansatz, noise, false)?.0)
}

pub fn chi_squared_with_gradient(
    params: &[f64],
    table: &ProbabilityTable,
    ansatz: &EHAnsatz,
    noise: &NoiseParams,
) -> Result<(f64, Vec<f64>)> {
    let (v, g) = evaluate(params, table, ansatz, noise, true)?;
    Ok((v, g.expect("gradient requested")))
}

/// Discrete CFT parabola β_j ∝ j(L − j) over each interval's links,
/// scaled to a maximum of 1; cross-links start at 0.
pub fn cft_initial(ansatz: &EHAnsatz) -> Vec<f64> {
    let parabola = |len: usize| -> Vec<f64> {
        let raw: Vec<f64> = (1..len).map(|j| (j * (len - j)) as f64).collect();
        let top = raw.iter().cloned().fold(0.0, f64::max).max(1.0);
        raw.iter().map(|v| v / top).collect()
    };
    match ansatz.variant {
        Variant::Polynomial => {
            let l = ansatz.n_sites() as f64;
            let top = (1..ansatz.n_sites()).map(|j| j as f64 * (l - j as f64)).fold(0.0, f64::max).max(1.0);
            vec![0.0, l / top, -1.0 / top]
        }
        _ => {
            let mut out = Vec::with_capacity(ansatz.n_params());
            for len in ansatz.geometry.blocks() {
                out.extend(parabola(len));
            }
            out.resize(ansatz.n_params(), 0.0);
            out
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub init: Option<Vec<f64>>,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Rescale the initial point by the best of a few overall factors
    /// before descending.
    pub scale_scan: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            init: None,
            max_iter: 2000,
            grad_tol: 1e-8,
            scale_scan: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub variant: Variant,
    /// Subsystem sites.
    pub geometry: Vec<usize>,
    pub ansatz: EHAnsatz,
    /// Coefficient of every ansatz term.
    pub beta: Vec<f64>,
    /// Raw parameters (equal to `beta` except for the polynomial profile).
    pub params: Vec<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub noise: NoiseParams,
    /// Entanglement spectrum of the noise-free ρ(β), ascending.
    pub xi: Vec<f64>,
    /// Label of the dataset the fit used.
    pub data_source: String,
    /// Seed of that dataset, when fitted from one.
    #[serde(default)]
    pub data_seed: Option<u64>,
    pub n_settings: usize,
}

impl FitResult {
    pub fn gibbs(&self) -> Result<GibbsState> {
        gibbs_state(&build_eh(&self.ansatz, &self.params)?)
    }
}

/// Least-squares fit of an ansatz to a table of outcome frequencies.
pub fn fit_table(
    table: &ProbabilityTable,
    ansatz: &EHAnsatz,
    noise: &NoiseParams,
    opts: &FitOptions,
    data_source: &str,
) -> Result<FitResult> {
    noise.validate()?;
    check_table(table, ansatz)?;
    let mut x0 = match &opts.init {
        Some(v) if v.len() == ansatz.n_params() => v.clone(),
        Some(v) => {
            return Err(Error::Mismatch(format!(
                "initial point has {} entries, ansatz takes {}",
                v.len(),
                ansatz.n_params()
            )))
        }
        None => cft_initial(ansatz),
    };
    if opts.scale_scan {
        let mut best = (1.0, chi_squared(&x0, table, ansatz, noise)?);
        for s in [0.25, 0.5, 2.0, 4.0, 8.0] {
            let trial: Vec<f64> = x0.iter().map(|v| v * s).collect();
            let v = chi_squared(&trial, table, ansatz, noise)?;
            if v < best.1 {
                best = (s, v);
            }
        }
        x0.iter_mut().for_each(|v| *v *= best.0);
    }
    let mut failure = None;
    let result = bfgs(
        |x| match chi_squared_with_gradient(x, table, ansatz, noise) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e);
                (f64::INFINITY, vec![0.0; x.len()])
            }
        },
        &x0,
        &BfgsOptions {
            max_iter: opts.max_iter,
            grad_tol: opts.grad_tol,
            f_tol: 1e-13,
        },
    );
    if let Some(e) = failure {
        if !result.value.is_finite() {
            return Err(e);
        }
    }
    let gibbs = gibbs_state(&build_eh(ansatz, &result.x)?)?;
    Ok(FitResult {
        variant: ansatz.variant,
        geometry: ansatz.geometry.sites(),
        ansatz: ansatz.clone(),
        beta: ansatz.coefficients(&result.x)?,
        params: result.x,
        chi2: result.value,
        iterations: result.iterations,
        gradient_norm: result.gradient.iter().map(|g| g * g).sum::<f64>().sqrt(),
        converged: result.converged,
        noise: *noise,
        xi: entanglement_spectrum(&gibbs),
        data_source: data_source.to_string(),
        data_seed: None,
        n_settings: table.len(),
    })
}

/// Fit an ansatz to a dataset; the subsystem is read off every setting of
/// the dataset, settings kept distinct.
pub fn fit_eh(data: &MeasurementDataset, ansatz: &EHAnsatz, noise: &NoiseParams, opts: &FitOptions) -> Result<FitResult> {
    let table = empirical_probabilities(data, &ansatz.geometry.sites())?;
    let mut fit = fit_table(&table, ansatz, noise, opts, &data.source)?;
    fit.data_seed = Some(data.seed);
    Ok(fit)
}
