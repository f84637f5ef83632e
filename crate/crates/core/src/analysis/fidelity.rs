use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eht::FitResult;
use crate::error::{Error, Result};
use crate::measurement::{empirical_probabilities, exact_probability_table, split_dataset, MeasurementDataset, ProbabilityTable, Source};
use crate::noise::NoiseParams;
use crate::statekit::DensityMatrix;

/// Applies ⊗_sites [[1, −1/2], [−1/2, 1]], i.e. the (−2)^{−D[s,s′]} kernel.
fn hamming_kernel(p: &[f64], n_bits: usize) -> Vec<f64> {
    let mut out = p.to_vec();
    for bit in 0..n_bits {
        let mask = 1usize << bit;
        for i0 in 0..out.len() {
            if i0 & mask == 0 {
                let i1 = i0 | mask;
                let (a, b) = (out[i0], out[i1]);
                out[i0] = a - 0.5 * b;
                out[i1] = b - 0.5 * a;
            }
        }
    }
    out
}

fn check_tables(t1: &ProbabilityTable, t2: &ProbabilityTable) -> Result<()> {
    if t1.n_sites() != t2.n_sites() || t1.len() != t2.len() {
        return Err(Error::Mismatch(format!(
            "tables of {}x{} and {}x{} (sites x settings)",
            t1.n_sites(),
            t1.len(),
            t2.n_sites(),
            t2.len()
        )));
    }
    if let Some(k) = (0..t1.len()).find(|&k| t1.settings[k] != t2.settings[k]) {
        return Err(Error::Mismatch(format!("row {k}: settings {} and {}", t1.settings[k], t2.settings[k])));
    }
    if t1.is_empty() {
        return Err(Error::InvalidParameter("empty probability tables".into()));
    }
    Ok(())
}

/// Per-setting terms Σ_{s,s′} (−2)^{−D[s,s′]} P₁(s) P₂(s′).
fn overlap_terms(t1: &ProbabilityTable, t2: &ProbabilityTable) -> Result<Vec<f64>> {
    check_tables(t1, t2)?;
    let n = t1.n_sites();
    Ok(t1
        .probs
        .iter()
        .zip(&t2.probs)
        .map(|(p1, p2)| p1.iter().zip(hamming_kernel(p2, n)).map(|(a, b)| a * b).sum())
        .collect())
}

/// Estimate of Tr(ρ₁ρ₂) from two tables over the same settings. The
/// estimate is unbiased when the settings cover every Pauli basis of the
/// register equally often.
pub fn hs_overlap_from_samples(t1: &ProbabilityTable, t2: &ProbabilityTable) -> Result<f64> {
    let terms = overlap_terms(t1, t2)?;
    Ok(scale(t1.n_sites(), terms.len()) * terms.iter().sum::<f64>())
}

fn scale(n_sites: usize, n_settings: usize) -> f64 {
    (1u64 << n_sites) as f64 / n_settings as f64
}

/// (F_max, F_mean) from Tr ρ₁², Tr ρ₂² and Tr ρ₁ρ₂.
pub fn hs_fidelities(t11: f64, t22: f64, t12: f64) -> Result<(f64, f64)> {
    if !(t11 > 0.0 && t22 > 0.0) {
        return Err(Error::InvalidParameter(format!("purities must be positive, got {t11} and {t22}")));
    }
    Ok((t12 / t11.max(t22), t12 / (t11 * t22).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFidelity {
    /// First position of the window within the subsystem.
    pub start: usize,
    pub sites: Vec<usize>,
    pub purity_data: f64,
    pub purity_model: f64,
    pub overlap: f64,
    pub f_max: f64,
    pub f_mean: f64,
    pub f_max_err: f64,
    pub f_mean_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub window: usize,
    pub windows: Vec<WindowFidelity>,
    /// Averages over windows, with jackknife errors over settings.
    pub f_max: f64,
    pub f_mean: f64,
    pub f_max_err: f64,
    pub f_mean_err: f64,
}

impl Verification {
    /// `window_start,f_max,f_mean,err` rows (err is that of f_mean).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window_start,f_max,f_mean,err\n");
        for w in &self.windows {
            out.push_str(&format!("{},{:.12e},{:.12e},{:.12e}\n", w.start, w.f_max, w.f_mean, w.f_mean_err));
        }
        out
    }
}

/// Window-averaged fidelity between a fitted ρ(β) and held-out data. The
/// holdout must not be the dataset the fit used.
pub fn windowed_fidelity(fit: &FitResult, holdout: &MeasurementDataset, window: usize) -> Result<Verification> {
    let same_seed = fit.data_seed.is_none_or(|s| s == holdout.seed);
    if fit.data_source == holdout.source && same_seed {
        return Err(Error::Refused(format!(
            "holdout '{}' (seed {}) is the fitting dataset",
            holdout.source, holdout.seed
        )));
    }
    let gibbs = fit.gibbs()?;
    verify_state(&gibbs.rho, &fit.geometry, &fit.noise, holdout, window)
}

struct WindowTerms {
    c11: Vec<f64>,
    c22: Vec<f64>,
    c12: Vec<f64>,
}

impl WindowTerms {
    /// Fidelities from term sums with setting `skip` left out.
    fn fidelities(&self, w: usize, skip: Option<usize>) -> Result<(f64, f64, [f64; 3])> {
        let n = self.c11.len();
        let kept = n - usize::from(skip.is_some());
        let sum = |v: &[f64]| v.iter().sum::<f64>() - skip.map_or(0.0, |k| v[k]);
        let s = scale(w, kept);
        let (t11, t22, t12) = (s * sum(&self.c11), s * sum(&self.c22), s * sum(&self.c12));
        let (fm, fg) = hs_fidelities(t11, t22, t12)?;
        Ok((fm, fg, [t11, t22, t12]))
    }
}

/// Window-averaged fidelity of a model state on `sites` (passed through
/// `noise` before readout) against data, without the independence check.
pub fn verify_state(
    rho: &DensityMatrix,
    sites: &[usize],
    noise: &NoiseParams,
    holdout: &MeasurementDataset,
    window: usize,
) -> Result<Verification> {
    let l = sites.len();
    if rho.n_sites != l {
        return Err(Error::Mismatch(format!("{}-site state for {l} sites", rho.n_sites)));
    }
    if window == 0 || window > l {
        return Err(Error::InvalidParameter(format!("window {window} must lie in 1..={l}")));
    }
    let halves = split_dataset(holdout, &[0.5, 0.5], holdout.seed ^ 0x7f4a_7c15)?;
    let starts: Vec<usize> = (0..=l - window).collect();
    let terms = starts
        .par_iter()
        .map(|&start| -> Result<WindowTerms> {
            let positions: Vec<usize> = (start..start + window).collect();
            let wsites: Vec<usize> = positions.iter().map(|&p| sites[p]).collect();
            let model_rho = rho.partial_trace(&positions)?;
            let full = empirical_probabilities(holdout, &wsites)?;
            let a = empirical_probabilities(&halves[0], &wsites)?;
            let b = empirical_probabilities(&halves[1], &wsites)?;
            let local: Vec<usize> = (0..window).collect();
            let mut model = exact_probability_table(Source::Mixed(&model_rho), &local, &full.settings, Some(noise))?;
            model.sites = wsites;
            Ok(WindowTerms {
                c11: overlap_terms(&a, &b)?,
                c22: overlap_terms(&model, &model)?,
                c12: overlap_terms(&full, &model)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_settings = terms[0].c11.len();
    if n_settings < 2 {
        return Err(Error::InvalidSize("verification needs at least 2 settings".into()));
    }
    let mut windows = Vec::with_capacity(terms.len());
    for (start, t) in starts.iter().zip(&terms) {
        let (f_max, f_mean, [t11, t22, t12]) = t.fidelities(window, None)?;
        let loo = (0..n_settings)
            .map(|k| t.fidelities(window, Some(k)).map(|(a, b, _)| (a, b)))
            .collect::<Result<Vec<_>>>()?;
        windows.push(WindowFidelity {
            start: *start,
            sites: sites[*start..*start + window].to_vec(),
            purity_data: t11,
            purity_model: t22,
            overlap: t12,
            f_max,
            f_mean,
            f_max_err: jackknife_error(loo.iter().map(|v| v.0)),
            f_mean_err: jackknife_error(loo.iter().map(|v| v.1)),
        });
    }
    let count = windows.len() as f64;
    let avg_loo = (0..n_settings)
        .map(|k| {
            let mut acc = (0.0, 0.0);
            for t in &terms {
                let (a, b, _) = t.fidelities(window, Some(k))?;
                acc.0 += a / count;
                acc.1 += b / count;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Verification {
        window,
        f_max: windows.iter().map(|w| w.f_max).sum::<f64>() / count,
        f_mean: windows.iter().map(|w| w.f_mean).sum::<f64>() / count,
        f_max_err: jackknife_error(avg_loo.iter().map(|v| v.0)),
        f_mean_err: jackknife_error(avg_loo.iter().map(|v| v.1)),
        windows,
    })
}

/// √((n−1)/n Σ (θ₍ᵢ₎ − θ̄)²) over leave-one-out estimates.
fn jackknife_error(loo: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = loo.collect();
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n;
    ((n - 1.0) / n * v.iter().map(|x| (x - mean).powi(2)).sum::<f64>()).sqrt()
}
