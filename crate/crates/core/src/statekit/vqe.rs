//! Variational ground-state search: SPSA on the energy estimated from
//! global X, Y and Z basis samples, warm-started by an exact optimization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::circuit::{run_with, CircuitParams, XyPropagator};
use super::{neel_state, PureState};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measurement::{draw_counts, pure_probabilities, stream_rng, Axis, MeasurementSetting};
use crate::optimize::{bfgs, numerical_gradient, BfgsOptions, Spsa};
use crate::spinmodel::{build_xxz, CouplingMatrix, SpinModel};
use crate::statekit::parse_bitstring;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VqeConfig {
    /// Each layer is one XY evolution followed by one Z rotation.
    pub layers: usize,
    /// Samples per global basis; 0 evaluates the exact expectation value.
    pub shots_per_basis: u64,
    pub iterations: usize,
    pub seed: u64,
    pub spsa_a: f64,
    pub spsa_c: f64,
    /// Starting angles; when absent an exact optimization on at most
    /// `warm_start_sites` sites provides them.
    #[serde(default)]
    pub warm_start: Option<Vec<f64>>,
    pub warm_start_sites: usize,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            shots_per_basis: 30,
            iterations: 200,
            seed: 0,
            spsa_a: 0.15,
            spsa_c: 0.1,
            warm_start: None,
            warm_start_sites: 8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VqeResult {
    pub params: CircuitParams,
    /// Energy estimate at the iterate after each SPSA step.
    pub trace: Vec<f64>,
    /// Exact energy of the returned parameters.
    pub energy: f64,
}

/// ⟨H_XXZ⟩ from outcome distributions in the global X, Y and Z bases
/// (indexed by bitstring): each link contributes J/4 (⟨σˣσˣ⟩ + ⟨σʸσʸ⟩ + Δ⟨σᶻσᶻ⟩).
pub fn energy_from_samples(model: &SpinModel, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    let n = model.n_sites;
    let dim = 1usize << n;
    if x.len() != dim || y.len() != dim || z.len() != dim {
        return Err(Error::Mismatch(format!("distributions must have {dim} entries")));
    }
    let correlator = |p: &[f64], site: usize| -> f64 {
        p.iter()
            .enumerate()
            .map(|(s, w)| {
                let same = linalg::site_bit(s, n, site) == linalg::site_bit(s, n, site + 1);
                if same {
                    *w
                } else {
                    -*w
                }
            })
            .sum()
    };
    let mut e = 0.0;
    for site in 0..n - 1 {
        e += correlator(x, site) + correlator(y, site) + model.anisotropy_delta * correlator(z, site);
    }
    Ok(0.25 * model.coupling_j * e)
}

/// Exact ⟨ψ|H|ψ⟩.
pub fn exact_energy(model: &SpinModel, state: &PureState) -> f64 {
    let dim = state.amplitudes.len();
    let re: Vec<f64> = state.amplitudes.iter().map(|a| a.re).collect();
    let im: Vec<f64> = state.amplitudes.iter().map(|a| a.im).collect();
    let mut hr = vec![0.0; dim];
    let mut hi = vec![0.0; dim];
    model.apply_full(&re, &mut hr);
    model.apply_full(&im, &mut hi);
    re.iter().zip(&hr).map(|(a, b)| a * b).sum::<f64>() + im.iter().zip(&hi).map(|(a, b)| a * b).sum::<f64>()
}

fn frequencies(state: &PureState, axis: Axis, shots: u64, rng: &mut ChaCha20Rng) -> Result<Vec<f64>> {
    let n = state.n_sites;
    let register: Vec<usize> = (0..n).collect();
    let p = pure_probabilities(state, &register, &MeasurementSetting::uniform(axis, n));
    let counts = draw_counts(&p, shots, n, rng)?;
    let mut f = vec![0.0; p.len()];
    for (bits, c) in counts {
        f[parse_bitstring(&bits)?] = c as f64 / shots as f64;
    }
    Ok(f)
}

struct Objective<'a> {
    model: &'a SpinModel,
    prop: XyPropagator,
    initial: PureState,
}

impl Objective<'_> {
    fn state(&self, thetas: &[f64]) -> Result<PureState> {
        run_with(
            &self.prop,
            &self.initial,
            &CircuitParams {
                thetas: thetas.to_vec(),
                heating_quench: None,
            },
        )
    }

    fn exact(&self, thetas: &[f64]) -> Result<f64> {
        Ok(exact_energy(self.model, &self.state(thetas)?))
    }

    fn sampled(&self, thetas: &[f64], shots: u64, rng: &mut ChaCha20Rng) -> Result<f64> {
        let psi = self.state(thetas)?;
        let x = frequencies(&psi, Axis::X, shots, rng)?;
        let y = frequencies(&psi, Axis::Y, shots, rng)?;
        let z = frequencies(&psi, Axis::Z, shots, rng)?;
        energy_from_samples(self.model, &x, &y, &z)
    }
}

/// Best exact-energy angles from `starts` BFGS runs (finite-difference
/// gradients) at seeded random initial points in [−π, π).
pub fn exact_warm_start(
    model: &SpinModel,
    couplings: &CouplingMatrix,
    layers: usize,
    starts: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    if layers == 0 || starts == 0 {
        return Err(Error::InvalidParameter("need layers >= 1 and starts >= 1".into()));
    }
    check_sizes(model, couplings)?;
    let obj = Objective {
        model,
        prop: XyPropagator::new(couplings),
        initial: neel_state(model.n_sites)?,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let f = |t: &[f64]| obj.exact(t).unwrap_or(f64::INFINITY);
    for _ in 0..starts {
        let x0: Vec<f64> = (0..2 * layers)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * std::f64::consts::PI)
            .collect();
        let r = bfgs(|x| (f(x), numerical_gradient(f, x, 1e-6)), &x0, &BfgsOptions::default());
        if best.as_ref().is_none_or(|(_, e)| r.value < *e) {
            best = Some((r.x, r.value));
        }
    }
    Ok(best.unwrap())
}

fn check_sizes(model: &SpinModel, couplings: &CouplingMatrix) -> Result<()> {
    if model.n_sites != couplings.n {
        return Err(Error::Mismatch(format!(
            "{}-site model with {}-site couplings",
            model.n_sites, couplings.n
        )));
    }
    if model.n_sites > 16 {
        return Err(Error::SizeCap(format!("{} sites exceeds the state-vector cap of 16", model.n_sites)));
    }
    Ok(())
}

fn leading_block(couplings: &CouplingMatrix, n: usize) -> Result<CouplingMatrix> {
    let values = (0..n * n).map(|k| couplings.get(k / n, k % n)).collect();
    CouplingMatrix::new(n, values)
}

/// SPSA minimization of the shot-estimated energy of the circuit applied to
/// the Néel state. Deterministic given `config.seed`: evaluation k draws
/// from RNG stream k.
pub fn vqe_optimize(model: &SpinModel, couplings: &CouplingMatrix, config: &VqeConfig) -> Result<VqeResult> {
    if config.layers == 0 {
        return Err(Error::InvalidParameter("layers must be at least 1".into()));
    }
    check_sizes(model, couplings)?;
    let dim = 2 * config.layers;
    let start = match &config.warm_start {
        Some(w) if w.len() == dim => w.clone(),
        Some(w) => {
            return Err(Error::Mismatch(format!("warm start has {} angles, circuit needs {dim}", w.len())));
        }
        None => {
            let n = model.n_sites.min(config.warm_start_sites.max(2));
            let small = build_xxz(n, model.coupling_j, model.anisotropy_delta)?;
            exact_warm_start(&small, &leading_block(couplings, n)?, config.layers, 16, config.seed)?.0
        }
    };
    let obj = Objective {
        model,
        prop: XyPropagator::new(couplings),
        initial: neel_state(model.n_sites)?,
    };
    let mut stream = 0u64;
    let mut evaluate = |t: &[f64]| -> Result<f64> {
        if config.shots_per_basis == 0 {
            return obj.exact(t);
        }
        let mut rng = stream_rng(config.seed, stream);
        stream += 1;
        obj.sampled(t, config.shots_per_basis, &mut rng)
    };
    let spsa = Spsa::new(config.spsa_a, config.spsa_c, config.iterations);
    let mut direction_rng = stream_rng(config.seed ^ 0x5b5a, u64::MAX);
    let mut x = start.clone();
    let mut best = (start.clone(), evaluate(&start)?);
    let mut trace = Vec::with_capacity(config.iterations);
    for k in 0..config.iterations {
        let mut failure = None;
        spsa.step(k, &mut x, &mut direction_rng, |t| match evaluate(t) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let e = evaluate(&x)?;
        trace.push(e);
        if e < best.1 {
            best = (x.clone(), e);
        }
    }
    let params = CircuitParams {
        thetas: best.0,
        heating_quench: None,
    };
    let energy = obj.exact(&params.thetas)?;
    Ok(VqeResult { params, trace, energy })
}
