//! Variational circuit layers: XY evolution under the native long-range
//! Hamiltonian and Z rotations on every second site.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PureState;
use crate::error::{Error, Result};
use crate::linalg::{self, RMat, ZERO};
use crate::spinmodel::{CouplingMatrix, Sector};

/// Circuit angles θ₁..θ_M applied as XY, Z, XY, Z, … and an optional
/// heating quench applied to the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub thetas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heating_quench: Option<f64>,
}

impl CircuitParams {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidParameter("circuit needs at least one angle".into()));
        }
        Ok(Self {
            thetas,
            heating_quench: None,
        })
    }

    pub fn with_quench(mut self, theta_q: f64) -> Self {
        self.heating_quench = Some(theta_q);
        self
    }
}

/// Sector-wise eigendecomposition of H_XY; each sector is diagonalized on
/// first use and reused for every later evolution.
pub struct XyPropagator {
    couplings: CouplingMatrix,
    sectors: Vec<OnceLock<(Sector, Vec<f64>, RMat)>>,
}

/// Registers above this size evolve by a matrix-free Taylor series instead.
const EIGEN_MAX_SITES: usize = 12;

impl XyPropagator {
    pub fn new(couplings: &CouplingMatrix) -> Self {
        Self {
            couplings: couplings.clone(),
            sectors: (0..=couplings.n).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.couplings.n
    }

    fn sector(&self, n_up: usize) -> &(Sector, Vec<f64>, RMat) {
        self.sectors[n_up].get_or_init(|| {
            let s = Sector::new(self.couplings.n, n_up);
            let (vals, vecs) = linalg::eigh_real(&self.couplings.xy_sector_matrix(&s));
            (s, vals, vecs)
        })
    }

    /// exp(−iθ H_XY)|ψ⟩.
    pub fn evolve(&self, state: &PureState, theta: f64) -> Result<PureState> {
        let n = self.couplings.n;
        if state.n_sites != n {
            return Err(Error::Mismatch(format!("{}-site state, {n}-site couplings", state.n_sites)));
        }
        if theta == 0.0 {
            return Ok(state.clone());
        }
        if n > EIGEN_MAX_SITES {
            return Ok(self.evolve_taylor(state, theta));
        }
        let mut out = vec![ZERO; state.amplitudes.len()];
        let weights = state.sector_weights();
        for (n_up, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let (sector, vals, vecs) = self.sector(n_up);
            let dim = sector.dim();
            // c' = V e^{−iθΛ} Vᵀ c
            let mut proj = vec![ZERO; dim];
            for (k, p) in proj.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (row, &s) in sector.states().iter().enumerate() {
                    acc += state.amplitudes[s] * vecs[(row, k)];
                }
                *p = acc * Complex64::from_polar(1.0, -theta * vals[k]);
            }
            for (row, &s) in sector.states().iter().enumerate() {
                let mut acc = ZERO;
                for (k, p) in proj.iter().enumerate() {
                    acc += vecs[(row, k)] * p;
                }
                out[s] = acc;
            }
        }
        Ok(PureState {
            n_sites: n,
            amplitudes: out,
        })
    }

    fn apply_xy(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.couplings.n;
        y.iter_mut().for_each(|v| *v = ZERO);
        for (s, &xs) in x.iter().enumerate() {
            if xs == ZERO {
                continue;
            }
            for i in 0..n {
                for j in i + 1..n {
                    if linalg::site_bit(s, n, i) != linalg::site_bit(s, n, j) {
                        y[s ^ linalg::site_mask(n, i) ^ linalg::site_mask(n, j)] += xs * self.couplings.get(i, j);
                    }
                }
            }
        }
    }

    fn evolve_taylor(&self, state: &PureState, theta: f64) -> PureState {
        let n = self.couplings.n;
        let bound: f64 = (0..n)
            .map(|i| (0..n).map(|j| self.couplings.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
            * n as f64;
        let steps = ((theta.abs() * bound) / 0.5).ceil().max(1.0) as usize;
        let dt = theta / steps as f64;
        let mut psi = state.amplitudes.clone();
        let mut term = vec![ZERO; psi.len()];
        let mut next = vec![ZERO; psi.len()];
        for _ in 0..steps {
            term.copy_from_slice(&psi);
            for k in 1..60 {
                self.apply_xy(&term, &mut next);
                let f = Complex64::new(0.0, -dt / k as f64);
                let mut size = 0.0;
                for ((t, nx), p) in term.iter_mut().zip(&next).zip(psi.iter_mut()) {
                    *t = nx * f;
                    *p += *t;
                    size += t.norm_sqr();
                }
                if size < 1e-34 {
                    break;
                }
            }
        }
        PureState { n_sites: n, amplitudes: psi }
    }
}

/// exp(−iθ H_XY)|ψ⟩ with H_XY = Σ_{i<j} J_ij (σ⁺_i σ⁻_j + σ⁻_i σ⁺_j).
pub fn apply_xy_evolution(state: &PureState, couplings: &CouplingMatrix, theta: f64) -> Result<PureState> {
    XyPropagator::new(couplings).evolve(state, theta)
}

/// exp(−iθ/2 Σ_k σ^z) over sites 1, 3, 5, … (every second site, counting
/// from the second).
pub fn apply_z_rotation(state: &PureState, theta: f64) -> PureState {
    let n = state.n_sites;
    let mask: usize = (1..n).step_by(2).map(|s| linalg::site_mask(n, s)).sum();
    let rotated = mask.count_ones() as i64;
    let amplitudes = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(s, a)| {
            let up = (s & mask).count_ones() as i64;
            let sz_sum = (2 * up - rotated) as f64;
            a * Complex64::from_polar(1.0, -0.5 * theta * sz_sum)
        })
        .collect();
    PureState { n_sites: n, amplitudes }
}

/// Heating quench (if any), then U_XY(θ₁), U_Z(θ₂), U_XY(θ₃), ….
pub fn run_circuit(initial: &PureState, params: &CircuitParams, couplings: &CouplingMatrix) -> Result<PureState> {
    run_with(&XyPropagator::new(couplings), initial, params)
}

pub(crate) fn run_with(prop: &XyPropagator, initial: &PureState, params: &CircuitParams) -> Result<PureState> {
    if params.thetas.is_empty() {
        return Err(Error::InvalidParameter("circuit needs at least one angle".into()));
    }
    let mut psi = match params.heating_quench {
        Some(q) => prop.evolve(initial, q)?,
        None => prop.evolve(initial, 0.0)?,
    };
    for (k, &theta) in params.thetas.iter().enumerate() {
        psi = if k % 2 == 0 { prop.evolve(&psi, theta)? } else { apply_z_rotation(&psi, theta) };
    }
    Ok(psi)
}
