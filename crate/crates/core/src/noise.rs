//! Site-local depolarizing plus decay channel and its calibration from
//! Z-basis magnetization statistics.
//!
//! Kraus operators in the (↓, ↑) basis:
//! E₀ = diag(√(1 − 3p₁/4), √(1 − 3p₁/4 − p₂)), E₁,₂,₃ = √(p₁/4) σ^{x,y,z},
//! E₄ = √p₂ |↓⟩⟨↑|.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, Gate2, SuperOp, I, ZERO};
use crate::measurement::{Axis, MeasurementDataset, MeasurementSetting};
use crate::statekit::{format_bitstring, parse_bitstring, DensityMatrix, PureState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p1: f64,
    pub p2: f64,
}

impl NoiseParams {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let p = Self { p1, p2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.p1.is_finite()
            && self.p2.is_finite()
            && self.p1 >= 0.0
            && self.p2 >= 0.0
            && self.p2 <= 1.0
            && 1.0 - 0.75 * self.p1 - self.p2 >= -1e-15;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "noise (p1={}, p2={}) outside p1, p2 >= 0, 1 - 3p1/4 - p2 >= 0",
                self.p1, self.p2
            )))
        }
    }

    pub fn is_identity(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }

    pub fn kraus(&self) -> [Gate2; 5] {
        let e0a = (1.0 - 0.75 * self.p1).max(0.0).sqrt();
        let e0b = (1.0 - 0.75 * self.p1 - self.p2).max(0.0).sqrt();
        let q = c((self.p1 / 4.0).sqrt());
        let d = c(self.p2.sqrt());
        [
            [[c(e0a), ZERO], [ZERO, c(e0b)]],
            [[ZERO, q], [q, ZERO]],
            [[ZERO, q * I], [-q * I, ZERO]],
            [[-q, ZERO], [ZERO, q]],
            [[ZERO, d], [ZERO, ZERO]],
        ]
    }

    /// Superoperator of the single-site map on vec(ρ) (index 2a + b).
    pub fn superop(&self) -> SuperOp {
        let mut s = [[ZERO; 4]; 4];
        for e in self.kraus() {
            for (a, b, cc, d) in quad() {
                s[2 * a + b][2 * cc + d] += e[a][cc] * e[b][d].conj();
            }
        }
        s
    }

    /// Superoperator of the adjoint (Heisenberg-picture) map X ↦ Σ E†XE.
    pub fn adjoint_superop(&self) -> SuperOp {
        let mut s = [[ZERO; 4]; 4];
        for e in self.kraus() {
            for (a, b, cc, d) in quad() {
                s[2 * a + b][2 * cc + d] += e[cc][a].conj() * e[d][b];
            }
        }
        s
    }

    /// Per-site confusion matrix T[out][ideal] of a measurement along `axis`.
    pub fn readout_matrix(&self, axis: Axis) -> [[f64; 2]; 2] {
        match axis {
            Axis::Z => {
                let keep_up = 1.0 - self.p1 / 2.0 - self.p2;
                let raise = self.p1 / 2.0;
                [[1.0 - raise, 1.0 - keep_up], [raise, keep_up]]
            }
            Axis::X | Axis::Y => {
                let contrast =
                    ((1.0 - 0.75 * self.p1) * (1.0 - 0.75 * self.p1 - self.p2)).max(0.0).sqrt() - self.p1 / 4.0;
                let stay = 0.5 * (1.0 + contrast);
                [[stay, 1.0 - stay], [1.0 - stay, stay]]
            }
        }
    }

    /// Replace an ideal outcome distribution of `setting` by the distribution
    /// of the channel-corrupted state. The channel acts on Pauli-basis
    /// outcomes as a product of per-site confusion matrices.
    pub fn apply_readout(&self, p: &mut [f64], setting: &MeasurementSetting) -> Result<()> {
        let n = setting.len();
        if p.len() != 1 << n {
            return Err(Error::Mismatch(format!("{} probabilities for {n} sites", p.len())));
        }
        if self.is_identity() {
            return Ok(());
        }
        for (pos, &axis) in setting.axes.iter().enumerate() {
            let t = self.readout_matrix(axis);
            let mask = 1usize << (n - 1 - pos);
            for i0 in 0..p.len() {
                if i0 & mask == 0 {
                    let i1 = i0 | mask;
                    let (x0, x1) = (p[i0], p[i1]);
                    p[i0] = t[0][0] * x0 + t[0][1] * x1;
                    p[i1] = t[1][0] * x0 + t[1][1] * x1;
                }
            }
        }
        Ok(())
    }
}

fn quad() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..16).map(|k| (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1))
}

/// D_p applied to every site of ρ.
pub fn apply_channel(rho: &DensityMatrix, params: &NoiseParams) -> Result<DensityMatrix> {
    params.validate()?;
    let mut m = rho.matrix.clone();
    apply_channel_matrix(&mut m, rho.n_sites, params);
    Ok(DensityMatrix {
        n_sites: rho.n_sites,
        matrix: m,
    })
}

pub fn apply_channel_matrix(m: &mut CMat, n_sites: usize, params: &NoiseParams) {
    if params.is_identity() {
        return;
    }
    let s = params.superop();
    for site in 0..n_sites {
        linalg::apply_site_superop(m, n_sites, site, &s);
    }
}

/// D_p† applied to every site of an operator.
pub fn apply_adjoint_channel_matrix(m: &mut CMat, n_sites: usize, params: &NoiseParams) {
    if params.is_identity() {
        return;
    }
    let s = params.adjoint_superop();
    for site in 0..n_sites {
        linalg::apply_site_superop(m, n_sites, site, &s);
    }
}

/// Mean and variance of the up-count K′ after the channel, for an input
/// with exactly `k_up` of `n` spins up: each ↑ stays ↑ with probability
/// a = 1 − p₁/2 − p₂ and each ↓ turns ↑ with probability b = p₁/2, all
/// independently.
pub fn predicted_moments(n: usize, k_up: usize, params: &NoiseParams) -> (f64, f64) {
    let a = 1.0 - params.p1 / 2.0 - params.p2;
    let b = params.p1 / 2.0;
    let k = k_up as f64;
    let rest = (n - k_up) as f64;
    (k * a + rest * b, k * a * (1.0 - a) + rest * b * (1.0 - b))
}

fn moment_jacobian(n: usize, k_up: usize, params: &NoiseParams) -> [[f64; 2]; 2] {
    let a = 1.0 - params.p1 / 2.0 - params.p2;
    let b = params.p1 / 2.0;
    let k = k_up as f64;
    let rest = (n - k_up) as f64;
    [
        [(rest - k) / 2.0, -k],
        [-0.5 * k * (1.0 - 2.0 * a) + 0.5 * rest * (1.0 - 2.0 * b), -k * (1.0 - 2.0 * a)],
    ]
}

fn project(p1: f64, p2: f64) -> NoiseParams {
    let mut p1 = p1.clamp(0.0, 4.0 / 3.0);
    let mut p2 = p2.clamp(0.0, 1.0);
    let excess = 0.75 * p1 + p2 - 1.0;
    if excess > 0.0 {
        // pull back along the constraint normal
        let norm2 = 0.75f64.powi(2) + 1.0;
        p1 -= 0.75 * excess / norm2;
        p2 -= excess / norm2;
        p1 = p1.max(0.0);
        p2 = p2.max(0.0);
    }
    NoiseParams { p1, p2 }
}

/// Up-count sample moments (mean, unbiased variance, shot count) over every
/// all-Z record of a dataset.
pub fn z_moments(data: &MeasurementDataset) -> Result<(f64, f64, u64)> {
    let mut total = 0u64;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for r in &data.records {
        if r.axes.axes.iter().any(|a| *a != Axis::Z) {
            continue;
        }
        for (bits, &count) in &r.counts {
            let k = parse_bitstring(bits)?.count_ones() as f64;
            total += count;
            sum += count as f64 * k;
            sum2 += count as f64 * k * k;
        }
    }
    if total < 2 {
        return Err(Error::InvalidParameter("calibration needs at least two all-Z shots".into()));
    }
    let s = total as f64;
    let mean = sum / s;
    let var = ((sum2 - s * mean * mean) / (s - 1.0)).max(0.0);
    Ok((mean, var, total))
}

/// (p₁, p₂) matching the predicted mean and variance of the measured up
/// count to the sample moments of the all-Z shots in `z_data`.
/// `ideal_magnetization` is the σ^z sum of the noiseless state.
pub fn calibrate_noise(z_data: &MeasurementDataset, ideal_magnetization: i64) -> Result<NoiseParams> {
    let n = z_data.register.len();
    let twice_up = ideal_magnetization + n as i64;
    if twice_up < 0 || twice_up % 2 != 0 || twice_up / 2 > n as i64 {
        return Err(Error::InvalidParameter(format!(
            "magnetization {ideal_magnetization} unattainable on {n} sites"
        )));
    }
    let k_up = (twice_up / 2) as usize;
    if k_up == 0 || k_up == n {
        return Err(Error::InvalidParameter(
            "a fully polarized reference does not determine both rates".into(),
        ));
    }
    let (mean, var, shots) = z_moments(z_data)?;
    let s = shots as f64;
    if var == 0.0 && mean == k_up as f64 {
        return Ok(NoiseParams::default());
    }
    let se_mean = (var / s).sqrt().max(1.0 / s);
    let se_var = (var * (2.0 / (s - 1.0)).sqrt()).max(1.0 / s);
    let residual = |p: &NoiseParams| {
        let (m, v) = predicted_moments(n, k_up, p);
        [(m - mean) / se_mean, (v - var) / se_var]
    };
    let cost = |r: [f64; 2]| r[0] * r[0] + r[1] * r[1];

    let mut p = NoiseParams { p1: 0.01, p2: 0.01 };
    let mut r = residual(&p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let j = moment_jacobian(n, k_up, &p);
        let js = [
            [j[0][0] / se_mean, j[0][1] / se_mean],
            [j[1][0] / se_var, j[1][1] / se_var],
        ];
        // (JᵀJ + λ diag(JᵀJ)) δ = −Jᵀr
        let jtj = [
            [js[0][0] * js[0][0] + js[1][0] * js[1][0], js[0][0] * js[0][1] + js[1][0] * js[1][1]],
            [js[0][1] * js[0][0] + js[1][1] * js[1][0], js[0][1] * js[0][1] + js[1][1] * js[1][1]],
        ];
        let g = [js[0][0] * r[0] + js[1][0] * r[1], js[0][1] * r[0] + js[1][1] * r[1]];
        let a = [[jtj[0][0] * (1.0 + lambda), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + lambda)]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let d1 = -(a[1][1] * g[0] - a[0][1] * g[1]) / det;
        let d2 = -(a[0][0] * g[1] - a[1][0] * g[0]) / det;
        let trial = project(p.p1 + d1, p.p2 + d2);
        let rt = residual(&trial);
        if cost(rt) < cost(r) {
            let moved = (trial.p1 - p.p1).abs() + (trial.p2 - p.p2).abs();
            p = trial;
            r = rt;
            lambda = (lambda / 3.0).max(1e-12);
            if moved < 1e-14 {
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    let worst = r[0].abs().max(r[1].abs());
    if worst > 3.0 {
        return Err(Error::CalibrationFailure { residual: worst });
    }
    Ok(p)
}

type Sparse = BTreeMap<usize, Complex64>;

fn apply_sparse(psi: &Sparse, n: usize, site: usize, g: &Gate2) -> Sparse {
    let mask = linalg::site_mask(n, site);
    let mut out = Sparse::new();
    for (&idx, &amp) in psi {
        let bit = usize::from(idx & mask != 0);
        for (row, target) in [(0usize, idx & !mask), (1, idx | mask)] {
            let v = g[row][bit] * amp;
            if v != ZERO {
                *out.entry(target).or_insert(ZERO) += v;
            }
        }
    }
    out.retain(|_, v| *v != ZERO);
    out
}

/// Monte Carlo oracle for the channel: each shot follows a quantum
/// trajectory, drawing one Kraus operator per site with Born weights, then
/// measures every site along `setting`.
pub fn sample_trajectories<R: Rng>(
    state: &PureState,
    setting: &MeasurementSetting,
    shots: u64,
    params: &NoiseParams,
    rng: &mut R,
) -> Result<BTreeMap<String, u64>> {
    params.validate()?;
    let n = state.n_sites;
    if setting.len() != n {
        return Err(Error::Mismatch(format!("setting {setting} on a {n}-site state")));
    }
    let kraus = params.kraus();
    let start: Sparse = state
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != ZERO)
        .map(|(i, a)| (i, *a))
        .collect();
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let mut psi = start.clone();
        for site in 0..n {
            let branches: Vec<(f64, Sparse)> = kraus
                .iter()
                .map(|e| {
                    let out = apply_sparse(&psi, n, site, e);
                    (out.values().map(|a| a.norm_sqr()).sum(), out)
                })
                .collect();
            let mut u = rng.random::<f64>() * branches.iter().map(|b| b.0).sum::<f64>();
            let mut chosen = branches.len() - 1;
            for (k, b) in branches.iter().enumerate() {
                if u < b.0 {
                    chosen = k;
                    break;
                }
                u -= b.0;
            }
            let (w, next) = branches.into_iter().nth(chosen).unwrap();
            let scale = 1.0 / w.sqrt();
            psi = next.into_iter().map(|(i, a)| (i, a * scale)).collect();
        }
        for (site, axis) in setting.axes.iter().enumerate() {
            if *axis != Axis::Z {
                psi = apply_sparse(&psi, n, site, &axis.rotation());
            }
        }
        let mut u = rng.random::<f64>() * psi.values().map(|a| a.norm_sqr()).sum::<f64>();
        let mut outcome = *psi.keys().next_back().unwrap();
        for (&i, a) in &psi {
            let w = a.norm_sqr();
            if u < w {
                outcome = i;
                break;
            }
            u -= w;
        }
        *counts.entry(format_bitstring(outcome, n)).or_insert(0) += 1;
    }
    Ok(counts)
}
