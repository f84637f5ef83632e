//! Spin-spin couplings from the full transverse normal-mode sum of a linear
//! ion crystal driven by a three-tone (red, blue, compensation) field.

use serde::{Deserialize, Serialize};

use super::CouplingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{eigh_real, RMat};

const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
const HBAR: f64 = 1.054_571_817e-34;
const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

/// Linear Paul trap and drive parameters. All frequencies are angular (rad/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub n_ions: usize,
    pub axial_freq: f64,
    /// Two transverse branches; each contributes N modes.
    pub transverse_freqs: [f64; 2],
    /// Detunings of the red, blue and compensation tones from the carrier.
    pub detuning_red: f64,
    pub detuning_blue: f64,
    pub detuning_comp: f64,
    pub rabi_red: Vec<f64>,
    pub rabi_blue: Vec<f64>,
    pub rabi_comp: Vec<f64>,
    /// Laser wavenumber (1/m).
    pub wavenumber: f64,
    /// Ion mass (kg).
    pub ion_mass: f64,
}

impl TrapParams {
    /// ⁴⁰Ca⁺ chain driven at 729 nm with symmetric red/blue tones at
    /// ±(ω_COM + `offset`) and uniform Rabi frequencies.
    pub fn calcium_chain(n_ions: usize, axial_freq: f64, transverse_freq: f64, offset: f64, rabi: f64) -> Self {
        let detuning = transverse_freq + offset;
        Self {
            n_ions,
            axial_freq,
            transverse_freqs: [transverse_freq, transverse_freq],
            detuning_red: detuning,
            detuning_blue: detuning,
            detuning_comp: 2.0 * detuning,
            rabi_red: vec![rabi; n_ions],
            rabi_blue: vec![rabi; n_ions],
            rabi_comp: vec![0.0; n_ions],
            wavenumber: 2.0 * std::f64::consts::PI / 729e-9,
            ion_mass: 39.962_590_866 * ATOMIC_MASS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_ions < 2 {
            return Err(Error::InvalidSize(format!("need at least 2 ions, got {}", self.n_ions)));
        }
        let freqs = [
            self.axial_freq,
            self.transverse_freqs[0],
            self.transverse_freqs[1],
            self.detuning_red,
            self.detuning_blue,
            self.detuning_comp,
            self.wavenumber,
            self.ion_mass,
        ];
        if freqs.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::InvalidParameter("trap frequencies, detunings, k and m must be positive".into()));
        }
        for (name, list) in [("red", &self.rabi_red), ("blue", &self.rabi_blue), ("comp", &self.rabi_comp)] {
            if list.len() != self.n_ions {
                return Err(Error::Mismatch(format!(
                    "{name} Rabi list has {} entries for {} ions",
                    list.len(),
                    self.n_ions
                )));
            }
        }
        Ok(())
    }

    /// Characteristic length (e²/(4πε₀ m ω_z²))^{1/3}.
    pub fn length_scale(&self) -> f64 {
        (ELEMENTARY_CHARGE.powi(2)
            / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * self.ion_mass * self.axial_freq.powi(2)))
        .cbrt()
    }
}

fn coulomb_forces(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let mut f = -u[i];
            for j in 0..n {
                if j != i {
                    let d = u[i] - u[j];
                    f += d.signum() / (d * d);
                }
            }
            f
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Dimensionless axial equilibrium positions (units of the trap length
/// scale), found by damped Newton iteration on the force balance.
pub fn equilibrium_positions(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidSize("no ions".into()));
    }
    let spacing = 2.0 / (n as f64).powf(0.56);
    let mut u: Vec<f64> = (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing).collect();
    let mut force = coulomb_forces(&u);
    for _ in 0..500 {
        let residual = max_abs(&force);
        if residual < 1e-12 {
            return Ok(u);
        }
        // Jacobian of the force vector (negative definite)
        let mut jac = RMat::zeros(n, n);
        for i in 0..n {
            let mut diag = -1.0;
            for j in 0..n {
                if j != i {
                    let k = 2.0 / (u[i] - u[j]).abs().powi(3);
                    diag -= k;
                    jac[(i, j)] = k;
                }
            }
            jac[(i, i)] = diag;
        }
        let rhs = nalgebra::DVector::from_iterator(n, force.iter().map(|f| -f));
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::numerical("equilibrium Jacobian", residual))?;
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, d)| a + damping * d).collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            if ordered {
                let f_trial = coulomb_forces(&trial);
                if max_abs(&f_trial) < residual || damping < 1e-6 {
                    u = trial;
                    force = f_trial;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-10 {
                return Err(Error::numerical("equilibrium positions", residual));
            }
        }
    }
    let residual = max_abs(&force);
    if residual < 1e-12 {
        Ok(u)
    } else {
        Err(Error::numerical("equilibrium positions", residual))
    }
}

/// One transverse branch of normal modes.
#[derive(Clone, Debug)]
pub struct NormalModes {
    /// Mode frequencies (rad/s), ascending.
    pub freqs: Vec<f64>,
    /// Orthonormal amplitudes; column n is mode n, row i is ion i.
    pub amplitudes: RMat,
}

/// Transverse modes for a branch with trap frequency `transverse`, given
/// dimensionless equilibrium positions and the axial frequency.
pub fn branch_modes(positions: &[f64], axial: f64, transverse: f64) -> Result<NormalModes> {
    let n = positions.len();
    let ratio2 = (transverse / axial).powi(2);
    let mut k = RMat::zeros(n, n);
    for i in 0..n {
        let mut diag = ratio2;
        for j in 0..n {
            if j != i {
                let c = 1.0 / (positions[i] - positions[j]).abs().powi(3);
                diag -= c;
                k[(i, j)] = c;
            }
        }
        k[(i, i)] = diag;
    }
    let (vals, mut vecs) = eigh_real(&k);
    if vals[0] <= 0.0 {
        return Err(Error::Instability(format!(
            "transverse mode has imaginary frequency (eigenvalue {:.3e}); chain would zig-zag",
            vals[0]
        )));
    }
    for mut col in vecs.column_iter_mut() {
        if col.sum() < 0.0 {
            col.neg_mut();
        }
    }
    Ok(NormalModes {
        freqs: vals.iter().map(|v| axial * v.sqrt()).collect(),
        amplitudes: vecs,
    })
}

/// Both transverse branches of the chain described by `trap`.
pub fn transverse_modes(trap: &TrapParams) -> Result<[NormalModes; 2]> {
    trap.validate()?;
    let u = equilibrium_positions(trap.n_ions)?;
    Ok([
        branch_modes(&u, trap.axial_freq, trap.transverse_freqs[0])?,
        branch_modes(&u, trap.axial_freq, trap.transverse_freqs[1])?,
    ])
}

/// J_ij (rad/s) summed over all 2N transverse modes and the three drive tones,
/// with the compensation tone weighted by 1/2.
pub fn mode_sum_couplings(trap: &TrapParams) -> Result<CouplingMatrix> {
    let branches = transverse_modes(trap)?;
    let n = trap.n_ions;
    let prefactor = HBAR * trap.wavenumber.powi(2) / (4.0 * trap.ion_mass);
    let mut values = vec![0.0; n * n];
    for modes in &branches {
        for (m, &w) in modes.freqs.iter().enumerate() {
            let w2 = w * w;
            let red = 1.0 / (trap.detuning_red.powi(2) - w2);
            let blue = 1.0 / (trap.detuning_blue.powi(2) - w2);
            let comp = 0.5 / (trap.detuning_comp.powi(2) - w2);
            for i in 0..n {
                for j in i + 1..n {
                    let drive = trap.rabi_red[i] * trap.rabi_red[j] * red
                        + trap.rabi_blue[i] * trap.rabi_blue[j] * blue
                        + trap.rabi_comp[i] * trap.rabi_comp[j] * comp;
                    let v = prefactor * modes.amplitudes[(i, m)] * modes.amplitudes[(j, m)] * drive;
                    values[i * n + j] += v;
                    values[j * n + i] += v;
                }
            }
        }
    }
    CouplingMatrix::new(n, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_ion_positions_are_analytic() {
        let u = equilibrium_positions(3).unwrap();
        let outer = 1.25f64.cbrt();
        assert!((u[0] + outer).abs() < 1e-12);
        assert!(u[1].abs() < 1e-12);
        assert!((u[2] - outer).abs() < 1e-12);
    }

    #[test]
    fn com_mode_is_uniform_at_trap_frequency() {
        let w = 2.0 * std::f64::consts::PI;
        let trap = TrapParams::calcium_chain(7, w * 0.2e6, w * 2.93e6, w * 25e3, w * 50e3);
        let [modes, _] = transverse_modes(&trap).unwrap();
        // COM is the highest transverse mode
        let com = modes.freqs.len() - 1;
        assert!((modes.freqs[com] - trap.transverse_freqs[0]).abs() / trap.transverse_freqs[0] < 1e-12);
        for i in 0..7 {
            assert!((modes.amplitudes[(i, com)] - 1.0 / 7f64.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn soft_transverse_confinement_is_unstable() {
        let w = 2.0 * std::f64::consts::PI;
        let trap = TrapParams::calcium_chain(10, w * 1e6, w * 1.2e6, w * 25e3, w * 50e3);
        assert!(matches!(mode_sum_couplings(&trap), Err(Error::Instability(_))));
    }

    #[test]
    fn paper_setting_detuning() {
        let w = 2.0 * std::f64::consts::PI;
        let trap = TrapParams::calcium_chain(5, w * 0.2e6, w * 2.93e6, w * 25e3, w * 50e3);
        assert!((trap.detuning_blue - w * 2.955e6).abs() < 1e-3);
        let j = mode_sum_couplings(&trap).unwrap();
        // blue-side detuning above every mode: antiferromagnetic (positive) couplings
        assert!(j.values.iter().enumerate().all(|(k, &v)| k % 6 == 0 || v > 0.0));
    }
}
