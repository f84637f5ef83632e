use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eht::Geometry;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::spinmodel::{link_block, SpinModel};
use crate::statekit::{reduced_density_matrix, PureState};

/// β(x) = 2πx on the half space x > 0.
pub fn beta_bw(x: f64) -> f64 {
    2.0 * PI * x
}

/// β(x) = 2π (R² − x²)/(2R) inside a ball of radius R.
pub fn beta_cft(x: f64, radius: f64) -> f64 {
    PI * (radius * radius - x * x) / radius
}

/// Local deformation for the two intervals ±(a, b) of a massless Dirac field.
pub fn beta_loc(x: f64, a: f64, b: f64) -> f64 {
    let x2 = x * x;
    (b * b - x2) * (x2 - a * a) / (2.0 * (b - a) * (a * b + x2))
}

/// Weight of the bi-local term linking x to its conjugate point.
pub fn beta_biloc(x: f64, a: f64, b: f64) -> f64 {
    a * b / (x * (a * b + x * x)) * beta_loc(x, a, b)
}

/// x_c = −ab/x.
pub fn conjugate_point(x: f64, a: f64, b: f64) -> f64 {
    -a * b / x
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    BwHalfSpace,
    CftBall,
    DiracTwoIntervalLocal,
    DiracTwoIntervalBilocal,
}

/// A reference inverse-temperature profile sampled at given coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    pub kind: ProfileKind,
    /// Ball radius (cft-ball only).
    pub radius: Option<f64>,
    /// Interval bounds 0 < a < b (two-interval kinds only).
    pub interval: Option<(f64, f64)>,
    pub coordinates: Vec<f64>,
    pub values: Vec<f64>,
}

impl ReferenceProfile {
    pub fn bw(coordinates: &[f64]) -> Self {
        Self {
            kind: ProfileKind::BwHalfSpace,
            radius: None,
            interval: None,
            coordinates: coordinates.to_vec(),
            values: coordinates.iter().map(|&x| beta_bw(x)).collect(),
        }
    }

    pub fn cft_ball(radius: f64, coordinates: &[f64]) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
        }
        Ok(Self {
            kind: ProfileKind::CftBall,
            radius: Some(radius),
            interval: None,
            coordinates: coordinates.to_vec(),
            values: coordinates.iter().map(|&x| beta_cft(x, radius)).collect(),
        })
    }

    pub fn dirac(bilocal: bool, a: f64, b: f64, coordinates: &[f64]) -> Result<Self> {
        if !(a > 0.0 && b > a) {
            return Err(Error::InvalidParameter(format!("need 0 < a < b, got a={a}, b={b}")));
        }
        let (kind, f): (_, fn(f64, f64, f64) -> f64) = if bilocal {
            (ProfileKind::DiracTwoIntervalBilocal, beta_biloc)
        } else {
            (ProfileKind::DiracTwoIntervalLocal, beta_loc)
        };
        Ok(Self {
            kind,
            radius: None,
            interval: Some((a, b)),
            coordinates: coordinates.to_vec(),
            values: coordinates.iter().map(|&x| f(x, a, b)).collect(),
        })
    }

    /// The profile evaluated at the nearest-neighbour links of a lattice
    /// subsystem with unit spacing and cuts halfway between sites. For a
    /// contiguous block of L sites link n = 1..L−1 sits at distance n from
    /// the left cut, so the half-space profile is ∝ n and the ball profile
    /// (R = L/2) is ∝ n(L − n). Two equal intervals separated by d sites map
    /// to ±(d/2, d/2 + L), with links of A first.
    pub fn lattice(kind: ProfileKind, geometry: &Geometry) -> Result<Self> {
        geometry.validate()?;
        match (kind, geometry) {
            (ProfileKind::BwHalfSpace, &Geometry::Contiguous { len, .. }) => {
                let xs: Vec<f64> = (1..len).map(|n| n as f64).collect();
                Ok(Self::bw(&xs))
            }
            (ProfileKind::CftBall, &Geometry::Contiguous { len, .. }) => {
                let r = len as f64 / 2.0;
                let xs: Vec<f64> = (1..len).map(|n| n as f64 - r).collect();
                Self::cft_ball(r, &xs)
            }
            (
                ProfileKind::DiracTwoIntervalLocal | ProfileKind::DiracTwoIntervalBilocal,
                &Geometry::TwoIntervals { a_len, b_len, .. },
            ) => {
                if a_len != b_len {
                    return Err(Error::InvalidParameter("two-interval profiles need equal intervals".into()));
                }
                let d = geometry.separation();
                if d == 0 {
                    return Err(Error::InvalidParameter("two-interval profiles need separated intervals".into()));
                }
                let a = d as f64 / 2.0;
                let b = a + a_len as f64;
                let right: Vec<f64> = (1..a_len).map(|n| a + n as f64).collect();
                let xs: Vec<f64> = right.iter().rev().map(|x| -x).chain(right.iter().copied()).collect();
                Self::dirac(kind == ProfileKind::DiracTwoIntervalBilocal, a, b, &xs)
            }
            _ => Err(Error::InvalidParameter(format!("{kind:?} does not apply to {geometry:?}"))),
        }
    }

    /// Least-squares factor s minimizing Σ (fitted − s·values)².
    pub fn scale_to(&self, fitted: &[f64]) -> f64 {
        let num: f64 = self.values.iter().zip(fitted).map(|(r, f)| r * f).sum();
        let den: f64 = self.values.iter().map(|r| r * r).sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// `site,beta,beta_ref` rows for the first `reference.values.len()`
/// coefficients, with the reference scaled onto the fit.
pub fn profile_csv(beta: &[f64], reference: &ReferenceProfile) -> Result<String> {
    let m = reference.values.len();
    if beta.len() < m {
        return Err(Error::Mismatch(format!("{} coefficients for a {m}-point profile", beta.len())));
    }
    let s = reference.scale_to(&beta[..m]);
    let mut out = String::from("site,beta,beta_ref\n");
    for (k, (b, r)) in beta.iter().zip(&reference.values).enumerate() {
        out.push_str(&format!("{k},{b:.12e},{:.12e}\n", s * r));
    }
    Ok(out)
}

/// Quadratic and continuous two-segment linear least-squares fits of a
/// profile against its index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeFit {
    /// c₀ + c₁ j + c₂ j².
    pub parabola: [f64; 3],
    pub parabola_r2: f64,
    pub parabola_rss: f64,
    /// Vertex −c₁/(2c₂) of the parabola.
    pub vertex: f64,
    pub piecewise_rss: f64,
    /// Index of the largest value.
    pub argmax: usize,
}

impl ShapeFit {
    pub fn interior_maximum(&self, len: usize) -> bool {
        self.argmax > 0 && self.argmax + 1 < len
    }
}

fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let a = DMatrix::from_fn(y.len(), columns.len(), |i, k| columns[k][i]);
    let b = DVector::from_column_slice(y);
    let coeffs = a.clone().svd(true, true).solve(&b, 1e-12).expect("SVD with both factors");
    let rss = (&a * &coeffs - &b).norm_squared();
    (coeffs.iter().copied().collect(), rss)
}

pub fn shape_fit(values: &[f64]) -> Result<ShapeFit> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidSize(format!("shape fit needs 3 points, got {n}")));
    }
    let xs: Vec<f64> = (0..n).map(|j| j as f64).collect();
    let ones = vec![1.0; n];
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let (c, rss) = least_squares(&[ones.clone(), xs.clone(), sq], values);
    let mean = values.iter().sum::<f64>() / n as f64;
    let tss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let piecewise_rss = (1..n - 1)
        .map(|k| {
            let hinge: Vec<f64> = xs.iter().map(|x| (x - k as f64).max(0.0)).collect();
            least_squares(&[ones.clone(), xs.clone(), hinge], values).1
        })
        .fold(f64::INFINITY, f64::min);
    let argmax = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap();
    Ok(ShapeFit {
        parabola: [c[0], c[1], c[2]],
        parabola_r2: r2,
        parabola_rss: rss,
        vertex: -c[1] / (2.0 * c[2]),
        piecewise_rss: if n > 3 { piecewise_rss } else { 0.0 },
        argmax,
    })
}

/// Link energies ⟨h_j⟩ of the global state and of the leading Schmidt
/// vectors of a contiguous subsystem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtProfile {
    pub sites: Vec<usize>,
    /// Entanglement energies ξ_α of the returned vectors.
    pub xi: Vec<f64>,
    /// ⟨ψ|h_j|ψ⟩ for the links j, j+1 inside the subsystem.
    pub global: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// |⟨Φ^α|h_j|Φ^α⟩ − ⟨ψ|h_j|ψ⟩|.
    pub differences: Vec<Vec<f64>>,
}

/// ⟨v|h|v⟩ with a 4×4 block h on positions (p, p+1) of an n-bit register.
fn pair_expectation(v: &[Complex64], n: usize, p: usize, block: &CMat) -> f64 {
    let m0 = linalg::site_mask(n, p);
    let m1 = linalg::site_mask(n, p + 1);
    let mut acc = Complex64::new(0.0, 0.0);
    for base in 0..v.len() {
        if base & (m0 | m1) != 0 {
            continue;
        }
        let idx = [base, base | m1, base | m0, base | m0 | m1];
        for (r, &ir) in idx.iter().enumerate() {
            for (s, &is) in idx.iter().enumerate() {
                let h = block[(r, s)];
                if h != Complex64::new(0.0, 0.0) {
                    acc += v[ir].conj() * h * v[is];
                }
            }
        }
    }
    acc.re
}

pub fn schmidt_energy_profile(
    state: &PureState,
    model: &SpinModel,
    subsystem: &[usize],
    n_vectors: usize,
) -> Result<SchmidtProfile> {
    if state.n_sites != model.n_sites {
        return Err(Error::Mismatch(format!("{}-site state, {}-site model", state.n_sites, model.n_sites)));
    }
    if subsystem.len() < 2 || subsystem.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidParameter("subsystem must be a contiguous block of at least 2 sites".into()));
    }
    let block = link_block(model.coupling_j, model.anisotropy_delta);
    let rho = reduced_density_matrix(state, subsystem)?;
    let (vals, vecs) = linalg::eigh(&rho.matrix);
    let l = subsystem.len();
    let links = 0..l - 1;
    let global: Vec<f64> = links
        .clone()
        .map(|p| pair_expectation(&state.amplitudes, state.n_sites, subsystem[p], &block))
        .collect();
    let count = n_vectors.min(vals.len());
    let mut xi = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for k in (0..vals.len()).rev().take(count) {
        let v: Vec<Complex64> = vecs.column(k).iter().copied().collect();
        xi.push(if vals[k] > 0.0 { -vals[k].ln() } else { f64::INFINITY });
        vectors.push(links.clone().map(|p| pair_expectation(&v, l, p, &block)).collect::<Vec<_>>());
    }
    let differences = vectors
        .iter()
        .map(|row: &Vec<f64>| row.iter().zip(&global).map(|(a, b)| (a - b).abs()).collect())
        .collect();
    Ok(SchmidtProfile {
        sites: subsystem.to_vec(),
        xi,
        global,
        vectors,
        differences,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingClass {
    AreaLike,
    Intermediate,
    VolumeLike,
}

impl fmt::Display for ScalingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingClass::AreaLike => "area-like",
            ScalingClass::Intermediate => "intermediate",
            ScalingClass::VolumeLike => "volume-like",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyScaling {
    /// (L_A, S) sorted by L_A.
    pub points: Vec<(usize, f64)>,
    /// Least-squares slope in nats per site.
    pub slope: f64,
    pub intercept: f64,
    pub class: ScalingClass,
}

/// Linear fit of S against L_A; area-like below 0.05 log 2 per site,
/// volume-like above 0.5 log 2 per site.
pub fn entropy_scaling(points: &[(usize, f64)]) -> Result<EntropyScaling> {
    let mut pts = points.to_vec();
    pts.sort_by_key(|p| p.0);
    pts.dedup_by_key(|p| p.0);
    if pts.len() != points.len() {
        return Err(Error::InvalidParameter("subsystem sizes repeat".into()));
    }
    if pts.len() < 3 {
        return Err(Error::InvalidSize(format!("need 3 subsystem sizes, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ln2 = 2f64.ln();
    let class = if slope <= 0.05 * ln2 {
        ScalingClass::AreaLike
    } else if slope >= 0.5 * ln2 {
        ScalingClass::VolumeLike
    } else {
        ScalingClass::Intermediate
    };
    Ok(EntropyScaling {
        points: pts,
        slope,
        intercept: my - slope * mx,
        class,
    })
}

/// `L_A,S,slope` rows.
pub fn entropy_scaling_csv(scaling: &EntropyScaling) -> String {
    let mut out = String::from("L_A,S,slope\n");
    for (l, s) in &scaling.points {
        out.push_str(&format!("{l},{s:.12e},{:.12e}\n", scaling.slope));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinmodel::build_xxz;
    use crate::statekit::ground_state;

    #[test]
    fn ball_peak_and_edges() {
        assert!((beta_cft(0.0, 3.0) - PI * 3.0).abs() < 1e-14);
        assert!(beta_cft(3.0, 3.0).abs() < 1e-14 && beta_cft(-3.0, 3.0).abs() < 1e-14);
        assert_eq!(beta_bw(0.0), 0.0);
    }

    #[test]
    fn lattice_ball_is_n_times_l_minus_n() {
        let p = ReferenceProfile::lattice(ProfileKind::CftBall, &Geometry::contiguous(2, 6)).unwrap();
        let r = 3.0;
        for (k, v) in p.values.iter().enumerate() {
            let n = (k + 1) as f64;
            assert!((v - PI / r * n * (6.0 - n)).abs() < 1e-12);
        }
        let bw = ReferenceProfile::lattice(ProfileKind::BwHalfSpace, &Geometry::contiguous(0, 4)).unwrap();
        assert_eq!(bw.coordinates, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn bilocal_weight_vanishes_in_both_limits() {
        let r = 1.5;
        // far apart: b = a + 2R, a → ∞, evaluated mid-interval
        let a = 1e6;
        let far = beta_biloc(a + r, a, a + 2.0 * r);
        assert!(far.abs() < 1e-5, "{far}");
        // touching: b = R, a → 0
        let a = 1e-9;
        let near = beta_biloc(0.5 * r, a, r);
        assert!(near.abs() < 1e-7, "{near}");
        assert!((conjugate_point(2.0, 1.0, 2.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn dirac_two_interval_lattice_is_symmetric() {
        let g = Geometry::two_intervals(1, 3, 6, 3);
        let p = ReferenceProfile::lattice(ProfileKind::DiracTwoIntervalLocal, &g).unwrap();
        assert_eq!(p.interval, Some((1.0, 4.0)));
        assert_eq!(p.values.len(), 4);
        assert!((p.values[0] - p.values[3]).abs() < 1e-14 && p.values.iter().all(|v| *v > 0.0));
        assert!(ReferenceProfile::dirac(false, 2.0, 1.0, &[1.5]).is_err());
    }

    #[test]
    fn parabola_recovered_exactly() {
        let v: Vec<f64> = (0..5).map(|j| 1.0 + 2.0 * j as f64 - 0.5 * (j * j) as f64).collect();
        let s = shape_fit(&v).unwrap();
        assert!((s.parabola_r2 - 1.0).abs() < 1e-12);
        assert!((s.vertex - 2.0).abs() < 1e-10);
        assert!(s.interior_maximum(5));
        let tent = [0.0, 1.0, 2.0, 1.0, 0.0];
        assert!(shape_fit(&tent).unwrap().piecewise_rss < 1e-20);
    }

    #[test]
    fn spectral_resolution_of_link_energies() {
        let model = build_xxz(8, 1.0, 1.0).unwrap();
        let (_, psi) = ground_state(&model, None).unwrap();
        let sub = [2, 3, 4, 5];
        let p = schmidt_energy_profile(&psi, &model, &sub, 16).unwrap();
        for (j, g) in p.global.iter().enumerate() {
            let resolved: f64 = p.xi.iter().zip(&p.vectors).map(|(x, row)| (-x).exp() * row[j]).sum();
            assert!((resolved - g).abs() < 1e-10, "link {j}");
        }
    }

    #[test]
    fn product_state_has_one_schmidt_vector() {
        let model = build_xxz(4, 1.0, 1.0).unwrap();
        let psi = PureState::from_bitstring("0101").unwrap();
        let p = schmidt_energy_profile(&psi, &model, &[1, 2], 1).unwrap();
        assert!(p.xi[0].abs() < 1e-12);
        assert!(p.differences[0].iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn scaling_extremes() {
        let flat = entropy_scaling(&[(2, 0.0), (3, 0.0), (4, 0.0)]).unwrap();
        assert_eq!(flat.class, ScalingClass::AreaLike);
        let ln2 = 2f64.ln();
        let vol = entropy_scaling(&[(2, 2.0 * ln2), (3, 3.0 * ln2), (4, 4.0 * ln2)]).unwrap();
        assert_eq!(vol.class, ScalingClass::VolumeLike);
        assert!((vol.slope - ln2).abs() < 1e-12);
        assert!(entropy_scaling(&[(2, 0.0), (3, 0.0)]).is_err());
        assert!(entropy_scaling_csv(&vol).starts_with("L_A,S,slope\n2,"));
    }
}
