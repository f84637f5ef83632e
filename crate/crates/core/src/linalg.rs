//! Dense complex linear algebra on qubit registers.
//!
//! Basis convention: index bit `n - 1 - site` holds the state of `site`, so
//! site 0 is the most significant bit and the leftmost character of a
//! bitstring. Bit value 1 is spin up (σ^z = +1), bit value 0 is spin down.
//! Single-site 2×2 matrices are therefore written in the ordered basis
//! (↓, ↑).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

/// A single-site 2×2 gate stored row-major.
pub type Gate2 = [[Complex64; 2]; 2];

/// A single-site superoperator acting on vec(ρ) with index `2a + b` for
/// the matrix element (a, b).
pub type SuperOp = [[Complex64; 4]; 4];

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest register handled by dense routines.
pub const MAX_DENSE_SITES: usize = 12;

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Pauli and spin-1/2 matrices in the (↓, ↑) basis.
pub mod pauli {
    use super::*;

    fn m(e: [[Complex64; 2]; 2]) -> CMat {
        CMat::from_row_slice(2, 2, &[e[0][0], e[0][1], e[1][0], e[1][1]])
    }

    pub fn identity() -> CMat {
        CMat::identity(2, 2)
    }

    pub fn sigma_x() -> CMat {
        m([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn sigma_y() -> CMat {
        m([[ZERO, I], [-I, ZERO]])
    }

    pub fn sigma_z() -> CMat {
        m([[-ONE, ZERO], [ZERO, ONE]])
    }

    /// σ⁺ = |↑⟩⟨↓|.
    pub fn sigma_plus() -> CMat {
        m([[ZERO, ZERO], [ONE, ZERO]])
    }

    /// σ⁻ = |↓⟩⟨↑|.
    pub fn sigma_minus() -> CMat {
        m([[ZERO, ONE], [ZERO, ZERO]])
    }

    pub fn spin_x() -> CMat {
        sigma_x() * c(0.5)
    }

    pub fn spin_y() -> CMat {
        sigma_y() * c(0.5)
    }

    pub fn spin_z() -> CMat {
        sigma_z() * c(0.5)
    }
}

#[inline]
pub fn site_mask(n_sites: usize, site: usize) -> usize {
    1usize << (n_sites - 1 - site)
}

#[inline]
pub fn site_bit(index: usize, n_sites: usize, site: usize) -> usize {
    (index >> (n_sites - 1 - site)) & 1
}

pub fn check_dense_size(n_sites: usize) -> Result<()> {
    if n_sites > MAX_DENSE_SITES {
        return Err(Error::SizeCap(format!(
            "{n_sites} sites exceeds the dense cap of {MAX_DENSE_SITES}"
        )));
    }
    Ok(())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Embed `block` acting on `sites` (first tensor factor on `sites[0]`) into
/// the full `n_sites` register.
pub fn embed_operator(n_sites: usize, sites: &[usize], block: &CMat) -> Result<CMat> {
    check_dense_size(n_sites)?;
    let k = sites.len();
    if block.nrows() != 1 << k || block.ncols() != 1 << k {
        return Err(Error::Mismatch(format!(
            "block is {}x{}, expected {} sites",
            block.nrows(),
            block.ncols(),
            k
        )));
    }
    for (pos, &s) in sites.iter().enumerate() {
        if s >= n_sites {
            return Err(Error::InvalidSize(format!("site {s} outside register of {n_sites}")));
        }
        if sites[..pos].contains(&s) {
            return Err(Error::InvalidParameter(format!("site {s} repeated")));
        }
    }
    let dim = 1usize << n_sites;
    let masks: Vec<usize> = sites.iter().map(|&s| site_mask(n_sites, s)).collect();
    let all_mask: usize = masks.iter().sum();
    let local = |idx: usize| -> usize {
        masks
            .iter()
            .fold(0usize, |acc, &m| (acc << 1) | usize::from(idx & m != 0))
    };
    let global = |rest: usize, loc: usize| -> usize {
        let mut out = rest;
        for (p, &m) in masks.iter().enumerate() {
            if (loc >> (k - 1 - p)) & 1 == 1 {
                out |= m;
            }
        }
        out
    };
    let mut out = CMat::zeros(dim, dim);
    for col in 0..dim {
        let lc = local(col);
        let rest = col & !all_mask;
        for lr in 0..(1usize << k) {
            let v = block[(lr, lc)];
            if v != ZERO {
                out[(global(rest, lr), col)] += v;
            }
        }
    }
    Ok(out)
}

/// Hermitian eigendecomposition with eigenvalues in ascending order.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(m.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Real symmetric eigendecomposition with eigenvalues in ascending order.
pub fn eigh_real(m: &RMat) -> (Vec<f64>, RMat) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = RMat::from_fn(m.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// max |m - m†| over entries.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Principal square root of a positive semidefinite matrix; negative
/// eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = eigh(m);
    let d: Vec<Complex64> = vals.iter().map(|&x| c(x.max(0.0).sqrt())).collect();
    scale_columns(&vecs, &d) * vecs.adjoint()
}

/// `v * diag(d)`.
pub fn scale_columns(v: &CMat, d: &[Complex64]) -> CMat {
    let mut out = v.clone();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        col *= d[k];
    }
    out
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Tr(a b) without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn gate_adjoint(u: &Gate2) -> Gate2 {
    [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]]
}

/// m ← (u on `site`) · m
pub fn apply_gate_left(m: &mut CMat, n_sites: usize, site: usize, u: &Gate2) {
    let mask = site_mask(n_sites, site);
    let dim = m.nrows();
    let ncols = m.ncols();
    let data = m.as_mut_slice();
    for col in 0..ncols {
        let base = col * dim;
        for i0 in 0..dim {
            if i0 & mask != 0 {
                continue;
            }
            let i1 = i0 | mask;
            let a = data[base + i0];
            let b = data[base + i1];
            data[base + i0] = u[0][0] * a + u[0][1] * b;
            data[base + i1] = u[1][0] * a + u[1][1] * b;
        }
    }
}

/// m ← m · (u on `site`)†
pub fn apply_gate_right_adjoint(m: &mut CMat, n_sites: usize, site: usize, u: &Gate2) {
    let mask = site_mask(n_sites, site);
    let dim = m.nrows();
    let ncols = m.ncols();
    let (u00, u01, u10, u11) = (u[0][0].conj(), u[0][1].conj(), u[1][0].conj(), u[1][1].conj());
    let data = m.as_mut_slice();
    for j0 in 0..ncols {
        if j0 & mask != 0 {
            continue;
        }
        let j1 = j0 | mask;
        for row in 0..dim {
            let a = data[j0 * dim + row];
            let b = data[j1 * dim + row];
            data[j0 * dim + row] = a * u00 + b * u01;
            data[j1 * dim + row] = a * u10 + b * u11;
        }
    }
}

/// U m U† for U = ⊗_k gates[k] on site k of the register.
pub fn conjugate_by_product(m: &CMat, gates: &[&Gate2]) -> CMat {
    let n = gates.len();
    let mut out = m.clone();
    for (site, u) in gates.iter().enumerate() {
        apply_gate_left(&mut out, n, site, u);
        apply_gate_right_adjoint(&mut out, n, site, u);
    }
    out
}

/// Apply a single-site superoperator to `site` of a density matrix.
pub fn apply_site_superop(m: &mut CMat, n_sites: usize, site: usize, s: &SuperOp) {
    let mask = site_mask(n_sites, site);
    let dim = m.nrows();
    let data = m.as_mut_slice();
    for j0 in 0..dim {
        if j0 & mask != 0 {
            continue;
        }
        let j1 = j0 | mask;
        for i0 in 0..dim {
            if i0 & mask != 0 {
                continue;
            }
            let i1 = i0 | mask;
            let idx = [j0 * dim + i0, j1 * dim + i0, j0 * dim + i1, j1 * dim + i1];
            let v = [data[idx[0]], data[idx[1]], data[idx[2]], data[idx[3]]];
            for (r, &slot) in idx.iter().enumerate() {
                data[slot] = s[r][0] * v[0] + s[r][1] * v[1] + s[r][2] * v[2] + s[r][3] * v[3];
            }
        }
    }
}

/// Partial trace keeping `keep` (ascending) of an `n_sites` register.
pub fn partial_trace(m: &CMat, n_sites: usize, keep: &[usize]) -> Result<CMat> {
    if m.nrows() != 1 << n_sites {
        return Err(Error::Mismatch("matrix dimension does not match register".into()));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&s| s >= n_sites) {
        return Err(Error::InvalidParameter(format!("kept sites {keep:?} must be ascending and < {n_sites}")));
    }
    let traced: Vec<usize> = (0..n_sites).filter(|s| !keep.contains(s)).collect();
    let k = keep.len();
    let t = traced.len();
    let compose = |a: usize, r: usize| -> usize {
        let mut idx = 0usize;
        for (p, &s) in keep.iter().enumerate() {
            if (a >> (k - 1 - p)) & 1 == 1 {
                idx |= site_mask(n_sites, s);
            }
        }
        for (p, &s) in traced.iter().enumerate() {
            if (r >> (t - 1 - p)) & 1 == 1 {
                idx |= site_mask(n_sites, s);
            }
        }
        idx
    };
    let dk = 1usize << k;
    let mut out = CMat::zeros(dk, dk);
    for r in 0..(1usize << t) {
        let rows: Vec<usize> = (0..dk).map(|a| compose(a, r)).collect();
        for b in 0..dk {
            for a in 0..dk {
                out[(a, b)] += m[(rows[a], rows[b])];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_matches_kronecker() {
        let sz = pauli::sigma_z();
        let sx = pauli::sigma_x();
        let id = pauli::identity();
        let direct = kron(&kron(&sz, &id), &sx);
        let block = kron(&sz, &sx);
        let embedded = embed_operator(3, &[0, 2], &block).unwrap();
        assert!(max_abs_diff(&direct, &embedded) < 1e-15);
        // reversed site order swaps tensor factors
        let swapped = embed_operator(3, &[2, 0], &kron(&sx, &sz)).unwrap();
        assert!(max_abs_diff(&direct, &swapped) < 1e-15);
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli::sigma_x(), pauli::sigma_y(), pauli::sigma_z());
        // σx σy = i σz
        assert!(max_abs_diff(&(&x * &y), &(&z * I)) < 1e-15);
        assert!(max_abs_diff(&(pauli::sigma_plus() + pauli::sigma_minus()), &x) < 1e-15);
        // σ^z |↑⟩ = +|↑⟩ with ↑ at index 1
        assert_eq!(z[(1, 1)], ONE);
    }

    #[test]
    fn gate_kernels_match_dense() {
        let h = 1.0 / 2f64.sqrt();
        let u: Gate2 = [[c(h), c(h) * I], [c(-h), c(h) * I]];
        let m = CMat::from_fn(8, 8, |i, j| Complex64::new((i * 3 + j) as f64, (i as f64) - (j as f64)));
        let u_dense = CMat::from_row_slice(2, 2, &[u[0][0], u[0][1], u[1][0], u[1][1]]);
        let full = embed_operator(3, &[1], &u_dense).unwrap();
        let expected = &full * &m * full.adjoint();
        let mut got = m.clone();
        apply_gate_left(&mut got, 3, 1, &u);
        apply_gate_right_adjoint(&mut got, 3, 1, &u);
        assert!(max_abs_diff(&expected, &got) < 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = CMat::from_row_slice(2, 2, &[c(0.7), Complex64::new(0.1, 0.2), Complex64::new(0.1, -0.2), c(0.3)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.4), c(0.0), c(0.0), c(0.6)]);
        let ab = kron(&a, &b);
        assert!(max_abs_diff(&partial_trace(&ab, 2, &[0]).unwrap(), &a) < 1e-15);
        assert!(max_abs_diff(&partial_trace(&ab, 2, &[1]).unwrap(), &b) < 1e-15);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = CMat::from_row_slice(2, 2, &[c(0.7), Complex64::new(0.1, 0.2), Complex64::new(0.1, -0.2), c(0.3)]);
        let s = psd_sqrt(&a);
        assert!(max_abs_diff(&(&s * &s), &a) < 1e-13);
    }
}
