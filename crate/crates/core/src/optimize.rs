//! Small unconstrained optimizers: BFGS with an Armijo backtracking line
//! search, and SPSA.

use rand::Rng;

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when ‖∇f‖∞ falls below this.
    pub grad_tol: f64,
    /// Stop when the relative decrease of f over one step falls below this.
    pub f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            f_tol: 1e-14,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimize `f` given `fg(x) -> (f, ∇f)`.
pub fn bfgs<F>(mut fg: F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x);
    // inverse Hessian approximation, row-major
    let mut h = identity(n);
    let mut converged = inf_norm(&g) < opts.grad_tol;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&p, &g);
        if !(slope < 0.0) {
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let (x_new, f_new, g_new) = loop {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(a, d)| a + step * d).collect();
            let (ft, gt) = fg(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                break (trial, ft, gt);
            }
            step *= 0.5;
            if step < 1e-16 {
                return BfgsResult {
                    x,
                    value: f,
                    gradient: g,
                    iterations,
                    converged: false,
                };
            }
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let decrease = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        converged = inf_norm(&g) < opts.grad_tol || decrease <= opts.f_tol * f.abs();
    }
    BfgsResult {
        x,
        value: f,
        gradient: g,
        iterations,
        converged,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// Central finite-difference gradient.
pub fn numerical_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            work[i] = x[i] + h;
            let up = f(&work);
            work[i] = x[i] - h;
            let down = f(&work);
            work[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// SPSA gain schedule a_k = a/(k+1+A)^0.602, c_k = c/(k+1)^0.101.
#[derive(Clone, Debug)]
pub struct Spsa {
    pub a: f64,
    pub c: f64,
    pub stability: f64,
}

impl Spsa {
    pub fn new(a: f64, c: f64, budget: usize) -> Self {
        Self {
            a,
            c,
            stability: 0.1 * budget as f64,
        }
    }

    pub fn gains(&self, k: usize) -> (f64, f64) {
        let kf = k as f64;
        (self.a / (kf + 1.0 + self.stability).powf(0.602), self.c / (kf + 1.0).powf(0.101))
    }

    /// One iteration: perturb along a random ±1 direction, estimate the
    /// gradient from two evaluations, and step. Returns the two loss values.
    pub fn step<R: Rng, F: FnMut(&[f64]) -> f64>(&self, k: usize, x: &mut [f64], rng: &mut R, mut loss: F) -> (f64, f64) {
        let (ak, ck) = self.gains(k);
        let delta: Vec<f64> = (0..x.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let plus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| v + ck * d).collect();
        let minus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| v - ck * d).collect();
        let lp = loss(&plus);
        let lm = loss(&minus);
        let g = (lp - lm) / (2.0 * ck);
        for (v, d) in x.iter_mut().zip(&delta) {
            *v -= ak * g * d;
        }
        (lp, lm)
    }
}
