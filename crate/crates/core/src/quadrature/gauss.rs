use nalgebra::{DMatrix, SymmetricEigen};

use crate::{BinnError, Result};

pub const MAX_ORDER: usize = 64;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let s: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum();
        s * h
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + h * x, w * h))
    }
}

/// Gauss–Legendre nodes and weights by Newton iteration on `P_n`.
pub fn gauss_rule(n: usize) -> Result<GaussRule> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(BinnError::Config(format!(
            "Gauss order must lie in 1..={MAX_ORDER}, got {n}"
        )));
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    Ok(GaussRule { points, weights })
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss rule for `∫_0^1 -ln(s) f(s) ds`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogGaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LogGaussRule {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * f(*s))
            .sum()
    }
}

/// Log-weighted Gauss rule with `n` points.
///
/// The measure `-ln(s) ds` on [0, 1] equals the image of the unit square
/// under `(a, b) -> a b`, since `∫ -ln(s) f(s) ds = ∫∫ f(a b) da db`. A
/// tensor Gauss–Legendre rule on the square is therefore a discrete measure
/// that matches every moment up to degree `2m - 1`; the recurrence
/// coefficients come from the discretized Stieltjes procedure on it and the
/// nodes from the eigen-decomposition of the Jacobi matrix.
pub fn log_gauss_rule(n: usize) -> Result<LogGaussRule> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(BinnError::Config(format!(
            "log-Gauss order must lie in 1..={MAX_ORDER}, got {n}"
        )));
    }
    let m = (n + 8).min(MAX_ORDER);
    let base = gauss_rule(m)?;
    let half: Vec<(f64, f64)> = base.mapped(0.0, 1.0).collect();
    let mut xs = Vec::with_capacity(m * m);
    let mut ws = Vec::with_capacity(m * m);
    for &(a, wa) in &half {
        for &(b, wb) in &half {
            xs.push(a * b);
            ws.push(wa * wb);
        }
    }

    // Stieltjes with normalized polynomials evaluated on the discrete nodes.
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut p_prev = vec![0.0; xs.len()];
    let mu0: f64 = ws.iter().sum();
    let mut p_cur = vec![1.0 / mu0.sqrt(); xs.len()];
    for k in 0..n {
        let a: f64 = xs
            .iter()
            .zip(&ws)
            .zip(&p_cur)
            .map(|((x, w), p)| w * x * p * p)
            .sum();
        alpha[k] = a;
        let b_k = if k == 0 { 0.0 } else { beta[k] };
        let mut next: Vec<f64> = (0..xs.len())
            .map(|i| (xs[i] - a) * p_cur[i] - b_k * p_prev[i])
            .collect();
        let norm = next
            .iter()
            .zip(&ws)
            .map(|(p, w)| w * p * p)
            .sum::<f64>()
            .sqrt();
        if k + 1 < n {
            beta[k + 1] = norm;
        }
        next.iter_mut().for_each(|p| *p /= norm);
        p_prev = std::mem::replace(&mut p_cur, next);
    }

    let mut jacobi = DMatrix::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = alpha[k];
        if k + 1 < n {
            jacobi[(k, k + 1)] = beta[k + 1];
            jacobi[(k + 1, k)] = beta[k + 1];
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(LogGaussRule {
        points: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}
