//! Element integrals of kernel x shape function x Jacobian.
//!
//! Three cases:
//!
//! - collocation point off the element: Gauss–Legendre with recursive
//!   subdivision while the point is closer than one sub-element length;
//! - `U` on the point's own element: split at the singular coordinate and
//!   peel `ln|xi - xi_s|` off into a log-weighted Gauss rule;
//! - `T` on the point's own element: Cauchy principal value by subtracting
//!   the `1 / (xi - xi_s)` leading term and adding its closed-form CPV.

mod gauss;

pub use gauss::{gauss_rule, log_gauss_rule, GaussRule, LogGaussRule, MAX_ORDER};

use serde::{Deserialize, Serialize};

use crate::kernels::{Block2, KernelConstants, Material};
use crate::mesh::{BoundaryElement, Layout};
use crate::{Result, Vec2};

/// 2 x 6 block: columns ordered (node 1: dir 1, dir 2 | node 2 | node 3).
pub type Block26 = nalgebra::SMatrix<f64, 2, 6>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    U,
    T,
}

/// How the strongly singular self-node `T` blocks are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SingularMethod {
    /// Rigid-body closure: self-node block = minus the sum of the other blocks of the row.
    #[default]
    Closure,
    /// Explicit principal value by singularity subtraction.
    Cpv,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub order: usize,
    pub singular: SingularMethod,
    /// Cap on recursive halving for nearly singular integrals.
    pub max_depth: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            order: 16,
            singular: SingularMethod::Closure,
            max_depth: 8,
        }
    }
}

/// Reusable rules plus the material constants for one assembly.
#[derive(Clone, Debug)]
pub struct ElementIntegrator {
    pub rule: GaussRule,
    pub log_rule: LogGaussRule,
    pub kernel: KernelConstants,
    pub layout: Layout,
    pub max_depth: usize,
}

/// Integrals of both kernels over one element.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElementBlocks {
    pub u: Block26,
    pub t: Block26,
}

impl ElementIntegrator {
    pub fn new(material: &Material, layout: Layout, config: &QuadratureConfig) -> Result<Self> {
        Ok(Self {
            rule: gauss_rule(config.order)?,
            log_rule: log_gauss_rule(config.order)?,
            kernel: material.kernel_constants(),
            layout,
            max_depth: config.max_depth,
        })
    }

    /// Both kernels for a point not on the element.
    pub fn regular(&self, p: Vec2, e: &BoundaryElement) -> ElementBlocks {
        let mut out = ElementBlocks::default();
        self.regular_on(p, e, -1.0, 1.0, 0, &mut out);
        out
    }

    /// One kernel for a point not on the element.
    pub fn integrate_regular(&self, p: Vec2, e: &BoundaryElement, kind: KernelKind) -> Block26 {
        let b = self.regular(p, e);
        match kind {
            KernelKind::U => b.u,
            KernelKind::T => b.t,
        }
    }

    fn regular_on(&self, p: Vec2, e: &BoundaryElement, a: f64, b: f64, depth: usize, out: &mut ElementBlocks) {
        if depth < self.max_depth {
            let m = 0.5 * (a + b);
            let (xa, xm, xb) = (e.position(a), e.position(m), e.position(b));
            let len = (xm - xa).norm() + (xb - xm).norm();
            let dist = [a, 0.5 * (a + m), m, 0.5 * (m + b), b]
                .iter()
                .map(|&xi| (e.position(xi) - p).norm())
                .fold(f64::INFINITY, f64::min);
            if dist < len {
                self.regular_on(p, e, a, m, depth + 1, out);
                self.regular_on(p, e, m, b, depth + 1, out);
                return;
            }
        }
        for (xi, w) in self.rule.mapped(a, b) {
            let g = e.eval(xi);
            let d = g.position - p;
            let ku = self.kernel.u(d);
            let kt = self.kernel.t(d, g.normal);
            let shape = self.layout.shape(xi);
            accumulate(&mut out.u, &ku, &shape, w * g.jacobian);
            accumulate(&mut out.t, &kt, &shape, w * g.jacobian);
        }
    }

    /// `U` over the element that owns collocation node `local` (log singular).
    pub fn integrate_weak_singular(&self, e: &BoundaryElement, local: usize) -> Block26 {
        let xs = self.layout.local_coords()[local];
        let p = e.position(xs);
        let h = 0.5 * e.length;
        let c = self.kernel.u_scale;
        let log_coef = c * (4.0 * self.kernel.nu - 3.0);
        let mut out = Block26::zeros();
        for (sign, len) in [(1.0, 1.0 - xs), (-1.0, 1.0 + xs)] {
            // xi = xs + sign * len * s, s in [0, 1]
            let ln_hl = (h * len).ln();
            for (s, w) in self.rule.mapped(0.0, 1.0) {
                let xi = xs + sign * len * s;
                let g = e.eval(xi);
                let d = g.position - p;
                let r = d.norm();
                let (r1, r2) = (d.x / r, d.y / r);
                let smooth_ln = (r / (h * len * s)).ln() + ln_hl;
                let k = Block2::new(
                    c * r1 * r1 + log_coef * smooth_ln,
                    c * r1 * r2,
                    c * r1 * r2,
                    c * r2 * r2 + log_coef * smooth_ln,
                );
                accumulate(&mut out, &k, &self.layout.shape(xi), w * g.jacobian * len);
            }
            // log_coef * ∫ ln(s) N J len ds = -log_coef * len * ∫ -ln(s) N J ds
            for (s, w) in self.log_rule.points.iter().zip(&self.log_rule.weights) {
                let xi = xs + sign * len * s;
                let g = e.eval(xi);
                let n = self.layout.shape(xi);
                let f = -log_coef * len * w * g.jacobian;
                for k in 0..3 {
                    out[(0, 2 * k)] += f * n[k];
                    out[(1, 2 * k + 1)] += f * n[k];
                }
            }
        }
        out
    }

    /// Principal value of `T` over the element that owns collocation node `local`.
    pub fn integrate_strong_singular(&self, e: &BoundaryElement, local: usize) -> Block26 {
        let xs = self.layout.local_coords()[local];
        let gs = e.eval(xs);
        let p = gs.position;
        // Leading term F_{-1} / (xi - xs), with F_{-1} = (1 - 2 nu) / (4 pi (1 - nu)) (t_i n_j - t_j n_i).
        let (t, n) = (gs.tangent, gs.normal);
        let w12 = t.x * n.y - t.y * n.x;
        let coef = -self.kernel.t_scale * (1.0 - 2.0 * self.kernel.nu);
        let lead = Block2::new(0.0, coef * w12, -coef * w12, 0.0);

        let mut out = Block26::zeros();
        for (sign, len) in [(1.0, 1.0 - xs), (-1.0, 1.0 + xs)] {
            for (s, w) in self.rule.mapped(0.0, 1.0) {
                let xi = xs + sign * len * s;
                let g = e.eval(xi);
                let kt = self.kernel.t(g.position - p, g.normal) * g.jacobian;
                let shape = self.layout.shape(xi);
                for k in 0..3 {
                    let mut f = kt * shape[k];
                    if k == local {
                        f -= lead / (xi - xs);
                    }
                    let wk = w * len;
                    for i in 0..2 {
                        for j in 0..2 {
                            out[(i, 2 * k + j)] += wk * f[(i, j)];
                        }
                    }
                }
            }
        }
        let cpv = lead * ((1.0 - xs) / (1.0 + xs)).ln();
        for i in 0..2 {
            for j in 0..2 {
                out[(i, 2 * local + j)] += cpv[(i, j)];
            }
        }
        out
    }

    /// Both self-element blocks for collocation node `local` of `e`.
    pub fn singular(&self, e: &BoundaryElement, local: usize) -> ElementBlocks {
        ElementBlocks {
            u: self.integrate_weak_singular(e, local),
            t: self.integrate_strong_singular(e, local),
        }
    }
}

#[inline]
fn accumulate(out: &mut Block26, k: &Block2, shape: &[f64; 3], w: f64) {
    for (n, &s) in shape.iter().enumerate() {
        let f = w * s;
        out[(0, 2 * n)] += f * k[(0, 0)];
        out[(0, 2 * n + 1)] += f * k[(0, 1)];
        out[(1, 2 * n)] += f * k[(1, 0)];
        out[(1, 2 * n + 1)] += f * k[(1, 1)];
    }
}
