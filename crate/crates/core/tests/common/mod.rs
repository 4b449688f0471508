//! Independent reference computations for the integration tests.
//!
//! Nothing here goes through the library's quadrature: integrals use an
//! adaptive 15-point Gauss-Kronrod rule with its own node table, and singular
//! integrals are paired symmetrically about the source point so the `1/r`
//! parts cancel before integration.

#![allow(dead_code)]

use binn::kernels::KernelConstants;
use binn::mesh::{BoundaryElement, Layout};
use binn::quadrature::Block26;
use binn::Vec2;
use rand::Rng;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// 7-point Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> Block26, a: f64, b: f64) -> (Block26, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = Block26::zeros();
    let mut g = Block26::zeros();
    for i in 0..8 {
        let pts: &[f64] = if i == 7 { &[0.0] } else { &[-1.0, 1.0] };
        for s in pts {
            let v = f(c + s * h * XGK[i]);
            k += v * WGK[i];
            if i % 2 == 1 {
                g += v * WG[i / 2];
            }
        }
    }
    (k * h, ((k - g) * h).amax())
}

/// Adaptive Gauss-Kronrod integral of a 2 x 6 block valued function.
pub fn integrate(f: &dyn Fn(f64) -> Block26, a: f64, b: f64, abs_tol: f64) -> Block26 {
    fn rec(f: &dyn Fn(f64) -> Block26, a: f64, b: f64, tol: f64, depth: usize) -> Block26 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth >= 30 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, abs_tol, 0)
}

/// `K(x(xi) - P) N_k(xi) J(xi)` for one kernel, collected into a 2 x 6 block.
fn integrand(kc: &KernelConstants, layout: Layout, e: &BoundaryElement, p: Vec2, xi: f64, t_kernel: bool) -> Block26 {
    let g = e.eval(xi);
    kernel_block(kc, layout, g.position - p, g.normal, g.jacobian, xi, t_kernel)
}

/// Same as [`integrand`] at `xi = xs + ds` for the source at `x(xs)` on the
/// element, with `x(xi) - x(xs)` formed as `ds * (...)` so that it keeps full
/// relative precision as `ds -> 0`.
fn self_integrand(kc: &KernelConstants, layout: Layout, e: &BoundaryElement, xs: f64, ds: f64, t_kernel: bool) -> Block26 {
    let [x1, x2, x3] = e.geom;
    let xi = xs + ds;
    let d = ((x3 - x1) * 0.5 + (x1 - x2 * 2.0 + x3) * (xs + 0.5 * ds)) * ds;
    let g = e.eval(xi);
    kernel_block(kc, layout, d, g.normal, g.jacobian, xi, t_kernel)
}

fn kernel_block(kc: &KernelConstants, layout: Layout, d: Vec2, normal: Vec2, jacobian: f64, xi: f64, t_kernel: bool) -> Block26 {
    let k = if t_kernel { kc.t(d, normal) } else { kc.u(d) };
    let n = layout.shape(xi);
    let mut out = Block26::zeros();
    for a in 0..3 {
        for i in 0..2 {
            for j in 0..2 {
                out[(i, 2 * a + j)] = k[(i, j)] * n[a] * jacobian;
            }
        }
    }
    out
}

/// Typical integrand size, sampled away from `skip`.
fn magnitude(kc: &KernelConstants, layout: Layout, e: &BoundaryElement, p: Vec2, t_kernel: bool, skip: f64) -> f64 {
    (0..=8)
        .map(|k| -1.0 + 0.25 * k as f64)
        .filter(|xi| !((xi - skip).abs() <= 0.1))
        .map(|xi| integrand(kc, layout, e, p, xi, t_kernel).amax())
        .fold(1e-300, f64::max)
}

/// Brute-force self-element integral for collocation node `local`. For the
/// traction kernel this is the principal value with a symmetric exclusion in
/// the local coordinate, which has the same limit as exclusion by distance.
pub fn self_element_integral(kc: &KernelConstants, layout: Layout, e: &BoundaryElement, local: usize, t_kernel: bool) -> Block26 {
    let xs = layout.local_coords()[local];
    let p = e.position(xs);
    let near = (1.0 - xs).min(1.0 + xs);
    // Paired part: s = tau^2 also tames the log singularity of U.
    let paired = |tau: f64| {
        let s = tau * tau;
        if s == 0.0 {
            return Block26::zeros();
        }
        (self_integrand(kc, layout, e, xs, s, t_kernel) + self_integrand(kc, layout, e, xs, -s, t_kernel)) * (2.0 * tau)
    };
    let tol = 1e-13 * magnitude(kc, layout, e, p, t_kernel, xs);
    let mut total = integrate(&paired, 0.0, near.sqrt(), tol);
    // Remaining one-sided, regular tail.
    let (a, b) = if xs > 0.0 { (-1.0, xs - near) } else { (xs + near, 1.0) };
    if b > a {
        total += integrate(&|xi| self_integrand(kc, layout, e, xs, xi - xs, t_kernel), a, b, tol);
    }
    total
}

/// Integral over an element for a source point not on it.
pub fn regular_integral(kc: &KernelConstants, layout: Layout, e: &BoundaryElement, p: Vec2, t_kernel: bool) -> Block26 {
    let tol = 1e-13 * magnitude(kc, layout, e, p, t_kernel, f64::NAN);
    integrate(&|xi| integrand(kc, layout, e, p, xi, t_kernel), -1.0, 1.0, tol)
}

/// A random, possibly curved, quadratic element: chord 0.05..2, midpoint
/// pushed off the chord by up to a quarter chord, random placement.
pub fn random_element(rng: &mut impl Rng) -> BoundaryElement {
    let len: f64 = rng.random_range(0.05..2.0);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let bow: f64 = rng.random_range(-0.25..0.25) * len;
    let slide: f64 = rng.random_range(-0.1..0.1) * len;
    let origin = Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let (c, s) = (angle.cos(), angle.sin());
    let rot = |x: f64, y: f64| origin + Vec2::new(c * x - s * y, s * x + c * y);
    BoundaryElement::new([rot(-0.5 * len, 0.0), rot(slide, bow), rot(0.5 * len, 0.0)], 0, 0)
}

/// Largest entry difference relative to the largest reference entry.
pub fn rel_diff(a: &Block26, reference: &Block26) -> f64 {
    (a - reference).amax() / reference.amax()
}
