//! The quadrature building blocks: Gauss-Legendre, the log-weighted rule,
//! and the singular self-element integrals checked against rigid-body
//! translation.
//!
//!     cargo run --release --example quadrature

use binn::influence::assemble;
use binn::kernels::Material;
use binn::mesh::{build_mesh, circle_loop};
use binn::quadrature::{gauss_rule, log_gauss_rule, QuadratureConfig, SingularMethod};
use binn::Vec2;

fn main() -> binn::Result<()> {
    let g = gauss_rule(16)?;
    let exact = 2.0 * 1.0f64.sin();
    println!("16-point Gauss, int cos on [-1, 1]: error {:.1e}", (g.integrate(-1.0, 1.0, f64::cos) - exact).abs());

    // int_0^1 -ln(s) s^k ds = 1 / (k + 1)^2
    let lg = log_gauss_rule(8)?;
    for k in [0, 5, 15] {
        let got = lg.integrate(|s| s.powi(k));
        println!("8-point log rule, moment {k:2}: error {:.1e}", (got - 1.0 / ((k + 1) * (k + 1)) as f64).abs());
    }

    let mesh = build_mesh(&[circle_loop("c", Vec2::zeros(), 1.0, 20, false)], -0.8, 0.8)?;
    let m = Material::plane_strain(1e3, 0.25)?;
    for singular in [SingularMethod::Closure, SingularMethod::Cpv] {
        let cfg = QuadratureConfig {
            singular,
            ..Default::default()
        };
        let mats = assemble(&mesh, &m, &cfg)?;
        println!(
            "{singular:?}: translation residual {:.1e} / {:.1e}",
            mats.translation_residual(0),
            mats.translation_residual(1)
        );
    }
    Ok(())
}
