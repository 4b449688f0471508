//! Mesh refinement on a disk whose exact solution is the field of a point
//! force placed outside it. The traction error falls at second order or
//! better.
//!
//!     cargo run --release --example convergence

use binn::influence::assemble;
use binn::kernels::{kelvin_t, kelvin_u, Material};
use binn::mesh::{build_mesh, circle_loop};
use binn::postprocess::max_relative_error;
use binn::quadrature::QuadratureConfig;
use binn::solver::{bem_solve, BcKind, BoundaryConditions};
use binn::Vec2;

fn traction_error(n: usize) -> binn::Result<f64> {
    let mesh = build_mesh(&[circle_loop("c", Vec2::zeros(), 1.0, n, false)], -0.8, 0.8)?;
    let m = Material::plane_strain(1e3, 0.3)?;
    let (src, force) = (Vec2::new(2.0, 1.0), [1.0, -0.5]);
    let mut bcs = BoundaryConditions::traction_free(&mesh);
    let mut exact = Vec::new();
    for node in &mesh.nodes {
        let u = kelvin_u(src, node.position, &m)?;
        let t = kelvin_t(src, node.position, node.normal, &m)?;
        for d in 0..2 {
            bcs.set(node.index, d, BcKind::Dirichlet, force[0] * u[(0, d)] + force[1] * u[(1, d)]);
            exact.push(force[0] * t[(0, d)] + force[1] * t[(1, d)]);
        }
    }
    let state = bem_solve(&assemble(&mesh, &m, &QuadratureConfig::default())?, &bcs)?;
    max_relative_error(&state.t, &exact)
}

fn main() -> binn::Result<()> {
    let mut prev: Option<f64> = None;
    for n in [8, 16, 32, 64, 128] {
        let e = traction_error(n)?;
        match prev {
            Some(p) => println!("N = {n:3}  traction error {e:.3e}  rate {:.2}", (p / e).log2()),
            None => println!("N = {n:3}  traction error {e:.3e}"),
        }
        prev = Some(e);
    }
    Ok(())
}
