//! Displacement and stress inside the cantilever from the representation
//! formula, after a BEM solve, next to the closed form.
//!
//!     cargo run --release --example interior_fields

use binn::influence::assemble;
use binn::postprocess::{benchmark_exact, InteriorField};
use binn::problem::ProblemSpec;
use binn::solver::bem_solve;
use binn::Vec2;

fn main() -> binn::Result<()> {
    let setup = ProblemSpec::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/specs/beam.spec"))?.build()?;
    let matrices = assemble(&setup.mesh, &setup.material, &setup.quadrature)?;
    let state = bem_solve(&matrices, &setup.bcs)?;
    let field = InteriorField::new(&setup.mesh, &state, &setup.material, &setup.quadrature)?;
    let bench = setup.benchmark.unwrap();

    println!("{:>6} {:>7} {:>13} {:>10} {:>10} {:>10}", "x", "y", "u2", "du2", "s11", "ds11");
    for (x, y) in [(0.1, 0.0), (0.25, 0.02), (0.5, -0.03), (0.75, 0.04), (0.9, -0.01)] {
        let p = Vec2::new(x, y);
        let u = field.displacement(p)?;
        let s = field.stress(p, None)?;
        let ex = benchmark_exact(bench, p, &setup.material);
        println!("{x:6.2} {y:7.3} {:13.6e} {:10.1e} {:10.4} {:10.1e}", u.y, u.y - ex.u.y, s.s11, s.s11 - ex.s11);
    }
    Ok(())
}
