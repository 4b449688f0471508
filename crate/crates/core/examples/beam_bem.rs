//! Pure bending of a slender cantilever with the direct BEM solver, compared
//! with the closed-form solution on the boundary and on an interior grid.
//!
//!     cargo run --release --example beam_bem [out-dir]

use binn::pipeline::{run, Mode, RunOptions};
use binn::problem::ProblemSpec;

fn main() -> binn::Result<()> {
    let spec = ProblemSpec::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/specs/beam.spec"))?;
    let out = std::env::args().nth(1).map(Into::into);
    let r = run(
        &spec,
        &RunOptions {
            mode: Mode::Bem,
            out,
            ..Default::default()
        },
    )?;
    let s = &r.summary;
    println!("{} nodes, condition estimate {:.2e}", s.n_total, s.condition_estimate.unwrap_or(f64::NAN));
    println!("boundary displacement vs exact {:.2e}", s.errors.boundary_displacement_vs_exact.unwrap());
    println!("interior displacement vs exact {:.2e}", s.errors.interior_displacement_vs_exact.unwrap());
    println!("interior stress vs exact       {:.2e}", s.errors.interior_stress_vs_exact.unwrap());
    println!("{} of {} grid points inside", s.grid_inside, s.grid_points);
    Ok(())
}
