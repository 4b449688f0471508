//! Plate with three circular holes under tension, trained with one network
//! and compared with the BEM solution. Writes the usual output files.
//!
//!     cargo run --release --example holes_binn [iterations] [out-dir]

use binn::pipeline::{run, Mode, RunOptions};
use binn::problem::ProblemSpec;

fn main() -> binn::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut spec = ProblemSpec::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/specs/holes.spec"))?;
    if let Some(n) = args.next() {
        spec.train.iterations = n.parse().expect("iterations");
    }
    let out = args.next().unwrap_or_else(|| "out/holes-example".into());
    let r = run(
        &spec,
        &RunOptions {
            mode: Mode::Binn,
            out: Some(out.clone().into()),
            grid: Some((30, 30)),
            ..Default::default()
        },
    )?;
    let s = &r.summary;
    println!("{} iterations, final loss {:.3e}", spec.train.iterations, s.loss_final);
    println!("boundary u vs BEM      {:.2e}", s.errors.boundary_displacement_vs_bem.unwrap());
    println!("boundary t vs BEM      {:.2e}", s.errors.boundary_traction_vs_bem.unwrap());
    println!("interior stress vs BEM {:.2e}", s.errors.interior_stress_vs_bem.unwrap());
    println!("results in {out}");
    Ok(())
}
