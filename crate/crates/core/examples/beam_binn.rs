//! Train a boundary integrated neural network on the cantilever, printing
//! the loss as it goes.
//!
//!     cargo run --release --example beam_binn [iterations]

use binn::influence::assemble;
use binn::postprocess::{benchmark_state, max_relative_error};
use binn::problem::ProblemSpec;
use binn::solver::{bem_solve, train, BinnProblem, TrainConfig};

fn main() -> binn::Result<()> {
    let iterations = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("iterations"));
    let setup = ProblemSpec::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/specs/beam.spec"))?.build()?;
    let matrices = assemble(&setup.mesh, &setup.material, &setup.quadrature)?;
    let problem = BinnProblem::new(&matrices, &setup.bcs, &setup.mesh.nodes, &setup.material)?;
    let model = setup.init_model(setup.train.seed)?;
    println!("{} parameters, output scale {:.3e}", model.n_params(), setup.output_scale());

    let config = TrainConfig {
        iterations,
        log_every: (iterations / 10).max(1),
        ..setup.train.clone()
    };
    let outcome = train(&problem, model, &config)?;
    for h in &outcome.history {
        println!("iter {:6}  loss {:.3e}", h.iteration, h.loss);
    }

    let kinds = (0..setup.bcs.n_dof()).map(|k| setup.bcs.kind(k / 2, k % 2)).collect();
    let exact = benchmark_state(setup.benchmark.unwrap(), &setup.mesh, &setup.material, kinds);
    let bem = bem_solve(&matrices, &setup.bcs)?;
    println!("boundary u vs exact {:.2e}", max_relative_error(&outcome.state.u, &exact.u)?);
    println!("boundary u vs BEM   {:.2e}", max_relative_error(&outcome.state.u, &bem.u)?);
    Ok(())
}
