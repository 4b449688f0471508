//! One complete run: spec -> mesh -> assembly -> (BEM | BINN) -> interior
//! fields -> result files.

use std::path::PathBuf;
use std::time::Instant;

use crate::influence::{assemble, InfluenceMatrices};
use crate::io::{self, ErrorSummary, Summary, TrainingSummary};
use crate::postprocess::{benchmark_exact, max_relative_error, Benchmark, FieldGrid, GridPoint, InteriorField};
use crate::problem::{ProblemSpec, Setup};
use crate::solver::{bem_solve_with_condition, state_loss, train, BinnModel, BinnProblem, BoundaryState, HistoryEntry};
use crate::{BinnError, Result, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Bem,
    Binn,
}

impl std::str::FromStr for Mode {
    type Err = BinnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bem" => Ok(Mode::Bem),
            "binn" => Ok(Mode::Binn),
            other => Err(BinnError::Config(format!("unknown mode '{other}' (expected bem or binn)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Bem => "bem",
            Mode::Binn => "binn",
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub mode: Mode,
    /// Directory for result files; nothing is written when `None`.
    pub out: Option<PathBuf>,
    /// Overrides the spec's training seed.
    pub seed: Option<u64>,
    /// Overrides the spec's grid size.
    pub grid: Option<(usize, usize)>,
    /// Sample interior fields on the grid.
    pub sample_grid: bool,
    /// In BINN mode, also solve by BEM on the same mesh and compare.
    pub compare_bem: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Bem,
            out: None,
            seed: None,
            grid: None,
            sample_grid: true,
            compare_bem: true,
        }
    }
}

pub struct RunResult {
    pub summary: Summary,
    pub setup: Setup,
    pub matrices: InfluenceMatrices,
    pub state: BoundaryState,
    /// BEM solution when one was computed (BEM mode, or BINN mode with comparison).
    pub bem_state: Option<BoundaryState>,
    pub history: Vec<HistoryEntry>,
    pub model: Option<BinnModel>,
    pub grid: Option<FieldGrid>,
}

struct Clock {
    times: std::collections::BTreeMap<String, f64>,
}

impl Clock {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let v = f();
        self.times.insert(stage.to_string(), t0.elapsed().as_secs_f64());
        v
    }
}

pub fn run(spec: &ProblemSpec, opts: &RunOptions) -> Result<RunResult> {
    let mut clock = Clock { times: Default::default() };
    let mut setup = clock.time("build", || spec.build())?;
    if let Some(seed) = opts.seed {
        setup.train.seed = seed;
    }
    if let Some((nx, ny)) = opts.grid {
        setup.grid.nx = nx;
        setup.grid.ny = ny;
    }
    setup.bcs.check_pinned()?;
    let matrices = clock.time("assemble", || assemble(&setup.mesh, &setup.material, &setup.quadrature))?;

    let want_bem = opts.mode == Mode::Bem || opts.compare_bem;
    let bem = if want_bem {
        Some(clock.time("bem_solve", || bem_solve_with_condition(&matrices, &setup.bcs))?)
    } else {
        None
    };
    let condition_estimate = bem.as_ref().map(|b| b.1);
    let bem_state = bem.map(|b| b.0);

    let mut summary = Summary {
        name: setup.name.clone(),
        mode: opts.mode.to_string(),
        seed: setup.train.seed,
        n_elements: setup.mesh.elements.len(),
        n_total: setup.mesh.n_nodes(),
        condition_estimate,
        ..Default::default()
    };

    let (state, history, model) = match opts.mode {
        Mode::Bem => {
            let state = bem_state.clone().expect("bem mode solves");
            summary.loss_final = state_loss(&matrices, &state).0;
            (state, Vec::new(), None)
        }
        Mode::Binn => {
            let problem = BinnProblem::new(&matrices, &setup.bcs, &setup.mesh.nodes, &setup.material)?;
            let model = setup.init_model(setup.train.seed)?;
            summary.training = Some(TrainingSummary {
                iterations: setup.train.iterations,
                learning_rate: setup.train.learning_rate,
                n_networks: model.nets.len(),
                n_params: model.n_params(),
                initial_loss: crate::solver::binn_loss(&problem, &model).0,
            });
            let outcome = clock.time("train", || train(&problem, model, &setup.train))?;
            summary.loss_final = outcome.final_loss;
            (outcome.state, outcome.history, Some(outcome.model))
        }
    };

    let mut errors = ErrorSummary::default();
    if let Some(b) = setup.benchmark {
        let exact: Vec<f64> = setup
            .mesh
            .nodes
            .iter()
            .flat_map(|n| {
                let u = benchmark_exact(b, n.position, &setup.material).u;
                [u.x, u.y]
            })
            .collect();
        errors.boundary_displacement_vs_exact = Some(max_relative_error(&state.u, &exact)?);
    }
    if opts.mode == Mode::Binn {
        if let Some(bem) = &bem_state {
            errors.boundary_displacement_vs_bem = Some(max_relative_error(&state.u, &bem.u)?);
            errors.boundary_traction_vs_bem = max_relative_error(&state.t, &bem.t).ok();
        }
    }

    let grid = if opts.sample_grid {
        let g = clock.time("grid", || sample_fields(&setup, &state, bem_state.as_ref().filter(|_| opts.mode == Mode::Binn), &mut errors))?;
        summary.grid_points = g.points.len();
        summary.grid_inside = g.n_inside();
        Some(g)
    } else {
        None
    };
    summary.errors = errors;

    if let Some(out) = &opts.out {
        clock.time("write", || write_outputs(out, &setup, &state, &history, model.as_ref(), grid.as_ref()))?;
    }
    summary.wall_times = clock.times;
    if let Some(out) = &opts.out {
        io::write_summary(out.join(io::SUMMARY_FILE), &summary)?;
    }

    Ok(RunResult {
        summary,
        setup,
        matrices,
        state,
        bem_state,
        history,
        model,
        grid,
    })
}

fn sample_fields(setup: &Setup, state: &BoundaryState, bem: Option<&BoundaryState>, errors: &mut ErrorSummary) -> Result<FieldGrid> {
    let (nx, ny) = (setup.grid.nx, setup.grid.ny);
    let field = InteriorField::new(&setup.mesh, state, &setup.material, &setup.quadrature)?;
    let grid = match setup.benchmark {
        Some(b) => {
            let exact = |p: Vec2| benchmark_exact(b, p, &setup.material).u;
            let g = FieldGrid::sample(&field, nx, ny, Some(&exact))?;
            let err = g
                .points
                .iter()
                .flat_map(|p| [p.err_u1, p.err_u2])
                .flatten()
                .fold(None, |a: Option<f64>, e| Some(a.map_or(e, |a| a.max(e))));
            errors.interior_displacement_vs_exact = err;
            errors.interior_stress_vs_exact = stress_difference(&g.points, |p| exact_stress(b, p, setup));
            g
        }
        None => FieldGrid::sample(&field, nx, ny, None)?,
    };
    if let Some(bem) = bem {
        let reference = InteriorField::new(&setup.mesh, bem, &setup.material, &setup.quadrature)?;
        let rg = FieldGrid::sample(&reference, nx, ny, None)?;
        let lookup: Vec<Option<[f64; 3]>> = rg.points.iter().map(stress_of).collect();
        let mut k = 0;
        errors.interior_stress_vs_bem = stress_difference(&grid.points, |_| {
            k += 1;
            lookup[k - 1].unwrap_or_default()
        });
    }
    Ok(grid)
}

fn stress_of(p: &GridPoint) -> Option<[f64; 3]> {
    Some([p.s11?, p.s22?, p.s12?])
}

fn exact_stress(b: Benchmark, p: &GridPoint, setup: &Setup) -> [f64; 3] {
    let e = benchmark_exact(b, Vec2::new(p.x, p.y), &setup.material);
    [e.s11, e.s22, e.s12]
}

/// Largest stress component difference over unmasked points, relative to the
/// largest reference stress component. `reference` is called once per point
/// in order, masked points included.
fn stress_difference(points: &[GridPoint], mut reference: impl FnMut(&GridPoint) -> [f64; 3]) -> Option<f64> {
    let mut num = Vec::new();
    let mut refs = Vec::new();
    for p in points {
        let r = reference(p);
        if let Some(s) = stress_of(p) {
            num.extend(s);
            refs.extend(r);
        }
    }
    if num.is_empty() {
        return None;
    }
    max_relative_error(&num, &refs).ok()
}

fn write_outputs(
    out: &std::path::Path,
    setup: &Setup,
    state: &BoundaryState,
    history: &[HistoryEntry],
    model: Option<&BinnModel>,
    grid: Option<&FieldGrid>,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    io::write_boundary_state(out.join(io::BOUNDARY_FILE), &setup.mesh, state)?;
    if let Some(model) = model {
        io::write_history(out.join(io::HISTORY_FILE), history)?;
        if model.nets.len() == 1 {
            model.nets[0].save(out.join("network.json"))?;
        } else {
            for (net, id) in model.nets.iter().zip(&setup.mesh.segment_ids) {
                net.save(out.join(format!("network_{id}.json")))?;
            }
        }
    }
    if let Some(grid) = grid {
        io::write_grid(out.join(io::GRID_FILE), grid)?;
    }
    Ok(())
}
