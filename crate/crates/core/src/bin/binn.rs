use std::path::PathBuf;
use std::process::ExitCode;

use binn::pipeline::{run, Mode, RunOptions};
use binn::problem::{validate_path, ProblemSpec};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "binn", version, about = "BEM and boundary integrated neural network solver for 2D elastostatics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write boundary state, fields and a summary.
    Run {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = CliMode::Bem)]
        mode: CliMode,
        /// Output directory (default: ./out/<spec name>-<mode>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Training seed, overriding the spec.
        #[arg(long)]
        seed: Option<u64>,
        /// Interior grid size as NxM, overriding the spec.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<(usize, usize)>,
        /// Only check the spec.
        #[arg(long)]
        validate: bool,
        /// In binn mode, skip the BEM solve used for comparison.
        #[arg(long)]
        no_compare: bool,
    },
    /// Check a spec (schema, geometry, well-posedness) without solving.
    Validate { spec: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Bem,
    Binn,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected NxM")?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t}: {e}"));
    Ok((n(a)?, n(b)?))
}

fn validate(spec: &PathBuf) -> ExitCode {
    let diags = validate_path(spec);
    if diags.is_empty() {
        println!("{}: ok", spec.display());
        ExitCode::SUCCESS
    } else {
        for d in &diags {
            eprintln!("{}: {d}", spec.display());
        }
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { spec } => validate(&spec),
        Command::Run { spec, validate: true, .. } => validate(&spec),
        Command::Run {
            spec,
            mode,
            out,
            seed,
            grid,
            no_compare,
            ..
        } => run_spec(spec, mode, out, seed, grid, no_compare),
    }
}

fn run_spec(path: PathBuf, mode: CliMode, out: Option<PathBuf>, seed: Option<u64>, grid: Option<(usize, usize)>, no_compare: bool) -> ExitCode {
    let spec = match ProblemSpec::from_path(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mode = match mode {
        CliMode::Bem => Mode::Bem,
        CliMode::Binn => Mode::Binn,
    };
    let out = out.unwrap_or_else(|| {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        PathBuf::from("out").join(format!("{stem}-{mode}"))
    });
    let opts = RunOptions {
        mode,
        out: Some(out.clone()),
        seed,
        grid,
        compare_bem: !no_compare,
        ..Default::default()
    };
    match run(&spec, &opts) {
        Ok(r) => {
            let s = &r.summary;
            println!("{} ({}): {} elements, {} nodes", s.name, s.mode, s.n_elements, s.n_total);
            println!("final loss {:.3e}", s.loss_final);
            let e = &s.errors;
            for (label, v) in [
                ("boundary u vs exact", e.boundary_displacement_vs_exact),
                ("boundary u vs bem", e.boundary_displacement_vs_bem),
                ("boundary t vs bem", e.boundary_traction_vs_bem),
                ("interior u vs exact", e.interior_displacement_vs_exact),
                ("interior stress vs exact", e.interior_stress_vs_exact),
                ("interior stress vs bem", e.interior_stress_vs_bem),
            ] {
                if let Some(v) = v {
                    println!("max relative error, {label}: {v:.3e}");
                }
            }
            println!("results in {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
