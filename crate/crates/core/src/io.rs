//! Result files: boundary state, loss history and field grid as CSV, run
//! summary as JSON. Every writer has a matching reader.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mesh::BoundaryMesh;
use crate::postprocess::{FieldGrid, GridPoint};
use crate::solver::{BcKind, BoundaryState, HistoryEntry};
use crate::{BinnError, Result};

pub const BOUNDARY_FILE: &str = "boundary_state.csv";
pub const HISTORY_FILE: &str = "loss_history.csv";
pub const GRID_FILE: &str = "field_grid.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub node: usize,
    pub x: f64,
    pub y: f64,
    pub nx: f64,
    pub ny: f64,
    pub u1: f64,
    pub u2: f64,
    pub t1: f64,
    pub t2: f64,
    /// `D`/`N` per direction: which of u or t was prescribed.
    pub provenance: String,
}

pub fn boundary_rows(mesh: &BoundaryMesh, state: &BoundaryState) -> Vec<BoundaryRow> {
    mesh.nodes
        .iter()
        .map(|n| {
            let (u, t) = (state.displacement(n.index), state.traction(n.index));
            BoundaryRow {
                node: n.index,
                x: n.position.x,
                y: n.position.y,
                nx: n.normal.x,
                ny: n.normal.y,
                u1: u.x,
                u2: u.y,
                t1: t.x,
                t2: t.y,
                provenance: state.provenance(n.index),
            }
        })
        .collect()
}

/// Rebuild a state from rows in node order.
pub fn state_from_rows(rows: &[BoundaryRow]) -> Result<BoundaryState> {
    let mut state = BoundaryState {
        u: Vec::with_capacity(2 * rows.len()),
        t: Vec::with_capacity(2 * rows.len()),
        kinds: Vec::with_capacity(2 * rows.len()),
    };
    for (i, r) in rows.iter().enumerate() {
        if r.node != i {
            return Err(BinnError::Format(format!("boundary row {i} has node id {}", r.node)));
        }
        state.u.extend([r.u1, r.u2]);
        state.t.extend([r.t1, r.t2]);
        let kinds: Vec<BcKind> = r
            .provenance
            .chars()
            .map(|c| match c {
                'D' => Ok(BcKind::Dirichlet),
                'N' => Ok(BcKind::Neumann),
                _ => Err(BinnError::Format(format!("node {i}: bad provenance '{}'", r.provenance))),
            })
            .collect::<Result<_>>()?;
        if kinds.len() != 2 {
            return Err(BinnError::Format(format!("node {i}: bad provenance '{}'", r.provenance)));
        }
        state.kinds.extend(kinds);
    }
    Ok(state)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

pub fn write_boundary_state(path: impl AsRef<Path>, mesh: &BoundaryMesh, state: &BoundaryState) -> Result<()> {
    write_rows(path.as_ref(), &boundary_rows(mesh, state))
}

pub fn read_boundary_state(path: impl AsRef<Path>) -> Result<Vec<BoundaryRow>> {
    read_rows(path.as_ref())
}

pub fn write_history(path: impl AsRef<Path>, history: &[HistoryEntry]) -> Result<()> {
    write_rows(path.as_ref(), history)
}

pub fn read_history(path: impl AsRef<Path>) -> Result<Vec<HistoryEntry>> {
    read_rows(path.as_ref())
}

/// Masked points are written with empty field columns.
pub fn write_grid(path: impl AsRef<Path>, grid: &FieldGrid) -> Result<()> {
    write_rows(path.as_ref(), &grid.points)
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<Vec<GridPoint>> {
    read_rows(path.as_ref())
}

/// Maximum relative errors; absent entries had no reference to compare with.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// Boundary displacement vs the closed-form benchmark.
    pub boundary_displacement_vs_exact: Option<f64>,
    /// Boundary displacement vs a BEM solve on the same mesh.
    pub boundary_displacement_vs_bem: Option<f64>,
    /// Boundary traction vs a BEM solve on the same mesh.
    pub boundary_traction_vs_bem: Option<f64>,
    /// Interior grid displacement vs the closed-form benchmark.
    pub interior_displacement_vs_exact: Option<f64>,
    /// Interior grid stress vs the closed-form benchmark.
    pub interior_stress_vs_exact: Option<f64>,
    /// Interior grid stress vs the BEM interior field.
    pub interior_stress_vs_bem: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub iterations: usize,
    pub learning_rate: f64,
    pub n_networks: usize,
    pub n_params: usize,
    pub initial_loss: f64,
}

/// Machine-readable run summary. Wall times sit in their own trailing
/// object so two runs can be compared with it removed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub mode: String,
    pub seed: u64,
    /// Number of boundary elements.
    pub n_elements: usize,
    /// Number of collocation nodes.
    pub n_total: usize,
    pub condition_estimate: Option<f64>,
    /// `|A x - b|^2 / n_total` of the reported boundary state.
    pub loss_final: f64,
    pub training: Option<TrainingSummary>,
    pub errors: ErrorSummary,
    pub grid_points: usize,
    pub grid_inside: usize,
    /// Seconds per stage.
    pub wall_times: BTreeMap<String, f64>,
}

pub fn write_summary(path: impl AsRef<Path>, summary: &Summary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Summary> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
