//! Boundary conditions and the two solution paths over the same influence
//! matrices: the direct BEM solve and BINN training.

mod train;

pub use train::{
    binn_loss, loss_gradient, model_state, state_loss, train, Adam, BinnModel, BinnProblem, HistoryEntry, TrainConfig,
    TrainOutcome,
};

use nalgebra::{DMatrix, DVector, Matrix3, LU};
use serde::{Deserialize, Serialize};

use crate::influence::InfluenceMatrices;
use crate::mesh::BoundaryMesh;
use crate::problem::Affine;
use crate::{BinnError, Result, Vec2};

/// Condition estimates above this are reported as ill-posed.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BcKind {
    /// Displacement prescribed, traction unknown.
    Dirichlet,
    /// Traction prescribed, displacement unknown.
    Neumann,
}

/// What is prescribed in one direction on one segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prescribed {
    Displacement(Affine),
    Traction(Affine),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentBc {
    pub segment: String,
    pub directions: [Prescribed; 2],
}

/// Displacement `value` in `direction` at the node of `segment` nearest `point`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConstraint {
    pub segment: String,
    pub point: Vec2,
    pub direction: usize,
    pub value: f64,
}

/// One kind and value per node and direction. Degree of freedom `2 m + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConditions {
    pub kinds: Vec<BcKind>,
    pub values: Vec<f64>,
    positions: Vec<Vec2>,
}

impl BoundaryConditions {
    /// Traction-free everywhere.
    pub fn traction_free(mesh: &BoundaryMesh) -> Self {
        let n = mesh.n_nodes();
        Self {
            kinds: vec![BcKind::Neumann; 2 * n],
            values: vec![0.0; 2 * n],
            positions: mesh.nodes.iter().map(|p| p.position).collect(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn n_dof(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, node: usize, dir: usize) -> BcKind {
        self.kinds[2 * node + dir]
    }

    pub fn value(&self, node: usize, dir: usize) -> f64 {
        self.values[2 * node + dir]
    }

    pub fn set(&mut self, node: usize, dir: usize, kind: BcKind, value: f64) {
        self.kinds[2 * node + dir] = kind;
        self.values[2 * node + dir] = value;
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    /// Rank (0..=3) of the rigid-body modes fixed by the Dirichlet data.
    pub fn rigid_mode_rank(&self) -> usize {
        let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
        for p in &self.positions {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let center = (lo + hi) * 0.5;
        let size = (hi - lo).norm().max(f64::MIN_POSITIVE);
        let mut gram = Matrix3::<f64>::zeros();
        for (dof, kind) in self.kinds.iter().enumerate() {
            if *kind != BcKind::Dirichlet {
                continue;
            }
            let d = (self.positions[dof / 2] - center) / size;
            // Displacement in this direction of the modes (translate x, translate y, rotate).
            let row = if dof % 2 == 0 {
                nalgebra::Vector3::new(1.0, 0.0, -d.y)
            } else {
                nalgebra::Vector3::new(0.0, 1.0, d.x)
            };
            gram += row * row.transpose();
        }
        let ev = gram.symmetric_eigenvalues();
        let max = ev.amax();
        if max == 0.0 {
            return 0;
        }
        ev.iter().filter(|&&v| v > 1e-12 * max).count()
    }

    pub fn check_pinned(&self) -> Result<()> {
        let rank = self.rigid_mode_rank();
        if rank < 3 {
            return Err(BinnError::IllPosed {
                reason: format!(
                    "displacement constraints fix only {rank} of 3 rigid-body modes"
                ),
                condition: f64::INFINITY,
            });
        }
        Ok(())
    }
}

/// Bind per-segment prescriptions and point constraints to mesh nodes.
/// Value expressions are evaluated at node positions.
pub fn bind_bcs(mesh: &BoundaryMesh, segments: &[SegmentBc], points: &[PointConstraint]) -> Result<BoundaryConditions> {
    let mut bcs = BoundaryConditions::traction_free(mesh);
    let mut seen = vec![false; mesh.segment_ids.len()];
    for sbc in segments {
        let s = mesh
            .segment_index(&sbc.segment)
            .ok_or_else(|| BinnError::Specification(format!("boundary condition for unknown segment '{}'", sbc.segment)))?;
        if std::mem::replace(&mut seen[s], true) {
            return Err(BinnError::Specification(format!(
                "segment '{}' has more than one boundary condition entry",
                sbc.segment
            )));
        }
        for node in mesh.nodes_on_segment(s) {
            for (d, p) in sbc.directions.iter().enumerate() {
                let (kind, value) = match p {
                    Prescribed::Displacement(f) => (BcKind::Dirichlet, f.eval(node.position)),
                    Prescribed::Traction(f) => (BcKind::Neumann, f.eval(node.position)),
                };
                bcs.set(node.index, d, kind, value);
            }
        }
    }
    if let Some(s) = seen.iter().position(|x| !x) {
        return Err(BinnError::Specification(format!(
            "segment '{}' has no boundary condition",
            mesh.segment_ids[s]
        )));
    }
    for pc in points {
        let s = mesh
            .segment_index(&pc.segment)
            .ok_or_else(|| BinnError::Specification(format!("point constraint on unknown segment '{}'", pc.segment)))?;
        if pc.direction > 1 {
            return Err(BinnError::Specification(format!(
                "point constraint direction must be 1 or 2, got {}",
                pc.direction + 1
            )));
        }
        let node = mesh.nearest_node_on_segment(s, pc.point);
        bcs.set(node, pc.direction, BcKind::Dirichlet, pc.value);
    }
    Ok(bcs)
}

/// Full nodal displacement and traction vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryState {
    pub u: Vec<f64>,
    pub t: Vec<f64>,
    /// Boundary condition kind per degree of freedom: `Dirichlet` means `u`
    /// is prescribed and `t` was solved for.
    pub kinds: Vec<BcKind>,
}

impl BoundaryState {
    pub fn n_nodes(&self) -> usize {
        self.u.len() / 2
    }

    pub fn displacement(&self, node: usize) -> Vec2 {
        Vec2::new(self.u[2 * node], self.u[2 * node + 1])
    }

    pub fn traction(&self, node: usize) -> Vec2 {
        Vec2::new(self.t[2 * node], self.t[2 * node + 1])
    }

    /// Two letters per node, `D` for prescribed displacement and `N` for
    /// prescribed traction, direction 1 first.
    pub fn provenance(&self, node: usize) -> String {
        self.kinds[2 * node..2 * node + 2]
            .iter()
            .map(|k| match k {
                BcKind::Dirichlet => 'D',
                BcKind::Neumann => 'N',
            })
            .collect()
    }

    /// Assemble a state from unknowns `x` ordered by degree of freedom.
    pub fn from_unknowns(bcs: &BoundaryConditions, x: &[f64]) -> Self {
        let n = bcs.n_dof();
        let (mut u, mut t) = (vec![0.0; n], vec![0.0; n]);
        for c in 0..n {
            match bcs.kinds[c] {
                BcKind::Dirichlet => {
                    u[c] = bcs.values[c];
                    t[c] = x[c];
                }
                BcKind::Neumann => {
                    u[c] = x[c];
                    t[c] = bcs.values[c];
                }
            }
        }
        Self {
            u,
            t,
            kinds: bcs.kinds.clone(),
        }
    }
}

/// `Hhat u - G t = 0` rearranged as `A x = b` with the unknown of every
/// degree of freedom in `x`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearSystem {
    pub fn new(matrices: &InfluenceMatrices, bcs: &BoundaryConditions) -> Result<Self> {
        let n = matrices.hhat.nrows();
        if bcs.n_dof() != n {
            return Err(BinnError::Config(format!(
                "boundary conditions have {} degrees of freedom, matrices {n}",
                bcs.n_dof()
            )));
        }
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for c in 0..n {
            let (unknown, known, sign) = match bcs.kinds[c] {
                BcKind::Dirichlet => (matrices.g.column(c), matrices.hhat.column(c), -1.0),
                BcKind::Neumann => (matrices.hhat.column(c), matrices.g.column(c), 1.0),
            };
            a.set_column(c, &(unknown * sign));
            b.axpy(sign * bcs.values[c], &known, 1.0);
        }
        Ok(Self { a, b })
    }
}

/// Solve the collocation system directly by dense LU with partial pivoting.
pub fn bem_solve(matrices: &InfluenceMatrices, bcs: &BoundaryConditions) -> Result<BoundaryState> {
    Ok(bem_solve_with_condition(matrices, bcs)?.0)
}

/// [`bem_solve`] plus the 1-norm condition estimate of the equilibrated system.
pub fn bem_solve_with_condition(matrices: &InfluenceMatrices, bcs: &BoundaryConditions) -> Result<(BoundaryState, f64)> {
    bcs.check_pinned()?;
    let sys = LinearSystem::new(matrices, bcs)?;
    let (x, cond) = solve_dense_with_condition(sys.a, &sys.b)?;
    Ok((BoundaryState::from_unknowns(bcs, x.as_slice()), cond))
}

/// Column-equilibrated LU solve with a 1-norm condition estimate guard.
pub fn solve_dense(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(solve_dense_with_condition(a, b)?.0)
}

pub fn solve_dense_with_condition(mut a: DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = a.ncols();
    let mut scale = vec![1.0; n];
    for (c, mut col) in a.column_iter_mut().enumerate() {
        let m = col.amax();
        if m > 0.0 {
            scale[c] = 1.0 / m;
            col *= scale[c];
        }
    }
    let norm1 = a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
    let lu = LU::new(a);
    let ill = |condition: f64| BinnError::IllPosed {
        reason: "collocation system is singular".into(),
        condition,
    };
    let mut x = lu.solve(b).ok_or_else(|| ill(f64::INFINITY))?;
    let cond = norm1 * inverse_norm1_estimate(&lu);
    if !cond.is_finite() || cond > MAX_CONDITION || !x.iter().all(|v| v.is_finite()) {
        return Err(ill(cond));
    }
    for (v, s) in x.iter_mut().zip(&scale) {
        *v *= s;
    }
    Ok((x, cond))
}

/// Hager's estimate of `||A^-1||_1` from an LU factorization.
fn inverse_norm1_estimate(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let n = lu.u().nrows();
    let (l, u) = (lu.l(), lu.u());
    let solve_t = |c: &DVector<f64>| -> Option<DVector<f64>> {
        let w = u.tr_solve_upper_triangular(c)?;
        let mut v = l.tr_solve_lower_triangular(&w)?;
        lu.p().inv_permute_rows(&mut v);
        Some(v)
    };
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let Some(y) = lu.solve(&x) else {
            return f64::INFINITY;
        };
        est = y.lp_norm(1);
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let Some(z) = solve_t(&xi) else {
            return f64::INFINITY;
        };
        let j = z.iamax();
        if z[j].abs() <= z.dot(&x) {
            break;
        }
        x.fill(0.0);
        x[j] = 1.0;
    }
    est
}
