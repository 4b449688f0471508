//! Dense collocation influence matrices.
//!
//! Row `2 m + i` is the boundary integral equation at collocation node `m`
//! in direction `i`; column `2 n + j` multiplies component `j` of the nodal
//! value at node `n`. With `Hhat = C + CPV ∮ T N J` and `G = ∮ U N J` the
//! discretized equation reads `Hhat u = G t`. The jump term `C = I / 2` is
//! folded into `Hhat` (every collocation node is a smooth boundary point).

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::kernels::Material;
use crate::mesh::BoundaryMesh;
use crate::quadrature::{ElementIntegrator, QuadratureConfig, SingularMethod};
use crate::{BinnError, Result};

#[derive(Clone, Debug)]
pub struct InfluenceMatrices {
    pub hhat: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl InfluenceMatrices {
    pub fn n_nodes(&self) -> usize {
        self.hhat.nrows() / 2
    }

    /// `Hhat` times the rigid translation with unit displacement in direction `dir`.
    pub fn translation_residual(&self, dir: usize) -> f64 {
        let n = self.hhat.ncols();
        let e = nalgebra::DVector::from_fn(n, |c, _| if c % 2 == dir { 1.0 } else { 0.0 });
        (&self.hhat * e).amax()
    }
}

/// Assemble `Hhat` and `G` for `mesh`. Rows are computed in parallel; each
/// entry is written exactly once.
pub fn assemble(mesh: &BoundaryMesh, material: &Material, config: &QuadratureConfig) -> Result<InfluenceMatrices> {
    if config.singular == SingularMethod::Closure && !mesh.is_closed() {
        return Err(BinnError::Config(
            "rigid-body closure requires a closed boundary".into(),
        ));
    }
    let integrator = ElementIntegrator::new(material, mesh.layout, config)?;
    let n_dof = 2 * mesh.n_nodes();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = mesh
        .nodes
        .par_iter()
        .map(|node| {
            let mut h = vec![0.0; 2 * n_dof];
            let mut g = vec![0.0; 2 * n_dof];
            for (ei, e) in mesh.elements.iter().enumerate() {
                let b = if ei == node.element {
                    integrator.singular(e, node.local)
                } else {
                    integrator.regular(node.position, e)
                };
                for i in 0..2 {
                    for c in 0..6 {
                        h[i * n_dof + 6 * ei + c] = b.t[(i, c)];
                        g[i * n_dof + 6 * ei + c] = b.u[(i, c)];
                    }
                }
            }
            (h, g)
        })
        .collect();

    let mut hhat = DMatrix::zeros(n_dof, n_dof);
    let mut g = DMatrix::zeros(n_dof, n_dof);
    for (m, (hr, gr)) in rows.iter().enumerate() {
        for i in 0..2 {
            let r = 2 * m + i;
            for c in 0..n_dof {
                hhat[(r, c)] = hr[i * n_dof + c];
                g[(r, c)] = gr[i * n_dof + c];
            }
        }
    }
    if !hhat.iter().chain(g.iter()).all(|v| v.is_finite()) {
        return Err(BinnError::DegenerateGeometry(
            "non-finite entry in the influence matrices".into(),
        ));
    }

    match config.singular {
        SingularMethod::Cpv => {
            for r in 0..n_dof {
                hhat[(r, r)] += 0.5;
            }
        }
        SingularMethod::Closure => rigid_body_diagonal(&mut hhat, mesh)?,
    }
    Ok(InfluenceMatrices { hhat, g })
}

/// Overwrite every self-node 2 x 2 block of `hhat` with minus the sum of the
/// other node blocks in its rows, so that both rigid translations are
/// annihilated exactly.
pub fn rigid_body_diagonal(hhat: &mut DMatrix<f64>, mesh: &BoundaryMesh) -> Result<()> {
    if !mesh.is_closed() {
        return Err(BinnError::Config(
            "rigid-body closure requires a closed boundary".into(),
        ));
    }
    let n_dof = hhat.nrows();
    if hhat.ncols() != n_dof || n_dof != 2 * mesh.n_nodes() {
        return Err(BinnError::Config("matrix does not match the mesh".into()));
    }
    for m in 0..mesh.n_nodes() {
        for i in 0..2 {
            let r = 2 * m + i;
            for j in 0..2 {
                let s: f64 = (0..mesh.n_nodes())
                    .filter(|&n| n != m)
                    .map(|n| hhat[(r, 2 * n + j)])
                    .sum();
                hhat[(r, 2 * m + j)] = -s;
            }
        }
    }
    Ok(())
}

const MATRIX_MAGIC: &[u8; 8] = b"BINNMAT1";

/// Write a matrix as `BINNMAT1`, rows (u64 LE), cols (u64 LE), then the
/// entries row-major as f64 LE.
pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + 8 * m.len());
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            buf.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 24 || &buf[..8] != MATRIX_MAGIC {
        return Err(BinnError::Format("not a BINNMAT1 matrix file".into()));
    }
    let word = |k: usize| u64::from_le_bytes(buf[k..k + 8].try_into().unwrap()) as usize;
    let (rows, cols) = (word(8), word(16));
    if buf.len() != 24 + 8 * rows * cols {
        return Err(BinnError::Format(format!(
            "matrix file length {} does not match {rows} x {cols}",
            buf.len()
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |r, c| {
        let k = 24 + 8 * (r * cols + c);
        f64::from_le_bytes(buf[k..k + 8].try_into().unwrap())
    }))
}
