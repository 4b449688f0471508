//! Interior fields from boundary data, error metrics and closed-form
//! benchmark fields.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::{stress_from_gradient, Block2, Material, PlaneMode};
use crate::mesh::BoundaryMesh;
use crate::quadrature::{ElementIntegrator, QuadratureConfig};
use crate::solver::BoundaryState;
use crate::{BinnError, Result, Vec2};

/// Finite-difference step for interior stress, as a fraction of the domain diameter.
pub const FD_STEP_FRACTION: f64 = 1e-5;
/// Grid points closer than this fraction of the diameter to the boundary are masked.
pub const GRID_CLEARANCE_FRACTION: f64 = 0.02;

/// Evaluates the representation formula for one solved boundary state.
#[derive(Clone, Debug)]
pub struct InteriorField<'a> {
    pub mesh: &'a BoundaryMesh,
    pub state: &'a BoundaryState,
    pub material: Material,
    integrator: ElementIntegrator,
}

/// Stress at an interior point.
#[derive(Clone, Debug, PartialEq)]
pub struct StressSample {
    pub s11: f64,
    pub s22: f64,
    pub s12: f64,
    /// Set when the point is too close to the boundary for the
    /// finite-difference step to be trusted.
    pub warning: Option<String>,
}

impl<'a> InteriorField<'a> {
    pub fn new(mesh: &'a BoundaryMesh, state: &'a BoundaryState, material: &Material, quadrature: &QuadratureConfig) -> Result<Self> {
        if state.n_nodes() != mesh.n_nodes() {
            return Err(BinnError::Config("boundary state does not match the mesh".into()));
        }
        Ok(Self {
            mesh,
            state,
            material: *material,
            integrator: ElementIntegrator::new(material, mesh.layout, quadrature)?,
        })
    }

    /// `u(P) = ∮ U t dS - ∮ T u dS` without the domain check.
    fn representation(&self, p: Vec2) -> Vec2 {
        let mut u = Vec2::zeros();
        for (ei, e) in self.mesh.elements.iter().enumerate() {
            let b = self.integrator.regular(p, e);
            let s = 6 * ei;
            let te = nalgebra::Vector6::from_column_slice(&self.state.t[s..s + 6]);
            let ue = nalgebra::Vector6::from_column_slice(&self.state.u[s..s + 6]);
            u += b.u * te - b.t * ue;
        }
        u
    }

    pub fn displacement(&self, p: Vec2) -> Result<Vec2> {
        self.check_inside(p)?;
        Ok(self.representation(p))
    }

    fn check_inside(&self, p: Vec2) -> Result<f64> {
        let d = self.mesh.distance_to_boundary(p);
        if !self.mesh.contains(p) || d <= 1e-12 * self.mesh.diameter() {
            return Err(BinnError::Domain(format!(
                "({}, {}) is not strictly inside the domain",
                p.x, p.y
            )));
        }
        Ok(d)
    }

    /// Stress by central differences of the displacement with step `h`
    /// (default [`FD_STEP_FRACTION`] times the diameter).
    pub fn stress(&self, p: Vec2, h: Option<f64>) -> Result<StressSample> {
        let d = self.check_inside(p)?;
        let h = h.unwrap_or(FD_STEP_FRACTION * self.mesh.diameter());
        let warning = (d < 10.0 * h).then(|| {
            format!("clearance {d:.3e} is below 10 finite-difference steps ({h:.3e}); stress may be inaccurate")
        });
        let mut grad = Block2::zeros();
        for b in 0..2 {
            let mut e = Vec2::zeros();
            e[b] = h;
            let du = (self.representation(p + e) - self.representation(p - e)) / (2.0 * h);
            grad[(0, b)] = du.x;
            grad[(1, b)] = du.y;
        }
        let s = stress_from_gradient(&grad, &self.material);
        Ok(StressSample {
            s11: s[(0, 0)],
            s22: s[(1, 1)],
            s12: s[(0, 1)],
            warning,
        })
    }
}

/// `|num - exact| / max|exact|` per sample.
pub fn relative_error(num: &[f64], exact: &[f64]) -> Result<Vec<f64>> {
    if num.len() != exact.len() {
        return Err(BinnError::Config("sample sets differ in length".into()));
    }
    let max = exact.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if max == 0.0 {
        return Err(BinnError::UndefinedNormalization);
    }
    Ok(num.iter().zip(exact).map(|(n, e)| (n - e).abs() / max).collect())
}

pub fn max_relative_error(num: &[f64], exact: &[f64]) -> Result<f64> {
    Ok(relative_error(num, exact)?.into_iter().fold(0.0, f64::max))
}

/// Closed-form benchmark fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    /// Cantilever `[0, L] x [-H/2, H/2]` under end moment with `sigma_11 = 1000 y`,
    /// gauge fixed by `u1(0, y) = 0`, `u2(0, 0) = 0`.
    BeamPureBending,
}

impl std::str::FromStr for Benchmark {
    type Err = BinnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beam-pure-bending" => Ok(Benchmark::BeamPureBending),
            other => Err(BinnError::Unsupported(format!("no closed form for '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactSample {
    pub u: Vec2,
    pub s11: f64,
    pub s22: f64,
    pub s12: f64,
}

/// Bending stress gradient `M / I`.
pub const BEAM_STRESS_SLOPE: f64 = 1000.0;

pub fn benchmark_exact(problem: Benchmark, p: Vec2, material: &Material) -> ExactSample {
    match problem {
        Benchmark::BeamPureBending => {
            let (e, nu) = (material.youngs_modulus, material.poisson_ratio);
            let (ep, nup) = match material.mode {
                PlaneMode::PlaneStrain => (e / (1.0 - nu * nu), nu / (1.0 - nu)),
                PlaneMode::PlaneStress => (e, nu),
            };
            let k = BEAM_STRESS_SLOPE / ep;
            ExactSample {
                u: Vec2::new(k * p.x * p.y, -0.5 * k * (p.x * p.x + nup * p.y * p.y)),
                s11: BEAM_STRESS_SLOPE * p.y,
                s22: 0.0,
                s12: 0.0,
            }
        }
    }
}

/// Exact boundary state of a benchmark: displacements and `sigma n` at every node.
pub fn benchmark_state(problem: Benchmark, mesh: &BoundaryMesh, material: &Material, kinds: Vec<crate::solver::BcKind>) -> BoundaryState {
    let n = mesh.n_nodes();
    let mut state = BoundaryState {
        u: vec![0.0; 2 * n],
        t: vec![0.0; 2 * n],
        kinds,
    };
    for node in &mesh.nodes {
        let ex = benchmark_exact(problem, node.position, material);
        let sigma = Block2::new(ex.s11, ex.s12, ex.s12, ex.s22);
        let t = sigma * node.normal;
        state.u[2 * node.index] = ex.u.x;
        state.u[2 * node.index + 1] = ex.u.y;
        state.t[2 * node.index] = t.x;
        state.t[2 * node.index + 1] = t.y;
    }
    state
}

/// One grid sample. Masked points carry no field values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub inside: bool,
    pub u1: Option<f64>,
    pub u2: Option<f64>,
    pub s11: Option<f64>,
    pub s22: Option<f64>,
    pub s12: Option<f64>,
    pub err_u1: Option<f64>,
    pub err_u2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct FieldGrid {
    pub nx: usize,
    pub ny: usize,
    pub clearance: f64,
    pub points: Vec<GridPoint>,
}

impl FieldGrid {
    /// Sample an `nx x ny` lattice spanning the bounding box. Points outside
    /// the domain or within `clearance` of the boundary are masked. With an
    /// exact field, displacement errors are normalized by the largest exact
    /// magnitude over the unmasked samples.
    pub fn sample(field: &InteriorField, nx: usize, ny: usize, exact: Option<&(dyn Fn(Vec2) -> Vec2 + Sync)>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(BinnError::Config("grid needs at least 2 x 2 points".into()));
        }
        let (lo, hi) = field.mesh.bounding_box();
        let clearance = GRID_CLEARANCE_FRACTION * field.mesh.diameter();
        let coords: Vec<Vec2> = (0..ny)
            .flat_map(|j| {
                (0..nx).map(move |i| {
                    Vec2::new(
                        lo.x + (hi.x - lo.x) * i as f64 / (nx - 1) as f64,
                        lo.y + (hi.y - lo.y) * j as f64 / (ny - 1) as f64,
                    )
                })
            })
            .collect();
        let mut points: Vec<GridPoint> = coords
            .par_iter()
            .map(|&p| -> Result<GridPoint> {
                let inside = field.mesh.contains(p) && field.mesh.distance_to_boundary(p) >= clearance;
                let mut gp = GridPoint {
                    x: p.x,
                    y: p.y,
                    inside,
                    u1: None,
                    u2: None,
                    s11: None,
                    s22: None,
                    s12: None,
                    err_u1: None,
                    err_u2: None,
                };
                if inside {
                    let u = field.displacement(p)?;
                    let s = field.stress(p, None)?;
                    gp.u1 = Some(u.x);
                    gp.u2 = Some(u.y);
                    gp.s11 = Some(s.s11);
                    gp.s22 = Some(s.s22);
                    gp.s12 = Some(s.s12);
                }
                Ok(gp)
            })
            .collect::<Result<_>>()?;
        if let Some(exact) = exact {
            let ex: Vec<Option<Vec2>> = points.iter().map(|g| g.inside.then(|| exact(Vec2::new(g.x, g.y)))).collect();
            let max = ex.iter().flatten().fold(0.0f64, |a, v| a.max(v.amax()));
            if max > 0.0 {
                for (g, e) in points.iter_mut().zip(&ex) {
                    if let (Some(e), Some(u1), Some(u2)) = (e, g.u1, g.u2) {
                        g.err_u1 = Some((u1 - e.x).abs() / max);
                        g.err_u2 = Some((u2 - e.y).abs() / max);
                    }
                }
            }
        }
        Ok(Self { nx, ny, clearance, points })
    }

    pub fn n_inside(&self) -> usize {
        self.points.iter().filter(|p| p.inside).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::assemble;
    use crate::mesh::{build_mesh, rectangle_loop};
    use crate::solver::tests::{patch_bcs, patch_mesh};
    use crate::solver::{bem_solve, BcKind};
    use approx::assert_abs_diff_eq;

    fn patch() -> (BoundaryMesh, BoundaryState, Material) {
        let mesh = patch_mesh();
        let m = Material::plane_strain(2000.0, 0.3).unwrap();
        let mats = assemble(&mesh, &m, &QuadratureConfig::default()).unwrap();
        let state = bem_solve(&mats, &patch_bcs(&mesh)).unwrap();
        (mesh, state, m)
    }

    #[test]
    fn patch_interior_fields() {
        let (mesh, state, m) = patch();
        let f = InteriorField::new(&mesh, &state, &m, &QuadratureConfig::default()).unwrap();
        let pin = mesh.nearest_node_on_segment(0, Vec2::zeros());
        let x0 = mesh.nodes[pin].position.x;
        let c = Vec2::new(0.5, 0.5);
        let u = f.displacement(c).unwrap();
        assert_abs_diff_eq!(u.x, -1.95e-4 * (0.5 - x0), epsilon = 1e-8 * 4.55e-4);
        assert_abs_diff_eq!(u.y, 4.55e-4 * 0.5, epsilon = 1e-8 * 4.55e-4);
        let s = f.stress(c, None).unwrap();
        assert!(s.warning.is_none());
        assert_abs_diff_eq!(s.s22, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.s11, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.s12, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn stress_step_convergence() {
        // Quadratic field so the difference error is visible: pure bending.
        let outer = rectangle_loop(Vec2::new(0.0, -0.05), Vec2::new(1.0, 0.05), ["b", "r", "t", "l"], [20, 3, 20, 3]);
        let mesh = build_mesh(&[outer], -0.8, 0.8).unwrap();
        let m = Material::plane_strain(1.0, 0.3).unwrap();
        let state = benchmark_state(Benchmark::BeamPureBending, &mesh, &m, vec![BcKind::Neumann; 2 * mesh.n_nodes()]);
        let f = InteriorField::new(&mesh, &state, &m, &QuadratureConfig::default()).unwrap();
        // A cubic perturbation through the stress sample: compare two steps.
        let p = Vec2::new(0.5, 0.02);
        let err = |h: f64| (f.stress(p, Some(h)).unwrap().s11 - 20.0).abs();
        let (e1, e2) = (err(4e-3), err(2e-3));
        assert!(e1 < 1e-2 * 20.0);
        assert!(e2 <= e1 * 0.3 || e2 < 1e-8 * 20.0, "{e1} {e2}");
    }

    #[test]
    fn rigid_state() {
        let mesh = patch_mesh();
        let m = Material::plane_strain(2000.0, 0.3).unwrap();
        let n = mesh.n_nodes();
        let mut state = BoundaryState {
            u: vec![0.0; 2 * n],
            t: vec![0.0; 2 * n],
            kinds: vec![BcKind::Dirichlet; 2 * n],
        };
        // Shift of the size of the patch-test displacements (stress ~ 1).
        for k in 0..n {
            state.u[2 * k] = 2.5e-4;
            state.u[2 * k + 1] = -1.5e-3;
        }
        let f = InteriorField::new(&mesh, &state, &m, &QuadratureConfig::default()).unwrap();
        for p in [Vec2::new(0.5, 0.5), Vec2::new(0.2, 0.9)] {
            let u = f.displacement(p).unwrap();
            assert_abs_diff_eq!(u.x, 2.5e-4, epsilon = 1e-10);
            assert_abs_diff_eq!(u.y, -1.5e-3, epsilon = 1e-10);
            let s = f.stress(p, None).unwrap();
            for v in [s.s11, s.s22, s.s12] {
                assert!(v.abs() < 1e-8, "{v}");
            }
        }
    }

    #[test]
    fn domain_errors_and_warning() {
        let (mesh, state, m) = patch();
        let f = InteriorField::new(&mesh, &state, &m, &QuadratureConfig::default()).unwrap();
        assert!(matches!(f.displacement(Vec2::new(1.5, 0.5)), Err(BinnError::Domain(_))));
        assert!(matches!(f.displacement(Vec2::new(0.5, 0.0)), Err(BinnError::Domain(_))));
        let s = f.stress(Vec2::new(0.5, 1e-4), None).unwrap();
        assert!(s.warning.is_some());
    }

    #[test]
    fn approaching_a_boundary_node() {
        let outer = rectangle_loop(Vec2::zeros(), Vec2::new(1.0, 1.0), ["bottom", "right", "top", "left"], [20; 4]);
        let mesh = build_mesh(&[outer], -0.8, 0.8).unwrap();
        let m = Material::plane_strain(2000.0, 0.3).unwrap();
        let mats = assemble(&mesh, &m, &QuadratureConfig::default()).unwrap();
        let state = bem_solve(&mats, &patch_bcs(&mesh)).unwrap();
        let f = InteriorField::new(&mesh, &state, &m, &QuadratureConfig::default()).unwrap();
        let umax = state.u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let top = mesh.segment_index("top").unwrap();
        let node = mesh.nodes_on_segment(top).find(|n| n.local == 1 && (n.position.x - 0.525).abs() < 1e-12).unwrap();
        let le = mesh.elements[node.element].length;
        let target = state.displacement(node.index);
        let mut last = f64::INFINITY;
        for c in [5.0, 2.0, 1.0, 0.5] {
            let p = node.position - node.normal * (c * le);
            let gap = (f.displacement(p).unwrap() - target).amax() / umax;
            // The remaining gap is the linear field's change over c * le.
            let expected = 4.55e-4 * c * le / umax;
            assert!((gap - expected).abs() < 5e-3, "c = {c}: {gap} vs {expected}");
            assert!(gap < last);
            last = gap;
        }
    }

    #[test]
    fn relative_error_properties() {
        let exact = [1.0, -2.0, 0.5];
        assert_eq!(relative_error(&exact, &exact).unwrap(), vec![0.0; 3]);
        let off: Vec<f64> = exact.iter().map(|v| v + 0.02).collect();
        for e in relative_error(&off, &exact).unwrap() {
            assert_abs_diff_eq!(e, 0.01, epsilon = 1e-15);
        }
        let num = [1.1, -2.3, 0.4];
        let a = relative_error(&num, &exact).unwrap();
        let b = relative_error(&num.map(|v| 2.0 * v), &exact.map(|v| 2.0 * v)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
        assert!(matches!(relative_error(&[1.0], &[0.0]), Err(BinnError::UndefinedNormalization)));
    }

    #[test]
    fn beam_closed_form() {
        let m = Material::plane_strain(2e5, 0.3).unwrap();
        let b = Benchmark::BeamPureBending;
        assert_abs_diff_eq!(benchmark_exact(b, Vec2::new(0.3, 0.05), &m).s11, 50.0, epsilon = 1e-12);
        for y in [-0.05, 0.0, 0.03] {
            assert_eq!(benchmark_exact(b, Vec2::new(0.0, y), &m).u.x, 0.0);
        }
        assert_eq!(benchmark_exact(b, Vec2::zeros(), &m).u, Vec2::zeros());
        assert!("plate-with-hole".parse::<Benchmark>().is_err());

        // The field is a solution: its strain gives back the stated stress
        // everywhere (so equilibrium and the traction data hold), checked by
        // differencing the displacement.
        for p in [Vec2::new(0.1, -0.04), Vec2::new(0.7, 0.02)] {
            let h = 1e-5;
            let mut g = Block2::zeros();
            for d in 0..2 {
                let mut e = Vec2::zeros();
                e[d] = h;
                let du = (benchmark_exact(b, p + e, &m).u - benchmark_exact(b, p - e, &m).u) / (2.0 * h);
                g[(0, d)] = du.x;
                g[(1, d)] = du.y;
            }
            let s = stress_from_gradient(&g, &m);
            assert_abs_diff_eq!(s[(0, 0)], 1000.0 * p.y, epsilon = 1e-6);
            assert_abs_diff_eq!(s[(1, 1)], 0.0, epsilon = 1e-6);
            assert_abs_diff_eq!(s[(0, 1)], 0.0, epsilon = 1e-6);
        }
    }

    fn beam_state() -> (BoundaryMesh, BoundaryState, Material) {
        let outer = rectangle_loop(Vec2::new(0.0, -0.05), Vec2::new(1.0, 0.05), ["b", "r", "t", "l"], [81, 9, 81, 9]);
        let mesh = build_mesh(&[outer], -0.8, 0.8).unwrap();
        let m = Material::plane_strain(2e5, 0.3).unwrap();
        let state = benchmark_state(Benchmark::BeamPureBending, &mesh, &m, vec![BcKind::Neumann; 2 * mesh.n_nodes()]);
        (mesh, state, m)
    }

    #[test]
    fn beam_exact_data_interior() {
        let (mesh, state, m) = beam_state();
        let f = InteriorField::new(&mesh, &state, &m, &QuadratureConfig::default()).unwrap();
        let b = Benchmark::BeamPureBending;
        let p = Vec2::new(0.5, 0.0);
        let u = f.displacement(p).unwrap();
        let ex = benchmark_exact(b, p, &m).u;
        let umax = benchmark_exact(b, Vec2::new(1.0, 0.0), &m).u.amax();
        assert!((u - ex).amax() < 1e-7 * umax, "{}", (u - ex).amax() / umax);
        let q = Vec2::new(0.5, 0.025);
        let s = f.stress(q, None).unwrap();
        assert!((s.s11 - 25.0).abs() < 1e-4 * 25.0, "{}", s.s11);
    }

    #[test]
    fn grid_masks_and_errors() {
        let (mesh, state, m) = patch();
        let f = InteriorField::new(&mesh, &state, &m, &QuadratureConfig::default()).unwrap();
        let pin = mesh.nodes[mesh.nearest_node_on_segment(0, Vec2::zeros())].position.x;
        let exact = move |p: Vec2| Vec2::new(-1.95e-4 * (p.x - pin), 4.55e-4 * p.y);
        let grid = FieldGrid::sample(&f, 6, 5, Some(&exact)).unwrap();
        assert_eq!(grid.points.len(), 30);
        for g in &grid.points {
            let edge = g.x == 0.0 || g.x == 1.0 || g.y == 0.0 || g.y == 1.0;
            assert_eq!(g.inside, !edge);
            assert_eq!(g.u1.is_some(), g.inside);
            if g.inside {
                assert!(g.err_u1.unwrap() < 1e-8 && g.err_u2.unwrap() < 1e-8);
                assert_abs_diff_eq!(g.s22.unwrap(), 1.0, epsilon = 1e-6);
            }
        }
        assert_eq!(grid.n_inside(), 12);
    }
}
